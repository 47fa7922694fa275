#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tcoh/commands.hpp"
#include "tcoh/data.hpp"
#include "tcoh/error.hpp"
#include "tcoh/eval.hpp"
#include "tcoh/gradcheck.hpp"
#include "tcoh/linalg.hpp"
#include "tcoh/markov.hpp"
#include "tcoh/spectral.hpp"
#include "tcoh/ul.hpp"

namespace py = pybind11;
using tcoh::linalg::Matrix;
using tcoh::linalg::Vector;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw tcoh::DimensionError("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Vector to_vector(const Array& a) {
  if (a.ndim() != 1) throw tcoh::DimensionError("expected a 1-D array");
  return Vector(a.data(), a.data() + a.size());
}

Array from_matrix(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

Array from_vector(const Vector& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<tcoh::ul::Segment> to_segments(const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  std::vector<tcoh::ul::Segment> s;
  for (const auto& [b, e] : ranges) s.push_back({b, e});
  return s;
}

py::dict stats_dict(const tcoh::markov::MarkovStats& s) {
  py::dict d;
  d["p"] = from_vector(s.p);
  d["pairs"] = from_matrix(s.pairs);
  d["laplacian"] = from_matrix(s.laplacian);
  d["degree"] = from_matrix(s.degree);
  return d;
}

// Stacks every frame of every sequence into one array with a leading frame axis.
py::tuple dataset_arrays(const tcoh::data::SequenceDataset& ds) {
  const auto& shape = ds.frame_shape();
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(ds.frame_count())};
  for (std::size_t e : shape) dims.push_back(static_cast<py::ssize_t>(e));
  Array frames(dims);
  double* out = frames.mutable_data();
  std::vector<std::vector<double>> truth;
  for (const auto& s : ds.sequences) {
    for (const auto& f : s.frames) out = std::copy(f.data().begin(), f.data().end(), out);
    truth.insert(truth.end(), s.ground_truth.begin(), s.ground_truth.end());
  }
  Array gt({truth.size(), truth.empty() ? std::size_t{0} : truth.front().size()});
  double* g = gt.mutable_data();
  for (const auto& row : truth) g = std::copy(row.begin(), row.end(), g);
  return py::make_tuple(frames, gt);
}

class UlLayer {
 public:
  UlLayer(double mu, double eps, double ridge, double combine_weight, double init_scale)
      : hyper_{mu, eps, ridge, combine_weight, init_scale} {
    hyper_.validate();
  }
  Array step(const Array& y) { return from_vector(tcoh::ul::ul_forward_vec(state_, to_vector(y), hyper_)); }
  void reset() { state_ = {}; }
  Array y_hat() const { return from_vector(state_.y_hat); }
  Array y_bar() const { return from_vector(state_.y_bar); }
  Array w() const { return from_matrix(state_.w); }
  Array b() const { return from_matrix(state_.b); }
  std::uint64_t t() const { return state_.t; }

 private:
  tcoh::ul::UlHyper hyper_;
  tcoh::ul::UlStateVec state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal-coherence learning: closed-form chain embedding, UL layers and their oracles";

  py::register_exception<tcoh::Error>(m, "Error", PyExc_RuntimeError);

  m.def("eig_sym", [](const Array& s) {
    const auto r = tcoh::linalg::eig_sym(to_matrix(s));
    return py::make_tuple(from_vector(r.values), from_matrix(r.vectors));
  });
  m.def("eig_gen_sym", [](const Array& a, const Array& b) {
    const auto r = tcoh::linalg::eig_gen_sym(to_matrix(a), to_matrix(b));
    return py::make_tuple(from_vector(r.values), from_matrix(r.vectors));
  });
  m.def("cholesky", [](const Array& s) { return from_matrix(tcoh::linalg::cholesky(to_matrix(s))); });
  m.def("log_det_pd", [](const Array& s) { return tcoh::linalg::log_det_pd(to_matrix(s)); });
  m.def("inv_sqrt_sym", [](const Array& s) { return from_matrix(tcoh::linalg::inv_sqrt_sym(to_matrix(s))); });
  m.def("solve", [](const Array& s, const Array& b) {
    return from_vector(tcoh::linalg::solve(to_matrix(s), to_vector(b)));
  });
  m.def("least_squares", [](const Array& x, const Array& y) {
    return from_vector(tcoh::linalg::least_squares(to_matrix(x), to_vector(y)));
  });

  m.def(
      "markov_stats", [](const std::vector<std::size_t>& states, std::size_t n) {
        return stats_dict(tcoh::markov::stats_from_sequence(states, n));
      },
      py::arg("states"), py::arg("n"));
  m.def(
      "closed_form_embedding",
      [](const std::vector<std::size_t>& states, std::size_t n, std::size_t d, std::optional<Array> rotation) {
        const auto stats = tcoh::markov::stats_from_sequence(states, n);
        std::optional<Matrix> r;
        if (rotation) r = to_matrix(*rotation);
        const auto res = tcoh::spectral::closed_form_embedding(stats, d, r);
        py::dict out;
        out["y"] = from_matrix(res.y);
        out["u"] = from_matrix(res.u);
        out["lambdas"] = from_vector(res.lambdas);
        out["j_opt"] = res.j_opt;
        out["objective"] = tcoh::markov::objective_on_chain(res.y, stats);
        out["stationarity_residual"] = tcoh::spectral::stationarity_residual(res, stats);
        return out;
      },
      py::arg("states"), py::arg("n"), py::arg("d"), py::arg("rotation") = py::none());
  m.def(
      "objective_on_chain",
      [](const Array& y, const std::vector<std::size_t>& states, std::size_t n) {
        return tcoh::markov::objective_on_chain(to_matrix(y), tcoh::markov::stats_from_sequence(states, n));
      },
      py::arg("y"), py::arg("states"), py::arg("n"));

  m.def(
      "batch_objective",
      [](const Array& y, const std::vector<std::pair<std::size_t, std::size_t>>& segments, double ridge) {
        return tcoh::ul::batch_objective(to_matrix(y), to_segments(segments), ridge);
      },
      py::arg("outputs"), py::arg("segments"), py::arg("ridge") = 1e-6);
  m.def(
      "batch_gradient",
      [](const Array& y, const std::vector<std::pair<std::size_t, std::size_t>>& segments, double ridge) {
        return from_matrix(tcoh::ul::batch_gradient(to_matrix(y), to_segments(segments), ridge));
      },
      py::arg("outputs"), py::arg("segments"), py::arg("ridge") = 1e-6);

  py::class_<UlLayer>(m, "UlLayer")
      .def(py::init<double, double, double, double, double>(), py::arg("mu") = 0.5, py::arg("eps") = 0.001,
           py::arg("ridge") = 1e-6, py::arg("combine_weight") = 1.0, py::arg("init_scale") = 1.0)
      .def("step", &UlLayer::step, "Feeds one output vector; returns the local gradient.")
      .def("reset", &UlLayer::reset)
      .def_property_readonly("y_hat", &UlLayer::y_hat)
      .def_property_readonly("y_bar", &UlLayer::y_bar)
      .def_property_readonly("w", &UlLayer::w)
      .def_property_readonly("b", &UlLayer::b)
      .def_property_readonly("t", &UlLayer::t);

  m.def(
      "gen_rotating_points",
      [](std::size_t points, double deg, std::size_t revolutions, double noise, std::uint64_t seed) {
        return dataset_arrays(tcoh::data::gen_rotating_points({points, deg, revolutions, noise, seed}));
      },
      py::arg("points") = 28, py::arg("deg") = 5.0, py::arg("revolutions") = 1, py::arg("noise") = 0.0,
      py::arg("seed") = 1);
  m.def(
      "gen_moving_square",
      [](std::size_t size, std::size_t square, const std::string& trajectory, std::size_t frames,
         std::size_t sequences, std::uint64_t seed) {
        tcoh::data::MovingSquareSpec spec{size, size, square, tcoh::data::parse_trajectory(trajectory), frames,
                                          sequences, seed};
        return dataset_arrays(tcoh::data::gen_moving_square(spec));
      },
      py::arg("size") = 64, py::arg("square") = 8, py::arg("trajectory") = "bounce", py::arg("frames") = 26,
      py::arg("sequences") = 10, py::arg("seed") = 1);

  m.def("decode_angle", [](const Array& outputs, const Array& angles) {
    const auto d = tcoh::eval::decode_angle(to_matrix(outputs), to_vector(angles));
    py::dict out;
    out["total_abs_error"] = d.total_abs_error;
    out["r2"] = d.r2;
    out["sin_r2"] = d.sin_r2;
    out["cos_r2"] = d.cos_r2;
    return out;
  });

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t instances) {
        tcoh::gradcheck::Options opts;
        opts.seed = seed;
        opts.instances = instances;
        py::dict out;
        for (const auto& r : tcoh::gradcheck::run_all(opts)) out[py::str(r.name)] = r.max_rel_error;
        return out;
      },
      py::arg("seed") = 1, py::arg("instances") = 10);

  m.def(
      "train",
      [](const std::string& config, const std::string& out_dir, std::optional<int> epochs) {
        tcoh::commands::TrainArgs args{config, out_dir, std::nullopt, epochs};
        std::ostringstream out, err;
        const int code = tcoh::commands::cmd_train(args, out, err);
        if (code != 0) throw tcoh::Error("train failed (exit " + std::to_string(code) + "): " + err.str());
        return out.str();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("epochs") = py::none(),
      "Runs the train command; writes metrics.csv and checkpoint.bin under out_dir.");
}
