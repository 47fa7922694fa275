#include "tcoh/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include <json.hpp>

#include "tcoh/checkpoint.hpp"
#include "tcoh/config.hpp"
#include "tcoh/error.hpp"
#include "tcoh/eval.hpp"
#include "tcoh/markov.hpp"
#include "tcoh/spectral.hpp"
#include "tcoh/train.hpp"

namespace tcoh::commands {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Maps library errors onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValueError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

int cmd_gen_rotating(const data::RotatingPointsSpec& spec, const fs::path& out_dir, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&] {
    const data::SequenceDataset ds = data::gen_rotating_points(spec);
    const fs::path manifest = data::save_dataset(ds, out_dir);
    out << "wrote " << ds.frame_count() << " frames of dimension " << 2 * spec.num_points << " to " << manifest.string()
        << '\n';
    return kOk;
  });
}

int cmd_gen_square(const data::MovingSquareSpec& spec, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const data::SequenceDataset ds = data::gen_moving_square(spec);
    const fs::path manifest = data::save_dataset(ds, out_dir);
    out << "wrote " << ds.sequences.size() << " sequences x " << spec.frames_per_sequence << " frames to "
        << manifest.string() << '\n';
    return kOk;
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const config::ExperimentConfig cfg = config::load_config(args.config);
    const int total_epochs = args.epochs.value_or(cfg.epochs);
    if (total_epochs < 0) throw ConfigError("epochs must be non-negative");

    const data::SequenceDataset first = config::make_dataset(cfg.data, 1);
    if (first.frame_count() == 0) throw ValueError("the training data has no frames");

    Checkpoint ckpt;
    if (args.resume) {
      ckpt = load_checkpoint(*args.resume);
      if (ckpt.network.input_shape() != first.frame_shape()) {
        throw ConfigError("checkpoint input " + shape_string(ckpt.network.input_shape()) +
                          " does not match the data frames " + shape_string(first.frame_shape()));
      }
    } else {
      ckpt.network = config::build_network(cfg, first.frame_shape());
    }

    const data::SequenceDataset eval_ds =
        cfg.eval_kind == config::EvalKind::none ? data::SequenceDataset{}
                                                : config::make_dataset(cfg.eval_data.value_or(cfg.data), 0);
    if (cfg.eval_kind != config::EvalKind::none && !eval_ds.has_ground_truth()) {
      throw ConfigError("eval '" + config::eval_kind_name(cfg.eval_kind) + "' needs data with ground truth");
    }

    TrainOptions opts;
    opts.sgd = cfg.sgd;
    opts.first_epoch = static_cast<int>(ckpt.epochs_completed) + 1;
    opts.epochs = std::max(0, total_epochs - static_cast<int>(ckpt.epochs_completed));
    opts.ul_gradient_sign = cfg.ul_gradient_sign;
    opts.record_wall_clock = cfg.record_wall_clock;
    if (cfg.eval_kind == config::EvalKind::decode_angle) {
      opts.evaluate = [&](const Network& net, const EpochTrace&) {
        return eval::evaluate_angle(net, eval_ds).total_abs_error;
      };
    } else if (cfg.eval_kind == config::EvalKind::localize) {
      opts.evaluate = [&](const Network& net, const EpochTrace&) {
        return eval::evaluate_localization(net, eval_ds).correlation;
      };
    }

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) throw IoError("cannot create " + args.out_dir.string() + ": " + ec.message());
    const fs::path metrics_path = args.out_dir / "metrics.csv";
    const fs::path ckpt_path = args.out_dir / "checkpoint.bin";
    const bool append = args.resume.has_value() && fs::exists(metrics_path);
    if (!append) write_metrics_csv(metrics_path, {}, ckpt.network.ul_count(), false);

    // Checkpoint and metrics are written after every epoch so an interrupted
    // run can resume from the last completed one.
    const auto source = [&](int epoch) { return epoch == 1 ? first : config::make_dataset(cfg.data, epoch); };
    for (int e = 0; e < opts.epochs; ++e) {
      TrainOptions one = opts;
      one.first_epoch = opts.first_epoch + e;
      one.epochs = 1;
      const std::vector<MetricsRow> rows = train_online(ckpt.network, source, one);
      ++ckpt.epochs_completed;
      write_metrics_csv(metrics_path, rows, ckpt.network.ul_count(), true);
      save_checkpoint(ckpt_path, ckpt);
      const MetricsRow& r = rows.front();
      out << "epoch " << r.epoch;
      for (std::size_t k = 0; k < r.ul_grad_norms.size(); ++k) out << "  ul" << k << "=" << r.ul_grad_norms[k];
      out << "  eval=" << r.eval_metric << '\n';
    }
    if (opts.epochs == 0) save_checkpoint(ckpt_path, ckpt);
    out << "checkpoint " << ckpt_path.string() << " after " << ckpt.epochs_completed << " epochs\n";
    return kOk;
  });
}

int cmd_closed_form(const ClosedFormArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const data::SequenceDataset ds = data::load_image_sequence(args.manifest);
    std::map<std::vector<double>, std::size_t> index;
    std::vector<std::vector<std::size_t>> seqs;
    for (const auto& s : ds.sequences) {
      seqs.emplace_back();
      for (const Tensor& f : s.frames) {
        const auto [it, inserted] = index.emplace(f.data(), index.size());
        seqs.back().push_back(it->second);
      }
    }
    const std::size_t n = index.size();
    if (n < 2) throw ValueError("closed-form: the data has fewer than two distinct frames");
    if (args.dim == 0 || args.dim >= n) {
      throw ValueError("closed-form: --dim must lie in [1, " + std::to_string(n - 1) + "] for " + std::to_string(n) +
                       " states");
    }

    linalg::Matrix counts(n, n);
    double total = 0.0;
    for (const auto& s : seqs) {
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        counts(s[k], s[k + 1]) += 1.0;
        total += 1.0;
      }
      if (args.chain == ChainKind::cycle && s.size() > 1) {
        counts(s.back(), s.front()) += 1.0;
        total += 1.0;
      }
    }
    if (total == 0.0) throw ValueError("closed-form: no adjacent frame pairs");
    counts *= 1.0 / total;
    const markov::MarkovStats stats = markov::stats_from_pairs(std::move(counts));

    std::optional<linalg::Matrix> rotation;
    if (args.rotation) {
      const auto rows = data::read_csv(*args.rotation);
      linalg::Matrix r(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != r.cols()) throw ValueError("closed-form: ragged rotation CSV");
        std::copy(rows[i].begin(), rows[i].end(), r.row(i).begin());
      }
      if (r.rows() != args.dim || r.cols() != args.dim) {
        throw ValueError("closed-form: rotation must be " + std::to_string(args.dim) + " x " + std::to_string(args.dim));
      }
      rotation = r;
    }

    const spectral::ClosedFormResult res = spectral::closed_form_embedding(stats, args.dim, rotation);
    const double residual = spectral::stationarity_residual(res, stats);
    const double objective = markov::objective_on_chain(res.y, stats);

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) throw IoError("cannot create " + args.out_dir.string() + ": " + ec.message());
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < res.y.rows(); ++i) rows.emplace_back(res.y.row(i).begin(), res.y.row(i).end());
    data::write_csv(args.out_dir / "embedding.csv", rows);

    json diag;
    diag["states"] = n;
    diag["dim"] = args.dim;
    diag["chain"] = args.chain == ChainKind::cycle ? "cycle" : "path";
    diag["eigenvalues"] = res.lambdas;
    diag["spectrum"] = res.spectrum;
    diag["j_opt"] = res.j_opt;
    diag["objective"] = objective;
    diag["stationarity_residual"] = residual;
    write_json(args.out_dir / "diagnostics.json", diag);

    out << std::setprecision(10) << "states " << n << ", J_opt " << res.j_opt << ", objective " << objective
        << ", stationarity residual " << residual << '\n';
    return kOk;
  });
}

int cmd_gradcheck(const gradcheck::Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto results = gradcheck::run_all(opts);
    bool ok = true;
    for (const auto& r : results) {
      out << std::left << std::setw(16) << r.name << " instances " << r.instances << "  max rel err "
          << std::scientific << std::setprecision(3) << r.max_rel_error << "  tol " << r.tolerance << "  "
          << (r.passed() ? "ok" : "FAILED") << std::defaultfloat << '\n';
      ok = ok && r.passed();
    }
    if (!ok) {
      err << "gradient check failed:";
      for (const auto& r : results)
        if (!r.passed()) err << ' ' << r.name;
      err << '\n';
      return kCheckFailed;
    }
    return kOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const config::EvalKind kind = config::parse_eval_kind(args.kind);
    if (kind == config::EvalKind::none) throw ConfigError("eval: choose decode-angle or localize");
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const data::SequenceDataset ds = data::load_image_sequence(args.manifest);
    if (!ds.has_ground_truth()) throw ValueError("eval: " + args.manifest.string() + " has no ground truth");

    json result;
    result["kind"] = args.kind;
    result["frames"] = ds.frame_count();
    if (kind == config::EvalKind::decode_angle) {
      const eval::AngleDecoding d = eval::evaluate_angle(ckpt.network, ds);
      result["total_abs_error"] = d.total_abs_error;
      result["sin_abs_error"] = d.sin_abs_error;
      result["cos_abs_error"] = d.cos_abs_error;
      result["r2"] = finite_or_null(d.r2);
      result["sin_r2"] = finite_or_null(d.sin_r2);
      result["cos_r2"] = finite_or_null(d.cos_r2);
    } else {
      const eval::Localization l = eval::evaluate_localization(ckpt.network, ds);
      for (const auto& w : l.warnings) err << "warning: " << w << '\n';
      result["correlation"] = l.correlation;
      result["row_correlation"] = l.row_correlation;
      result["col_correlation"] = l.col_correlation;
      result["warnings"] = l.warnings;
    }
    out << result.dump(2) << '\n';
    if (args.out_json) write_json(*args.out_json, result);
    return kOk;
  });
}

}  // namespace tcoh::commands
