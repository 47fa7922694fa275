#include "tcoh/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tcoh/error.hpp"

namespace tcoh {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

OnlineTrainer::OnlineTrainer(Network& net, nn::SgdConfig sgd, double ul_gradient_sign)
    : net_(net), sgd_(sgd), sign_(ul_gradient_sign) {
  sgd_.validate();
}

void OnlineTrainer::begin_sequence() { net_.reset_ul_state(); }

StepResult OnlineTrainer::step(const Tensor& x) {
  auto& stages = net_.stages();
  const std::size_t n = stages.size();
  if (x.shape() != net_.input_shape()) {
    throw DimensionError("training frame " + shape_string(x.shape()) + " does not match network input " +
                         shape_string(net_.input_shape()));
  }

  std::vector<Tensor> acts;
  acts.reserve(n + 1);
  acts.push_back(x);
  std::vector<Tensor> local(n);
  StepResult result;
  for (std::size_t i = 0; i < n; ++i) {
    acts.push_back(forward_layer(stages[i].layer, acts[i]));
    if (!stages[i].ul) continue;
    UlAttachment& ula = *stages[i].ul;
    const Tensor& y = acts.back();
    local[i] = std::visit(Overloaded{[&](ul::UlStateVec& s) {
                                       return Tensor(y.shape(), ul::ul_forward_vec(s, y.values(), ula.hyper));
                                     },
                                     [&](ul::UlStateConv& s) { return ul::ul_forward_conv(s, y, ula.hyper); }},
                          ula.state);
    if (sign_ != 1.0)
      for (double& v : local[i].data()) v *= sign_;
    result.local_grad_norms.push_back(local[i].norm());
  }

  Tensor grad(acts.back().shape(), 0.0);
  for (std::size_t i = n; i-- > 0;) {
    if (stages[i].ul) grad = ul::ul_backward(local[i], grad, stages[i].ul->hyper);
    const Tensor& in = acts[i];
    grad = std::visit(Overloaded{[&](nn::LinearLayer& l) {
                                   nn::LinearBackward b = nn::linear_backward(l, in, grad);
                                   nn::sgd_step(l, b.grads, sgd_);
                                   return std::move(b.grad_x);
                                 },
                                 [&](nn::Conv2dLayer& l) {
                                   nn::Conv2dBackward b = nn::conv2d_backward(l, in, grad);
                                   nn::sgd_step(l, b.grads, sgd_);
                                   return std::move(b.grad_x);
                                 },
                                 [&](TanhLayer&) { return nn::tanh_backward(acts[i + 1], grad); }},
                      stages[i].layer);
  }
  result.output = std::move(acts.back());
  return result;
}

std::vector<MetricsRow> train_online(Network& net, const DataSource& source, const TrainOptions& opts) {
  if (net.ul_count() == 0) throw ValueError("train_online: the network has no UL layer attached");
  OnlineTrainer trainer(net, opts.sgd, opts.ul_gradient_sign);
  std::vector<MetricsRow> rows;
  for (int e = 0; e < opts.epochs; ++e) {
    const int epoch = opts.first_epoch + e;
    const auto start = std::chrono::steady_clock::now();
    const data::SequenceDataset ds = source(epoch);
    if (ds.frame_count() == 0) throw ValueError("train_online: the dataset has no frames");

    MetricsRow row;
    row.epoch = epoch;
    row.ul_grad_norms.assign(net.ul_count(), 0.0);
    EpochTrace trace{epoch, {}};
    std::size_t frame_index = 0;
    for (const auto& seq : ds.sequences) {
      trainer.begin_sequence();
      trace.outputs.emplace_back();
      for (const Tensor& frame : seq.frames) {
        auto diverged = [&](const std::string& why) {
          std::ostringstream os;
          os << "training diverged at epoch " << epoch << ", frame " << frame_index << ": " << why;
          return DivergenceError(epoch, frame_index, os.str());
        };
        StepResult r;
        try {
          r = trainer.step(frame);
        } catch (const DegenerateError& e) {
          // UL statistics only degenerate once values overflow
          throw diverged(e.what());
        } catch (const ValueError& e) {
          throw diverged(e.what());
        }
        if (!net.parameters_finite()) throw diverged("non-finite parameter");
        for (std::size_t k = 0; k < r.local_grad_norms.size(); ++k) row.ul_grad_norms[k] += r.local_grad_norms[k];
        trace.outputs.back().push_back(std::move(r.output));
        ++frame_index;
      }
    }
    for (double& v : row.ul_grad_norms) v /= static_cast<double>(frame_index);
    row.eval_metric = opts.evaluate ? opts.evaluate(net, trace) : std::numeric_limits<double>::quiet_NaN();
    if (opts.record_wall_clock) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MetricsRow> train_online(Network& net, const data::SequenceDataset& data, const TrainOptions& opts) {
  return train_online(net, [&](int) { return data; }, opts);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       std::size_t ul_layers, bool append) {
  std::ofstream out(path, append ? std::ios::binary | std::ios::app : std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (!append) {
    out << "epoch";
    for (std::size_t k = 0; k < ul_layers; ++k) out << ",ul" << k << "_grad_norm";
    out << ",eval_metric,seconds\n";
  }
  for (const MetricsRow& r : rows) {
    out << r.epoch;
    for (double v : r.ul_grad_norms) out << ',' << data::format_double(v);
    out << ',' << data::format_double(r.eval_metric) << ',' << data::format_double(r.seconds) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch", 0) != 0) throw IoError(path.string() + ": missing header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      char* end = nullptr;
      fields.push_back(std::strtod(field.c_str(), &end));
      if (end != field.c_str() + field.size()) throw IoError(path.string() + ": bad field '" + field + "'");
    }
    if (fields.size() < 3) throw IoError(path.string() + ": short row");
    MetricsRow r;
    r.epoch = static_cast<int>(fields.front());
    r.ul_grad_norms.assign(fields.begin() + 1, fields.end() - 2);
    r.eval_metric = fields[fields.size() - 2];
    r.seconds = fields.back();
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace tcoh
