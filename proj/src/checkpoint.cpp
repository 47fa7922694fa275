#include "tcoh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "tcoh/error.hpp"

namespace tcoh {

namespace {

enum RecordKind : std::uint32_t {
  kNetwork = 1,
  kProgress = 2,
  kLinear = 16,
  kConv2d = 17,
  kTanh = 18,
  kUlVec = 32,
  kUlConv = 33,
};

struct Array {
  std::vector<std::uint32_t> shape;
  std::vector<double> values;
};

struct Record {
  std::uint32_t kind = 0;
  std::vector<std::uint32_t> attrs;
  std::vector<Array> arrays;
};

// Empty containers are stored as a rank-1 array with extent 0.
Array vec_array(const std::vector<double>& v) {
  return {{static_cast<std::uint32_t>(v.size())}, v};
}
Array mat_array(const linalg::Matrix& m) {
  if (m.empty()) return {{0}, {}};
  return {{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, m.data()};
}
Array tensor_array(const Tensor& t) {
  if (t.empty()) return {{0}, {}};
  Array a;
  for (std::size_t e : t.shape()) a.shape.push_back(static_cast<std::uint32_t>(e));
  a.values = t.data();
  return a;
}

std::vector<double> to_vec(const Array& a) { return a.values; }
linalg::Matrix to_mat(const Array& a) {
  if (a.values.empty()) return {};
  if (a.shape.size() != 2) throw IoError("checkpoint: expected a matrix array");
  return linalg::Matrix(a.shape[0], a.shape[1], a.values);
}
Tensor to_tensor(const Array& a) {
  if (a.values.empty()) return {};
  return Tensor(Tensor::Shape(a.shape.begin(), a.shape.end()), a.values);
}

std::pair<std::uint32_t, std::uint32_t> split_u64(std::uint64_t v) {
  return {static_cast<std::uint32_t>(v & 0xffffffffu), static_cast<std::uint32_t>(v >> 32)};
}
std::uint64_t join_u64(std::uint32_t lo, std::uint32_t hi) { return (static_cast<std::uint64_t>(hi) << 32) | lo; }

Array hyper_array(const ul::UlHyper& h) { return {{5}, {h.mu, h.eps, h.ridge, h.combine_weight, h.init_scale}}; }
ul::UlHyper to_hyper(const Array& a) {
  if (a.values.size() != 5) throw IoError("checkpoint: malformed UL hyperparameters");
  return {a.values[0], a.values[1], a.values[2], a.values[3], a.values[4]};
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void record(const Record& r) {
    u32(r.kind);
    u32(static_cast<std::uint32_t>(r.attrs.size()));
    for (auto a : r.attrs) u32(a);
    u32(static_cast<std::uint32_t>(r.arrays.size()));
    for (const Array& a : r.arrays) {
      u32(static_cast<std::uint32_t>(a.shape.size()));
      for (auto e : a.shape) u32(e);
      for (double v : a.values) f64(v);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  Record record() {
    Record r;
    r.kind = u32();
    const std::uint32_t nattr = u32();
    need(4ull * nattr);
    for (std::uint32_t i = 0; i < nattr; ++i) r.attrs.push_back(u32());
    const std::uint32_t narr = u32();
    for (std::uint32_t i = 0; i < narr; ++i) {
      Array a;
      const std::uint32_t rank = u32();
      need(4ull * rank);
      std::uint64_t count = rank == 0 ? 0 : 1;
      for (std::uint32_t k = 0; k < rank; ++k) {
        a.shape.push_back(u32());
        count *= a.shape.back();
      }
      need(8 * count);
      a.values.resize(count);
      for (auto& v : a.values) v = f64();
      r.arrays.push_back(std::move(a));
    }
    return r;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

void require(bool ok, const char* what) {
  if (!ok) throw IoError(std::string("checkpoint: ") + what);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<Record> records;
  Record net{kNetwork, {}, {}};
  for (std::size_t e : ckpt.network.input_shape()) net.attrs.push_back(static_cast<std::uint32_t>(e));
  records.push_back(net);

  for (const Stage& s : ckpt.network.stages()) {
    if (const auto* l = std::get_if<nn::LinearLayer>(&s.layer)) {
      records.push_back({kLinear,
                         {},
                         {mat_array(l->weight), vec_array(l->bias), mat_array(l->weight_velocity),
                          vec_array(l->bias_velocity)}});
    } else if (const auto* c = std::get_if<nn::Conv2dLayer>(&s.layer)) {
      records.push_back({kConv2d,
                         {c->padding == nn::Padding::same ? 1u : 0u},
                         {tensor_array(c->kernels), vec_array(c->bias), tensor_array(c->kernel_velocity),
                          vec_array(c->bias_velocity)}});
    } else {
      records.push_back({kTanh, {}, {}});
    }
    if (!s.ul) continue;
    if (const auto* v = std::get_if<ul::UlStateVec>(&s.ul->state)) {
      const auto [lo, hi] = split_u64(v->t);
      records.push_back({kUlVec,
                         {v->initialized ? 1u : 0u, lo, hi},
                         {hyper_array(s.ul->hyper), vec_array(v->y_hat), vec_array(v->y_bar), mat_array(v->w),
                          mat_array(v->b)}});
    } else {
      const auto& cs = std::get<ul::UlStateConv>(s.ul->state);
      const auto [lo, hi] = split_u64(cs.t);
      records.push_back({kUlConv,
                         {cs.initialized ? 1u : 0u, cs.mode == ul::ConvCovariance::full ? 1u : 0u, lo, hi},
                         {hyper_array(s.ul->hyper), tensor_array(cs.y_hat), tensor_array(cs.y_bar),
                          vec_array(cs.w_var), vec_array(cs.b_var), mat_array(cs.w_cov), mat_array(cs.b_cov)}});
    }
  }
  records.push_back({kProgress, {ckpt.epochs_completed}, {}});

  Writer w;
  for (char ch : std::string("TCOH")) w.bytes_.push_back(static_cast<std::uint8_t>(ch));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const Record& r : records) w.record(r);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "TCOH", 4) == 0, "bad magic");
  Reader rd(bytes);
  rd.pos_ = 4;
  const std::uint32_t version = rd.u32();
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = rd.u32();

  Checkpoint ckpt;
  bool have_network = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r = rd.record();
    switch (r.kind) {
      case kNetwork:
        require(!have_network && !r.attrs.empty(), "malformed network record");
        ckpt.network = Network(Tensor::Shape(r.attrs.begin(), r.attrs.end()));
        have_network = true;
        break;
      case kProgress:
        require(r.attrs.size() == 1, "malformed progress record");
        ckpt.epochs_completed = r.attrs[0];
        break;
      case kLinear: {
        require(have_network && r.arrays.size() == 4, "malformed linear record");
        nn::LinearLayer l{to_mat(r.arrays[0]), to_vec(r.arrays[1]), to_mat(r.arrays[2]), to_vec(r.arrays[3])};
        ckpt.network.add(std::move(l));
        break;
      }
      case kConv2d: {
        require(have_network && r.arrays.size() == 4 && r.attrs.size() == 1, "malformed conv2d record");
        nn::Conv2dLayer c{to_tensor(r.arrays[0]), to_vec(r.arrays[1]), to_tensor(r.arrays[2]),
                          to_vec(r.arrays[3]), r.attrs[0] == 1 ? nn::Padding::same : nn::Padding::valid};
        ckpt.network.add(std::move(c));
        break;
      }
      case kTanh:
        require(have_network, "layer before network record");
        ckpt.network.add(TanhLayer{});
        break;
      case kUlVec: {
        require(!ckpt.network.stages().empty() && r.arrays.size() == 5 && r.attrs.size() == 3,
                "malformed UL vector record");
        ul::UlStateVec s{r.attrs[0] == 1, join_u64(r.attrs[1], r.attrs[2]), to_vec(r.arrays[1]),
                         to_vec(r.arrays[2]), to_mat(r.arrays[3]), to_mat(r.arrays[4])};
        ckpt.network.stages().back().ul = UlAttachment{to_hyper(r.arrays[0]), std::move(s)};
        break;
      }
      case kUlConv: {
        require(!ckpt.network.stages().empty() && r.arrays.size() == 7 && r.attrs.size() == 4,
                "malformed UL conv record");
        ul::UlStateConv s{r.attrs[1] == 1 ? ul::ConvCovariance::full : ul::ConvCovariance::diagonal,
                          r.attrs[0] == 1,
                          join_u64(r.attrs[2], r.attrs[3]),
                          to_tensor(r.arrays[1]),
                          to_tensor(r.arrays[2]),
                          to_vec(r.arrays[3]),
                          to_vec(r.arrays[4]),
                          to_mat(r.arrays[5]),
                          to_mat(r.arrays[6])};
        ckpt.network.stages().back().ul = UlAttachment{to_hyper(r.arrays[0]), std::move(s)};
        break;
      }
      default:
        throw IoError("checkpoint: unknown record kind " + std::to_string(r.kind));
    }
  }
  require(have_network, "missing network record");
  require(rd.done(), "trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace tcoh
