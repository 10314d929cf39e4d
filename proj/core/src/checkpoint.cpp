// SPDX-License-Identifier: Apache-2.0
#include "distilkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "distilkit/error.hpp"

namespace distilkit {

namespace {

constexpr std::string_view kMagic = "DKCKPT01";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw ValidationError("checkpoint: truncated data");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams& params) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  const ModelConfig& c = params.config;
  for (std::size_t v : {c.vocab_size, c.d_model, c.n_heads, c.n_layers, c.d_ff, c.max_len}) w.u64(v);
  w.f64(c.dropout_rate);
  w.u64(params.vocab_hash);
  w.u64(params.heads.size());
  for (const auto& h : params.heads) {
    w.str(task_name(h.task));
    w.u64(h.num_classes);
  }
  w.u64(params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    w.str(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    w.raw(t.data().data(), t.numel() * sizeof(double));
  }
  return w.take();
}

ModelParams deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::string_view(magic, sizeof magic) != kMagic) throw ValidationError("checkpoint: bad magic");
  ModelParams p;
  p.config.vocab_size = r.u64();
  p.config.d_model = r.u64();
  p.config.n_heads = r.u64();
  p.config.n_layers = r.u64();
  p.config.d_ff = r.u64();
  p.config.max_len = r.u64();
  p.config.dropout_rate = r.f64();
  p.config.validate();
  p.vocab_hash = r.u64();
  const std::uint64_t n_heads = r.u64();
  for (std::uint64_t i = 0; i < n_heads; ++i) {
    HeadSpec h;
    h.task = parse_task(r.str());
    h.num_classes = r.u64();
    p.heads.push_back(h);
  }
  const std::uint64_t n_tensors = r.u64();
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw ValidationError("checkpoint: implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(shape_numel(shape));
    r.raw(values.data(), values.size() * sizeof(double));
    p.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw ValidationError("checkpoint: trailing bytes");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace distilkit
