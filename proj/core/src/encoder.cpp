// SPDX-License-Identifier: Apache-2.0
#include "distilkit/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"
#include "distilkit/rng.hpp"

namespace distilkit {

namespace {

std::string layer_prefix(std::size_t i) { return "layer" + std::to_string(i) + "."; }

std::string head_prefix(TaskId task) { return "head." + std::string(task_name(task)) + "."; }

enum class Init { embedding, xavier, zeros, ones };

struct TensorSpec {
  std::string name;
  Shape shape;
  Init init;
};

std::vector<TensorSpec> tensor_layout(const ModelConfig& c, const std::vector<HeadSpec>& heads) {
  const std::size_t d = c.d_model;
  std::vector<TensorSpec> specs;
  specs.push_back({"tok_emb", {c.vocab_size, d}, Init::embedding});
  specs.push_back({"pos_emb", {c.max_len, d}, Init::embedding});
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string p = layer_prefix(i);
    specs.push_back({p + "ln1.gamma", {d}, Init::ones});
    specs.push_back({p + "ln1.beta", {d}, Init::zeros});
    for (const char* m : {"wq", "wk", "wv", "wo"}) specs.push_back({p + "attn." + m, {d, d}, Init::xavier});
    for (const char* b : {"bq", "bk", "bv", "bo"}) specs.push_back({p + "attn." + b, {d}, Init::zeros});
    specs.push_back({p + "ln2.gamma", {d}, Init::ones});
    specs.push_back({p + "ln2.beta", {d}, Init::zeros});
    specs.push_back({p + "ffn.w1", {d, c.d_ff}, Init::xavier});
    specs.push_back({p + "ffn.b1", {c.d_ff}, Init::zeros});
    specs.push_back({p + "ffn.w2", {c.d_ff, d}, Init::xavier});
    specs.push_back({p + "ffn.b2", {d}, Init::zeros});
  }
  specs.push_back({"final_ln.gamma", {d}, Init::ones});
  specs.push_back({"final_ln.beta", {d}, Init::zeros});
  for (const auto& h : heads) {
    specs.push_back({head_prefix(h.task) + "w", {d, h.num_classes}, Init::embedding});
    specs.push_back({head_prefix(h.task) + "b", {h.num_classes}, Init::embedding});
  }
  return specs;
}

}  // namespace

ModelConfig ModelConfig::teacher(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.n_layers = 4;
  return c;
}

ModelConfig ModelConfig::student(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.n_layers = 2;
  return c;
}

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 || max_len < 2) {
    throw ValidationError("model config: sizes must be positive (max_len >= 2)");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("model config: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                          std::to_string(n_heads));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("model config: dropout_rate must lie in [0,1)");
}

bool ModelParams::has_head(TaskId task) const {
  return std::any_of(heads.begin(), heads.end(), [task](const HeadSpec& h) { return h.task == task; });
}

const HeadSpec& ModelParams::head(TaskId task) const {
  for (const auto& h : heads) {
    if (h.task == task) return h;
  }
  throw ValidationError("model has no head for task " + std::string(task_name(task)));
}

std::uint64_t ModelParams::fingerprint() const {
  Fnv1a h;
  for (std::size_t v : {config.vocab_size, config.d_model, config.n_heads, config.n_layers, config.d_ff, config.max_len}) {
    h.update_u64(v);
  }
  h.update_f64(config.dropout_rate);
  h.update_u64(vocab_hash);
  for (const auto& hd : heads) {
    h.update(task_name(hd.task));
    h.update_u64(hd.num_classes);
  }
  for (const auto& [name, t] : tensors) {
    h.update(name);
    for (std::size_t d : t.shape()) h.update_u64(d);
    for (double v : t.data()) h.update_f64(v);
  }
  return h.digest();
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

ModelParams init_params(const ModelConfig& config, const std::vector<HeadSpec>& heads, std::uint64_t vocab_hash,
                        SeededRng& rng) {
  config.validate();
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i].num_classes == 0) throw ValidationError("head with zero classes");
    for (std::size_t j = 0; j < i; ++j) {
      if (heads[j].task == heads[i].task) throw ValidationError("duplicate head for task " + std::string(task_name(heads[i].task)));
    }
  }
  ModelParams params;
  params.config = config;
  params.heads = heads;
  params.vocab_hash = vocab_hash;
  for (auto& spec : tensor_layout(config, heads)) {
    Tensor t(spec.shape, 0.0);
    switch (spec.init) {
      case Init::embedding:
        for (double& v : t.data()) v = rng.uniform(-0.05, 0.05);
        break;
      case Init::xavier: {
        const double bound = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
        for (double& v : t.data()) v = rng.uniform(-bound, bound);
        break;
      }
      case Init::ones:
        t.fill(1.0);
        break;
      case Init::zeros:
        break;
    }
    params.tensors.emplace(std::move(spec.name), std::move(t));
  }
  return params;
}

ModelGraph::ModelGraph(Tape& tape, const ModelParams& params, bool trainable) : tape_(&tape), params_(&params) {
  for (const auto& [name, t] : params.tensors) bound_.emplace(name, tape.leaf(t, trainable));
}

Var ModelGraph::param(const std::string& name) const {
  auto it = bound_.find(name);
  if (it == bound_.end()) throw ValidationError("model has no parameter '" + name + "'");
  return it->second;
}

ParamMap ModelGraph::gradients() const {
  ParamMap grads;
  for (const auto& [name, v] : bound_) grads.emplace(name, tape_->grad(v));
  return grads;
}

Var ModelGraph::encode(const TokenBatch& batch, bool train_mode, SeededRng& rng) {
  const ModelConfig& c = params_->config;
  const std::size_t b = batch.batch, l = batch.width, d = c.d_model, heads = c.n_heads;
  if (b == 0 || l == 0) throw ValidationError("encode: empty batch");
  if (l > c.max_len) {
    throw ValidationError("encode: batch width " + std::to_string(l) + " exceeds max_len " + std::to_string(c.max_len));
  }
  for (std::int32_t id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw ValidationError("encode: token id " + std::to_string(id) + " out of range for vocabulary of " +
                            std::to_string(c.vocab_size));
    }
  }
  const double drop = train_mode ? c.dropout_rate : 0.0;
  const auto maybe_dropout = [&](Var v) { return drop > 0.0 ? ops::dropout(v, drop, rng) : v; };

  // Only unmasked positions are materialised: sequence i occupies rows
  // [begin[i], begin[i] + len[i]) of the packed activations. Padding never
  // influences a real position, so this matches a padded masked encoder.
  std::vector<std::int32_t> ids, positions;
  std::vector<std::size_t> begin(b), len(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (!batch.mask[i * l]) throw ValidationError("encode: position 0 of every sequence must be unmasked");
    begin[i] = ids.size();
    for (std::size_t j = 0; j < l; ++j) {
      if (!batch.mask[i * l + j]) continue;
      ids.push_back(batch.id(i, j));
      positions.push_back(static_cast<std::int32_t>(j));
    }
    len[i] = ids.size() - begin[i];
  }
  std::vector<ops::AttentionSegment> full(b), cls_only(b);
  for (std::size_t i = 0; i < b; ++i) {
    full[i] = {begin[i], len[i], begin[i], len[i]};
    cls_only[i] = {i, 1, begin[i], len[i]};
  }

  Var x = ops::add(ops::embedding(param("tok_emb"), ids), ops::embedding(param("pos_emb"), positions));
  x = maybe_dropout(x);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d / heads));
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    const std::string p = layer_prefix(i);
    const auto proj = [&](Var in, const char* w, const char* bias) {
      return ops::add_bias(ops::matmul(in, param(p + "attn." + w)), param(p + "attn." + bias));
    };
    // The last layer only needs the CLS rows as queries; keys and values
    // still cover every position.
    const bool last = i + 1 == c.n_layers;
    Var h = ops::layer_norm(x, param(p + "ln1.gamma"), param(p + "ln1.beta"));
    Var k = proj(h, "wk", "bk");
    Var v = proj(h, "wv", "bv");
    Var q = ops::scale(proj(last ? ops::gather_rows(h, begin) : h, "wq", "bq"), inv_sqrt_dh);
    Var ctx = ops::segment_attention(q, k, v, last ? cls_only : full, heads);
    x = ops::add(last ? ops::gather_rows(x, begin) : x, maybe_dropout(proj(ctx, "wo", "bo")));

    Var h2 = ops::layer_norm(x, param(p + "ln2.gamma"), param(p + "ln2.beta"));
    Var f = ops::gelu(ops::add_bias(ops::matmul(h2, param(p + "ffn.w1")), param(p + "ffn.b1")));
    f = ops::add_bias(ops::matmul(f, param(p + "ffn.w2")), param(p + "ffn.b2"));
    x = ops::add(x, maybe_dropout(f));
  }
  return ops::layer_norm(x, param("final_ln.gamma"), param("final_ln.beta"));
}

Var ModelGraph::logits(Var pooled, TaskId task) {
  if (!params_->has_head(task)) throw ValidationError("model has no head for task " + std::string(task_name(task)));
  const std::string p = head_prefix(task);
  return ops::add_bias(ops::matmul(pooled, param(p + "w")), param(p + "b"));
}

Tensor tempered_softmax(const Tensor& logits, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("tempered_softmax: temperature must be positive");
  if (logits.rank() == 0 || logits.shape().back() == 0) throw ShapeError("tempered_softmax: empty logits");
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.numel() / k;
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data().data() + r * k;
    double* p = out.data().data() + r * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp((z[j] - mx) / temperature);
      s += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= s;
  }
  return out;
}

Var tempered_softmax(Var logits, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("tempered_softmax: temperature must be positive");
  return ops::softmax(temperature == 1.0 ? logits : ops::scale(logits, 1.0 / temperature));
}

Tensor forward_pooled(const ModelParams& params, const TokenBatch& batch) {
  Tape tape;
  ModelGraph graph(tape, params, false);
  SeededRng unused(0);
  return graph.encode(batch, false, unused).value();
}

Tensor forward_logits(const ModelParams& params, const TokenBatch& batch) {
  Tape tape;
  ModelGraph graph(tape, params, false);
  SeededRng unused(0);
  return graph.logits(graph.encode(batch, false, unused), batch.task).value();
}

}  // namespace distilkit
