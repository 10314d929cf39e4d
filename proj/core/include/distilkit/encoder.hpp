// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "distilkit/ops.hpp"
#include "distilkit/task.hpp"
#include "distilkit/tensor.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

class SeededRng;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  std::size_t d_ff = 128;
  std::size_t max_len = 64;
  double dropout_rate = 0.1;

  /// Four layers; the student keeps half the depth.
  static ModelConfig teacher(std::size_t vocab_size = 0);
  static ModelConfig student(std::size_t vocab_size = 0);

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct HeadSpec {
  TaskId task = TaskId::offense;
  std::size_t num_classes = 0;

  bool operator==(const HeadSpec&) const = default;
};

/// All learnable tensors of an encoder with its task heads.
///
/// Tensor names: tok_emb [V,d], pos_emb [L,d], layer{i}.{ln1,ln2}.{gamma,beta},
/// layer{i}.attn.{wq,wk,wv,wo} [d,d] and .{bq,bk,bv,bo} [d],
/// layer{i}.ffn.{w1 [d,f], b1 [f], w2 [f,d], b2 [d]}, final_ln.{gamma,beta},
/// head.<task>.{w [d,K], b [K]}.
struct ModelParams {
  ModelConfig config;
  std::vector<HeadSpec> heads;
  std::uint64_t vocab_hash = 0;
  ParamMap tensors;

  bool has_head(TaskId task) const;
  const HeadSpec& head(TaskId task) const;
  /// Hash over config, heads, vocabulary hash and every tensor's bits.
  std::uint64_t fingerprint() const;
  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;
};

/// Embeddings and heads are uniform in [-0.05, 0.05]; attention and FFN
/// matrices use Xavier-uniform bounds; biases are zero; layer norms start at
/// gamma=1, beta=0. Draw order follows the tensor list above, heads last in
/// the given order.
ModelParams init_params(const ModelConfig& config, const std::vector<HeadSpec>& heads, std::uint64_t vocab_hash,
                        SeededRng& rng);

/// A ModelParams bound onto a tape for one forward (and optionally backward) pass.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const ModelParams& params, bool trainable);

  /// Pre-norm transformer over the batch, returning the CLS (position 0)
  /// hidden state after the final layer norm: [batch, d_model]. Dropout is
  /// applied only in train_mode and only then draws from `rng`.
  Var encode(const TokenBatch& batch, bool train_mode, SeededRng& rng);

  /// Affine task head: pooled [B,d] -> logits [B,K].
  Var logits(Var pooled, TaskId task);

  Var param(const std::string& name) const;
  const std::map<std::string, Var>& bound() const noexcept { return bound_; }
  /// Gradients of every parameter after tape.backward(); zero when unreachable.
  ParamMap gradients() const;

 private:
  Tape* tape_;
  const ModelParams* params_;
  std::map<std::string, Var> bound_;
};

/// p_k = exp(z_k / T) / sum_j exp(z_j / T) per row, with max-subtraction.
Tensor tempered_softmax(const Tensor& logits, double temperature);
Var tempered_softmax(Var logits, double temperature);

/// Eval-mode logits for a batch, without keeping a tape.
Tensor forward_logits(const ModelParams& params, const TokenBatch& batch);
/// Eval-mode pooled representations.
Tensor forward_pooled(const ModelParams& params, const TokenBatch& batch);

}  // namespace distilkit
