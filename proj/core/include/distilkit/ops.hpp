// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "distilkit/tape.hpp"

namespace distilkit {

class SeededRng;

/// Differentiable operations. Every op records its output on the tape of its
/// inputs and throws ShapeError (naming the op and both shapes) on mismatch.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);

/// x[..., D] + bias[D], broadcast over the leading dimensions.
Var add_bias(Var x, Var bias);

/// [M,K] x [K,N] -> [M,N].
Var matmul(Var a, Var b);

/// Batched [G,M,K] x [G,K,N] -> [G,M,N]; with transpose_b, b is [G,N,K].
Var bmm(Var a, Var b, bool transpose_b = false);

Var exp(Var a);
/// Natural log; throws NumericalError on non-positive input.
Var log(Var a);
Var relu(Var a);
/// Exact erf-based GELU.
Var gelu(Var a);

/// Sum of a rank-2 tensor over `axis` (0 or 1), giving a rank-1 tensor.
Var sum(Var a, std::size_t axis);
Var sum_all(Var a);
Var mean_all(Var a);

/// Normalises each row of x[N,D] to zero mean and unit variance, then applies
/// gamma[D] and beta[D]. A constant row maps to beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Softmax over the last axis with max-subtraction.
Var softmax(Var x);
Var log_softmax(Var x);

/// Softmax of attention scores [B*H, L, L] over keys, where key j of sequence
/// b participates iff key_mask[b*L + j] != 0. Masked keys get probability 0.
Var masked_softmax(Var scores, std::span<const std::uint8_t> key_mask, std::size_t heads);

/// Query rows [q_begin, q_begin + q_len) attend to key/value rows
/// [k_begin, k_begin + k_len).
struct AttentionSegment {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
};

/// Multi-head attention over packed sequences: within each segment and for
/// each of `heads` column blocks of width D / heads, out = softmax(q k^T) v.
/// q is [Tq, D], k and v are [Tk, D]. No scaling is applied; query rows
/// outside every segment come out as zero.
Var segment_attention(Var q, Var k, Var v, std::span<const AttentionSegment> segments, std::size_t heads);

/// Rows of table[V,D] selected by ids -> [ids.size(), D].
Var embedding(Var table, std::span<const std::int32_t> ids);

/// Rows of x[N,D] selected by index -> [rows.size(), D].
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var reshape(Var x, Shape shape);

/// [B*L, H*Dh] -> [B*H, L, Dh] and back.
Var split_heads(Var x, std::size_t batch, std::size_t length, std::size_t heads);
Var merge_heads(Var x, std::size_t batch, std::size_t length, std::size_t heads);

/// Inverted dropout; draws one uniform per element in row-major order.
Var dropout(Var x, double rate, SeededRng& rng);

/// Elementwise clip to [lo, hi]; gradient passes only strictly inside.
Var clamp(Var x, double lo, double hi);

/// Same value, no gradient flows back through it.
Var detach(Var x);

}  // namespace ops
}  // namespace distilkit
