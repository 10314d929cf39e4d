// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distilkit/encoder.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool operator==(const ClassMetrics&) const = default;
};

/// Aggregate precision and recall are support-weighted means, like weighted F1.
/// Per-class quantities with an empty denominator are 0.
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  /// confusion[true][predicted].
  std::vector<std::vector<std::size_t>> confusion;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                              std::size_t num_classes);

/// Row-wise argmax; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

std::vector<std::size_t> predict(const ModelParams& params, const TokenBatch& batch, TaskId task);

/// Predicts over `examples` in chunks of `batch_size` and scores them.
MetricsReport evaluate(const ModelParams& params, const Vocab& vocab, const TaskSpec& spec,
                       const std::vector<Example>& examples, std::size_t max_len, std::size_t batch_size = 64);

}  // namespace distilkit
