// SPDX-License-Identifier: Apache-2.0
#include "distilkit/metrics.hpp"

#include "distilkit/error.hpp"

namespace distilkit {

MetricsReport compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                              std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  if (num_classes == 0) throw ValidationError("compute_metrics: no classes");
  MetricsReport r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw ValidationError("compute_metrics: class index out of range at position " + std::to_string(i));
    }
    ++r.confusion[labels[i]][predictions[i]];
  }
  const std::size_t n = labels.size();
  std::size_t correct = 0;
  r.per_class.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      predicted += r.confusion[j][k];
      actual += r.confusion[k][j];
    }
    const std::size_t tp = r.confusion[k][k];
    correct += tp;
    ClassMetrics& c = r.per_class[k];
    c.support = actual;
    c.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    c.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    c.f1 = (c.precision + c.recall) > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  }
  if (n == 0) return r;
  const double total = static_cast<double>(n);
  r.accuracy = static_cast<double>(correct) / total;
  for (const auto& c : r.per_class) {
    const double w = static_cast<double>(c.support);
    r.precision += w * c.precision;
    r.recall += w * c.recall;
    r.weighted_f1 += w * c.f1;
  }
  r.precision /= total;
  r.recall /= total;
  r.weighted_f1 /= total;
  return r;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(1) == 0) throw ShapeError("argmax_rows: expected [N,K], got " + shape_to_string(logits.shape()));
  std::vector<std::size_t> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.dim(1); ++k) {
      if (logits.at(i, k) > logits.at(i, best)) best = k;
    }
    out[i] = best;
  }
  return out;
}

std::vector<std::size_t> predict(const ModelParams& params, const TokenBatch& batch, TaskId task) {
  if (!params.has_head(task)) throw ValidationError("predict: model has no head for task " + std::string(task_name(task)));
  TokenBatch b = batch;
  b.task = task;
  return argmax_rows(forward_logits(params, b));
}

MetricsReport evaluate(const ModelParams& params, const Vocab& vocab, const TaskSpec& spec,
                       const std::vector<Example>& examples, std::size_t max_len, std::size_t batch_size) {
  if (examples.empty()) throw ValidationError("evaluate: no examples");
  if (batch_size == 0) throw ValidationError("evaluate: batch_size must be positive");
  std::vector<std::size_t> preds, labels;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<Example> chunk(examples.begin() + static_cast<std::ptrdiff_t>(start),
                               examples.begin() + static_cast<std::ptrdiff_t>(end));
    const TokenBatch batch = make_batch(chunk, vocab, spec, max_len);
    const auto p = predict(params, batch, spec.id);
    preds.insert(preds.end(), p.begin(), p.end());
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
  }
  return compute_metrics(preds, labels, spec.num_classes());
}

}  // namespace distilkit
