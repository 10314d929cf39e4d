// SPDX-License-Identifier: Apache-2.0
#include "distilkit/losses.hpp"

#include <algorithm>
#include <cmath>

#include "distilkit/encoder.hpp"
#include "distilkit/error.hpp"
#include "distilkit/ops.hpp"

namespace distilkit {

namespace {

void check_alpha(double alpha, const char* op) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError(std::string(op) + ": alpha must lie in [0,1]");
}

void check_prob_shape(Var probs, const Tensor& targets, const char* op) {
  if (probs.value().rank() != 2 || probs.shape() != targets.shape()) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(probs.shape()) + " and " +
                     shape_to_string(targets.shape()));
  }
}

// Mirrors ops::scale followed by ops::log_softmax.
Tensor log_softmax_rows(const Tensor& logits, double temperature) {
  Tensor x = logits;
  if (temperature != 1.0) {
    const double inv = 1.0 / temperature;
    for (double& v : x.data()) v = v * inv;
  }
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * d;
    double* o = out.data().data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(in[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < d; ++j) o[j] = in[j] - lse;
  }
  return out;
}

// Sum over rows of KL(teacher || student) at temperature T, unnormalised.
Var kl_sum(Var teacher_logits, Var student_logits, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("kl_kd_loss: temperature must be positive");
  if (teacher_logits.value().rank() != 2 || teacher_logits.shape() != student_logits.shape()) {
    throw ShapeError("kl_kd_loss: incompatible shapes " + shape_to_string(teacher_logits.shape()) + " and " +
                     shape_to_string(student_logits.shape()));
  }
  Tape& tape = *student_logits.tape();
  const Tensor pt = tempered_softmax(teacher_logits.value(), temperature);
  // log p_t follows the exact arithmetic of the student path below, so equal
  // logits give a KL of exactly zero.
  const Tensor log_pt = log_softmax_rows(teacher_logits.value(), temperature);
  double neg_entropy = 0.0;
  for (std::size_t i = 0; i < pt.numel(); ++i) neg_entropy += pt[i] * log_pt[i];
  Var log_ps = ops::log_softmax(temperature == 1.0 ? student_logits : ops::scale(student_logits, 1.0 / temperature));
  Var cross = ops::sum_all(ops::mul(tape.constant(pt), log_ps));
  return ops::add_scalar(ops::scale(cross, -1.0), neg_entropy);
}

}  // namespace

double DistillConfig::temperature_for(TaskId task) const {
  auto it = per_task_temperature.find(task);
  return it == per_task_temperature.end() ? temperature : it->second;
}

void DistillConfig::validate() const {
  if (!(temperature > 0.0)) throw ValidationError("distill: temperature must be positive");
  check_alpha(alpha, "distill");
  for (const auto& [task, t] : per_task_temperature) {
    if (!(t > 0.0)) throw ValidationError("distill: temperature for " + std::string(task_name(task)) + " must be positive");
  }
}

double AnnealSchedule::lambda(std::uint64_t step) const {
  validate();
  return std::min(static_cast<double>(step) / static_cast<double>(total_steps), 1.0);
}

void AnnealSchedule::validate() const {
  if (total_steps == 0) throw ValidationError("anneal: total_steps must be positive");
}

Var ce_loss(Var probs, const Tensor& targets) {
  check_prob_shape(probs, targets, "ce_loss");
  Tape& tape = *probs.tape();
  const double n = static_cast<double>(targets.dim(0));
  Var logp = ops::log(ops::clamp(probs, kProbFloor, 1.0 - kProbFloor));
  return ops::scale(ops::sum_all(ops::mul(tape.constant(targets), logp)), -1.0 / n);
}

Var ce_loss(Var probs, std::span<const std::size_t> targets) {
  const Tensor& p = probs.value();
  if (p.rank() != 2 || p.dim(0) != targets.size()) {
    throw ShapeError("ce_loss: incompatible shapes " + shape_to_string(p.shape()) + " and [" +
                     std::to_string(targets.size()) + "]");
  }
  Tensor onehot(p.shape(), 0.0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= p.dim(1)) throw ValidationError("ce_loss: target class " + std::to_string(targets[i]) + " out of range");
    onehot.at(i, targets[i]) = 1.0;
  }
  return ce_loss(probs, onehot);
}

Var bce_loss(Var probs, const Tensor& targets) {
  check_prob_shape(probs, targets, "bce_loss");
  Tape& tape = *probs.tape();
  const double nk = static_cast<double>(targets.numel());
  Var p = ops::clamp(probs, kProbFloor, 1.0 - kProbFloor);
  Tensor complement(targets.shape());
  for (std::size_t i = 0; i < targets.numel(); ++i) complement[i] = 1.0 - targets[i];
  Var pos = ops::mul(tape.constant(targets), ops::log(p));
  Var neg = ops::mul(tape.constant(complement), ops::log(ops::add_scalar(ops::scale(p, -1.0), 1.0)));
  return ops::scale(ops::sum_all(ops::add(pos, neg)), -1.0 / nk);
}

Var kl_kd_loss(Var teacher_logits, Var student_logits, double temperature) {
  Var total = kl_sum(teacher_logits, student_logits, temperature);
  const double n = static_cast<double>(student_logits.value().dim(0));
  return ops::scale(total, temperature * temperature / n);
}

Var kd_loss(Var ce, Var kl, double alpha) {
  check_alpha(alpha, "kd_loss");
  return ops::add(ops::scale(ce, alpha), ops::scale(kl, 1.0 - alpha));
}

double kd_loss(double ce, double kl, double alpha) {
  check_alpha(alpha, "kd_loss");
  return alpha * ce + (1.0 - alpha) * kl;
}

Var mtl_loss(const std::map<TaskId, Var>& per_task, std::span<const TaskId> attached) {
  if (attached.empty()) throw ValidationError("mtl_loss: no attached tasks");
  std::optional<Var> total;
  for (TaskId t : attached) {
    auto it = per_task.find(t);
    if (it == per_task.end()) throw ValidationError("mtl_loss: missing loss for task " + std::string(task_name(t)));
    total = total ? ops::add(*total, it->second) : it->second;
  }
  return *total;
}

double mtl_loss(const std::map<TaskId, double>& per_task, std::span<const TaskId> attached) {
  if (attached.empty()) throw ValidationError("mtl_loss: no attached tasks");
  double total = 0.0;
  for (TaskId t : attached) {
    auto it = per_task.find(t);
    if (it == per_task.end()) throw ValidationError("mtl_loss: missing loss for task " + std::string(task_name(t)));
    total += it->second;
  }
  return total;
}

Var mtkd_kl_loss(const std::map<TaskId, Var>& teacher_logits, const std::map<TaskId, Var>& student_logits,
                 const DistillConfig& config, const std::map<TaskId, std::size_t>& batch_sizes) {
  if (teacher_logits.empty()) throw ValidationError("mtkd_kl_loss: no tasks");
  if (teacher_logits.size() != student_logits.size() ||
      !std::equal(teacher_logits.begin(), teacher_logits.end(), student_logits.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw ValidationError("mtkd_kl_loss: teacher and student task sets differ");
  }
  std::optional<Var> total;
  for (const auto& [task, teacher] : teacher_logits) {
    const Var student = student_logits.at(task);
    const double t = config.temperature_for(task);
    auto n_it = batch_sizes.find(task);
    const double n = static_cast<double>(n_it != batch_sizes.end() ? n_it->second : student.value().dim(0));
    if (!(n > 0.0)) throw ValidationError("mtkd_kl_loss: empty batch for task " + std::string(task_name(task)));
    Var term = ops::scale(kl_sum(teacher, student, t), t * t / n);
    total = total ? ops::add(*total, term) : term;
  }
  return *total;
}

Var mtkd_loss(Var ce_sum, Var mtkd_kl, double alpha) {
  check_alpha(alpha, "mtkd_loss");
  return ops::add(ops::scale(ce_sum, alpha), ops::scale(mtkd_kl, 1.0 - alpha));
}

double mtkd_loss(double ce_sum, double mtkd_kl, double alpha) {
  check_alpha(alpha, "mtkd_loss");
  return alpha * ce_sum + (1.0 - alpha) * mtkd_kl;
}

Var mtkd_ta_loss(Var ce_sum, Var mtkd_kl, const AnnealSchedule& schedule, std::uint64_t step) {
  const double lambda = schedule.lambda(step);
  return ops::add(ops::scale(ce_sum, lambda), ops::scale(mtkd_kl, 1.0 - lambda));
}

double mtkd_ta_loss(double ce_sum, double mtkd_kl, const AnnealSchedule& schedule, std::uint64_t step) {
  const double lambda = schedule.lambda(step);
  return lambda * ce_sum + (1.0 - lambda) * mtkd_kl;
}

Var supervised_loss(Var logits, const Tensor& targets, LossKind kind) {
  Var probs = ops::softmax(logits);
  return kind == LossKind::elementwise_bce ? bce_loss(probs, targets) : ce_loss(probs, targets);
}

}  // namespace distilkit
