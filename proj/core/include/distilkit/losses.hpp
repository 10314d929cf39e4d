// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "distilkit/tape.hpp"
#include "distilkit/task.hpp"

namespace distilkit {

/// Probabilities are clipped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-12;

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.6;
  std::map<TaskId, double> per_task_temperature;

  double temperature_for(TaskId task) const;
  void validate() const;
};

/// Linear teacher-annealing weight: lambda(step) = min(step / total_steps, 1).
struct AnnealSchedule {
  std::uint64_t total_steps = 1;

  double lambda(std::uint64_t step) const;
  void validate() const;
};

/// Whether the supervised term of the distillation objectives sums every
/// task's loss or keeps only the main (offense) task.
enum class SupervisedScope { all_tasks, main_task };

/// -(1/N) sum_i sum_k y_ik log p_ik. `targets` is [N,K] one-hot or soft.
Var ce_loss(Var probs, const Tensor& targets);
/// Class-index form: -(1/N) sum_i log p_{i,y_i}.
Var ce_loss(Var probs, std::span<const std::size_t> targets);

/// -(1/(N K)) sum_i sum_k [y log p + (1-y) log(1-p)].
Var bce_loss(Var probs, const Tensor& targets);

/// (T^2 / N) sum_i KL(p_teacher(x_i, T) || p_student(x_i, T)). Teacher logits
/// are treated as constants.
Var kl_kd_loss(Var teacher_logits, Var student_logits, double temperature);

/// alpha * ce + (1 - alpha) * kl.
Var kd_loss(Var ce, Var kl, double alpha);
double kd_loss(double ce, double kl, double alpha);

/// Plain sum over tasks. Every task in `attached` must be present.
Var mtl_loss(const std::map<TaskId, Var>& per_task, std::span<const TaskId> attached);
double mtl_loss(const std::map<TaskId, double>& per_task, std::span<const TaskId> attached);

/// sum_tau (T_tau^2 / N^tau) sum_i KL(teacher || student). N^tau comes from
/// `batch_sizes` when given, else from the number of logit rows.
Var mtkd_kl_loss(const std::map<TaskId, Var>& teacher_logits, const std::map<TaskId, Var>& student_logits,
                 const DistillConfig& config, const std::map<TaskId, std::size_t>& batch_sizes = {});

/// alpha * ce_sum + (1 - alpha) * mtkd_kl.
Var mtkd_loss(Var ce_sum, Var mtkd_kl, double alpha);
double mtkd_loss(double ce_sum, double mtkd_kl, double alpha);

/// lambda(step) * ce_sum + (1 - lambda(step)) * mtkd_kl.
Var mtkd_ta_loss(Var ce_sum, Var mtkd_kl, const AnnealSchedule& schedule, std::uint64_t step);
double mtkd_ta_loss(double ce_sum, double mtkd_kl, const AnnealSchedule& schedule, std::uint64_t step);

/// Softmax of the logits followed by CE or BCE against `targets`, as the
/// task's loss kind dictates.
Var supervised_loss(Var logits, const Tensor& targets, LossKind kind);

}  // namespace distilkit
