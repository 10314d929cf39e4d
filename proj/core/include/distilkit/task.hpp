// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distilkit {

/// The four tasks. Offense is the main task; the others are auxiliary.
enum class TaskId { offense, emotion, sentiment, sexism };

enum class LossKind { categorical_ce, elementwise_bce };

inline constexpr std::array<TaskId, 4> kAllTasks{TaskId::offense, TaskId::emotion, TaskId::sentiment, TaskId::sexism};

std::string_view task_name(TaskId task);
/// Accepts the canonical names "offense", "emotion", "sentiment", "sexism".
TaskId parse_task(std::string_view name);
std::size_t task_index(TaskId task);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;

  /// Each ratio in [0,1] and the sum equal to 1 within 1e-9.
  void validate() const;
};

struct TaskSpec {
  TaskId id = TaskId::offense;
  std::vector<std::string> class_names;
  LossKind loss_kind = LossKind::categorical_ce;
  SplitRatios split;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::optional<std::size_t> class_index(std::string_view label) const;

  /// Built-in schema: offense K=4, emotion K=7 (BCE, 75/10/15 split),
  /// sentiment K=2, sexism K=2.
  static TaskSpec defaults(TaskId task);
};

}  // namespace distilkit
