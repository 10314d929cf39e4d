// SPDX-License-Identifier: Apache-2.0
#include "distilkit/task.hpp"

#include <cmath>

#include "distilkit/error.hpp"

namespace distilkit {

std::string_view task_name(TaskId task) {
  switch (task) {
    case TaskId::offense: return "offense";
    case TaskId::emotion: return "emotion";
    case TaskId::sentiment: return "sentiment";
    case TaskId::sexism: return "sexism";
  }
  return "unknown";
}

TaskId parse_task(std::string_view name) {
  for (TaskId t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  throw ValidationError("unknown task '" + std::string(name) + "'");
}

std::size_t task_index(TaskId task) { return static_cast<std::size_t>(task); }

void SplitRatios::validate() const {
  for (double r : {train, validation, test}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("split ratios must each lie in [0,1]");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1, got " + std::to_string(train + validation + test));
  }
}

std::optional<std::size_t> TaskSpec::class_index(std::string_view label) const {
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (class_names[i] == label) return i;
  }
  return std::nullopt;
}

TaskSpec TaskSpec::defaults(TaskId task) {
  switch (task) {
    case TaskId::offense:
      return {task, {"Profanity", "Insult", "Abuse", "Other"}, LossKind::categorical_ce, {0.8, 0.1, 0.1}};
    case TaskId::emotion:
      return {task,
              {"Anger", "Fear", "Joy", "Sadness", "Surprise", "Trust", "Neutral"},
              LossKind::elementwise_bce,
              {0.75, 0.10, 0.15}};
    case TaskId::sentiment:
      return {task, {"positive", "negative"}, LossKind::categorical_ce, {0.8, 0.1, 0.1}};
    case TaskId::sexism:
      return {task, {"sexist", "non-sexist"}, LossKind::categorical_ce, {0.8, 0.1, 0.1}};
  }
  throw ValidationError("unknown task");
}

}  // namespace distilkit
