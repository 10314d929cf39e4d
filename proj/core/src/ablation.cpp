// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "distilkit/error.hpp"
#include "distilkit/trainer.hpp"

namespace distilkit {

namespace {

std::string_view auxiliary_phrase(TaskId t) {
  switch (t) {
    case TaskId::emotion: return "emotions";
    case TaskId::sentiment: return "sentiment";
    case TaskId::sexism: return "sexist language";
    case TaskId::offense: break;
  }
  return "offense";
}

}  // namespace

std::vector<std::vector<TaskId>> ablation_subsets() {
  using T = TaskId;
  return {
      {T::offense, T::emotion, T::sentiment, T::sexism},
      {T::offense},
      {T::offense, T::sexism},
      {T::offense, T::sentiment},
      {T::offense, T::emotion},
      {T::offense, T::sentiment, T::sexism},
      {T::offense, T::emotion, T::sexism},
      {T::offense, T::emotion, T::sentiment},
  };
}

std::string ablation_row_label(std::span<const TaskId> subset) {
  std::vector<std::string_view> removed;
  for (TaskId t : {TaskId::emotion, TaskId::sentiment, TaskId::sexism}) {
    if (std::find(subset.begin(), subset.end(), t) == subset.end()) removed.push_back(auxiliary_phrase(t));
  }
  if (removed.empty()) return "Proposed model";
  std::string label = "w/o ";
  for (std::size_t i = 0; i < removed.size(); ++i) {
    if (i) label += " & ";
    label += removed[i];
  }
  return label;
}

AblationResult run_ablation(const DatasetMap& datasets, const TrainConfig& base,
                            const std::vector<std::vector<TaskId>>& subsets) {
  if (subsets.empty()) throw ValidationError("ablate: no task subsets");
  std::vector<TaskId> needed;
  for (const auto& subset : subsets) {
    if (std::find(subset.begin(), subset.end(), TaskId::offense) == subset.end()) {
      throw ValidationError("ablate: every subset must contain offense");
    }
    for (TaskId t : subset) {
      if (std::find(needed.begin(), needed.end(), t) == needed.end()) needed.push_back(t);
    }
  }
  std::sort(needed.begin(), needed.end());

  TrainConfig teacher_config = base;
  teacher_config.active_tasks = needed;
  const TeacherBundle teachers = train_teachers(datasets, teacher_config);

  AblationResult result;
  result.teacher_fingerprints = teachers.fingerprints();
  for (const auto& subset : subsets) {
    TrainConfig c = base;
    c.active_tasks = subset;
    if (!c.anneal) c.anneal = AnnealPlan{};
    const std::string label = ablation_row_label(subset);
    result.cells.push_back({label, subset, Pipeline::mtl, train_mtl(datasets, c).record});
    result.cells.push_back({label, subset, Pipeline::mtkd, train_mtkd(teachers, datasets, c).record});
    result.cells.push_back({label, subset, Pipeline::mtkd_ta, train_mtkd_ta(teachers, datasets, c).record});
  }
  return result;
}

}  // namespace distilkit
