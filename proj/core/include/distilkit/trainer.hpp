// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distilkit/augment.hpp"
#include "distilkit/corpus.hpp"
#include "distilkit/encoder.hpp"
#include "distilkit/losses.hpp"
#include "distilkit/metrics.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

enum class Pipeline { finetune, kd, mtl, mtkd, mtkd_ta };

std::string_view pipeline_name(Pipeline p);
Pipeline parse_pipeline(std::string_view name);

/// per_batch: one optimizer step per task batch. per_round: gradients of a
/// round (one consecutive group of as many batches as there are tasks) are
/// summed before a single step.
enum class Accumulation { per_batch, per_round };

/// supplement: each batch's loss averages the clean term with the mixed ones.
/// replace: only the mixed terms count.
enum class MixupMode { supplement, replace };

/// Teacher annealing. Without an explicit total, lambda reaches 1 on the last
/// optimizer step of the run.
struct AnnealPlan {
  std::optional<std::uint64_t> total_steps;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  /// Epoch budget of student and multi-task runs; defaults to `epochs`.
  std::optional<std::size_t> student_epochs;
  std::uint64_t seed = 0;
  std::size_t min_frequency = 1;
  DistillConfig distill;
  std::optional<AnnealPlan> anneal;
  std::vector<AugmentConfig> augmentations;
  SupervisedScope supervised_scope = SupervisedScope::all_tasks;
  Accumulation accumulation = Accumulation::per_batch;
  MixupMode mixup_mode = MixupMode::supplement;
  std::vector<TaskId> active_tasks{TaskId::offense};
  /// vocab_size is filled in from the vocabulary at training time.
  ModelConfig teacher_model = ModelConfig::teacher(1);
  ModelConfig student_model = ModelConfig::student(1);

  /// Learning rate 2e-5, the value used for pretrained fine-tuning.
  static TrainConfig paper_preset();
  std::size_t student_epoch_count() const { return student_epochs.value_or(epochs); }
  void validate() const;
};

struct StepRow {
  std::uint64_t step = 0;
  TaskId task = TaskId::offense;
  double loss = 0.0;
  double supervised = 0.0;
  double distill = 0.0;
  /// alpha or lambda(step) for the distillation pipelines, 1 otherwise.
  double weight = 1.0;
  bool operator==(const StepRow&) const = default;
};

struct EpochRow {
  std::size_t epoch = 0;
  std::map<TaskId, double> train_loss;
  std::map<TaskId, MetricsReport> validation;
  bool operator==(const EpochRow&) const = default;
};

struct RunRecord {
  std::string pipeline;
  std::string config_snapshot;
  std::uint64_t config_hash = 0;
  TaskId main_task = TaskId::offense;
  std::vector<EpochRow> epochs;
  std::vector<StepRow> steps;
  std::size_t best_epoch = 0;
  std::map<TaskId, MetricsReport> test;
  MetricsReport main_test;
  std::map<TaskId, std::uint64_t> teacher_fingerprints;
  std::uint64_t params_fingerprint = 0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;

  /// Equality on everything except wall-clock time.
  bool same_results(const RunRecord& other) const;
};

struct TrainResult {
  ModelParams params;
  Vocab vocab;
  RunRecord record;
};

/// Frozen single-task teachers. Only const access is exposed.
class TeacherBundle {
 public:
  TeacherBundle() = default;
  explicit TeacherBundle(std::map<TaskId, TrainResult> teachers);

  bool has(TaskId task) const { return teachers_.count(task) > 0; }
  const TrainResult& at(TaskId task) const;
  std::vector<TaskId> tasks() const;
  std::size_t size() const noexcept { return teachers_.size(); }
  std::map<TaskId, std::uint64_t> fingerprints() const;

 private:
  std::map<TaskId, TrainResult> teachers_;
};

using DatasetMap = std::map<TaskId, DatasetSplit>;

TrainResult fine_tune(const TaskSpec& task, const DatasetSplit& data, const TrainConfig& config);
TrainResult fine_tune(const TaskSpec& task, const DatasetSplit& data, const TrainConfig& config,
                      const ModelConfig& model);

/// Single-task KD of `teacher` into config.student_model. The student's
/// vocabulary must hash equal to the teacher's.
TrainResult distill(const TrainResult& teacher, const TaskSpec& task, const DatasetSplit& data,
                    const TrainConfig& config);

/// One shared encoder with a head per active task, config.student_model.
TrainResult train_mtl(const DatasetMap& datasets, const TrainConfig& config);
TrainResult train_mtl(const DatasetMap& datasets, const TrainConfig& config, const ModelConfig& model);

TeacherBundle train_teachers(const DatasetMap& datasets, const TrainConfig& config);

TrainResult train_mtkd(const TeacherBundle& teachers, const DatasetMap& datasets, const TrainConfig& config);
TrainResult train_mtkd_ta(const TeacherBundle& teachers, const DatasetMap& datasets, const TrainConfig& config);

/// The task of model selection and headline metrics: offense when active.
TaskId main_task_of(std::span<const TaskId> tasks);

/// Optimizer steps a multi-task run over `datasets` will take.
std::uint64_t planned_steps(const DatasetMap& datasets, const TrainConfig& config, std::size_t epochs);

struct AblationCell {
  std::string row_label;
  std::vector<TaskId> tasks;
  Pipeline pipeline = Pipeline::mtl;
  RunRecord record;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::map<TaskId, std::uint64_t> teacher_fingerprints;
};

/// The full task set followed by the seven subsets with auxiliaries removed.
std::vector<std::vector<TaskId>> ablation_subsets();
/// "Proposed model" for all four tasks, otherwise "w/o ..." naming the
/// removed auxiliaries.
std::string ablation_row_label(std::span<const TaskId> subset);

/// Runs MTL, MTKD and MTKD-TA per subset. Teachers are trained once and
/// shared by every subset.
AblationResult run_ablation(const DatasetMap& datasets, const TrainConfig& base,
                            const std::vector<std::vector<TaskId>>& subsets = ablation_subsets());

}  // namespace distilkit
