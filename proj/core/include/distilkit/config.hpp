// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distilkit/corpus.hpp"
#include "distilkit/trainer.hpp"

namespace distilkit {

/// Generator settings shared by every task. Per-task class proportions
/// override the defaults of SyntheticSpec::defaults_for.
struct SyntheticSettings {
  std::size_t examples_per_task = 1250;
  std::size_t vocab_size = 300;
  std::size_t keyword_count_per_class = 3;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 40;
  std::map<TaskId, std::map<std::string, double>> class_proportions;

  SyntheticSpec spec_for(const TaskSpec& task) const;
};

/// Everything one CLI invocation needs. Relative dataset paths resolve
/// against the directory of the config file.
struct ExperimentConfig {
  Pipeline pipeline = Pipeline::finetune;
  TrainConfig train;
  std::map<TaskId, std::filesystem::path> datasets;
  std::filesystem::path output_dir = "runs";
  SyntheticSettings synthetic;
  std::vector<std::vector<TaskId>> ablation_subsets = distilkit::ablation_subsets();
  std::map<TaskId, SplitRatios> split_ratios;

  TaskSpec task_spec(TaskId task) const;
  /// Throws ValidationError naming the first missing dataset file.
  void require_datasets() const;

  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ExperimentConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

nlohmann::json to_json(const TrainConfig& config);
/// Applies the keys present in `doc` on top of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

nlohmann::json to_json(const AugmentConfig& config);
AugmentConfig augment_config_from_json(const nlohmann::json& doc);

/// Canonical text of a run's configuration; equal inputs give equal bytes.
std::string config_snapshot(const TrainConfig& config, Pipeline pipeline, std::span<const TaskId> tasks);

}  // namespace distilkit
