// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "distilkit/task.hpp"

namespace distilkit {

struct Example {
  std::string text;
  std::string label;
  TaskId task = TaskId::offense;

  bool operator==(const Example&) const = default;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
  std::uint64_t source_fingerprint = 0;
};

/// Parameters of the planted-keyword synthetic corpus.
struct SyntheticSpec {
  std::map<std::string, double> class_proportions;
  std::size_t vocab_size = 300;
  std::size_t examples_per_task = 1250;
  std::size_t keyword_count_per_class = 3;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 40;

  /// Offense uses the published class mix (13/23/28/36%); other tasks are uniform.
  static SyntheticSpec defaults_for(const TaskSpec& task);
  void validate(const TaskSpec& task) const;
};

/// Reads newline-delimited records {"text": ..., "label": ...}. Blank lines
/// are skipped; any other problem is reported with its 1-based line number.
std::vector<Example> load_dataset(const std::filesystem::path& path, const TaskSpec& spec);
std::vector<Example> parse_dataset(std::istream& in, const TaskSpec& spec, const std::string& source = "<stream>");

/// Writes the same format, one record per line, keys in the order text, label.
void write_dataset(const std::filesystem::path& path, const std::vector<Example>& examples);
std::string serialize_example(const Example& example);

std::uint64_t fingerprint(const std::vector<Example>& examples);

/// Seeded Fisher-Yates shuffle, then contiguous cuts of floor(N*validation)
/// and floor(N*test) examples after the training block; the rounding
/// remainder goes to train. Requires at least 10 examples.
DatasetSplit split_dataset(const std::vector<Example>& examples, const TaskSpec& spec, std::uint64_t seed);

/// Pseudo-word for an index; distinct indices give distinct words.
std::string synthetic_word(std::size_t index);
/// The j-th planted keyword of class `class_index` for `task`.
std::string synthetic_keyword(TaskId task, std::size_t class_index, std::size_t j);

/// Texts of 5-40 filler words with at least one planted class keyword, split
/// into 1-3 sentences. Class counts follow the proportions (largest-remainder
/// rounding).
std::vector<Example> generate_synthetic(const SyntheticSpec& spec, const TaskSpec& task, std::uint64_t seed);

}  // namespace distilkit
