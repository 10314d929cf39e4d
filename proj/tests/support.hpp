// SPDX-License-Identifier: Apache-2.0
// Fixtures shared by the unit tests and the acceptance runner.
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "distilkit/corpus.hpp"
#include "distilkit/encoder.hpp"
#include "distilkit/rng.hpp"
#include "distilkit/trainer.hpp"

namespace distilkit::testing {

inline ModelConfig tiny_model(std::size_t layers = 1) {
  ModelConfig m;
  m.vocab_size = 1;  // replaced by the vocabulary size at training time
  m.d_model = 8;
  m.n_heads = 2;
  m.n_layers = layers;
  m.d_ff = 16;
  m.max_len = 16;
  m.dropout_rate = 0.1;
  return m;
}

inline SyntheticSpec small_synthetic(TaskId task, std::size_t examples, std::size_t max_tokens = 10) {
  SyntheticSpec s = SyntheticSpec::defaults_for(TaskSpec::defaults(task));
  s.examples_per_task = examples;
  s.vocab_size = 60;
  s.keyword_count_per_class = 2;
  s.min_tokens = 5;
  s.max_tokens = max_tokens;
  return s;
}

inline DatasetSplit synthetic_split(TaskId task, std::size_t examples, std::uint64_t seed, std::size_t max_tokens = 10) {
  const TaskSpec spec = TaskSpec::defaults(task);
  return split_dataset(generate_synthetic(small_synthetic(task, examples, max_tokens), spec, seed), spec, seed);
}

inline DatasetMap synthetic_tasks(std::span<const TaskId> tasks, std::size_t examples, std::uint64_t seed) {
  DatasetMap out;
  for (TaskId t : tasks) out.emplace(t, synthetic_split(t, examples, seed));
  return out;
}

/// A fast configuration: tiny teacher and student, two epochs.
inline TrainConfig tiny_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 2;
  c.batch_size = 8;
  c.learning_rate = 3e-3;
  c.teacher_model = tiny_model(2);
  c.student_model = tiny_model(1);
  c.distill.temperature = 2.0;
  return c;
}

/// Random logits in [-scale, scale].
inline Tensor random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng, double scale = 2.0) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

inline Tensor one_hot(std::span<const std::size_t> labels, std::size_t k) {
  Tensor t({labels.size(), k});
  for (std::size_t i = 0; i < labels.size(); ++i) t.at(i, labels[i]) = 1.0;
  return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("distilkit-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace distilkit::testing
