// SPDX-License-Identifier: Apache-2.0
#include "distilkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"
#include "distilkit/rng.hpp"

namespace distilkit {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; });
}

std::string line_error(const std::string& source, std::size_t line, const std::string& what) {
  return source + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

SyntheticSpec SyntheticSpec::defaults_for(const TaskSpec& task) {
  SyntheticSpec spec;
  if (task.id == TaskId::offense) {
    spec.class_proportions = {{"Profanity", 0.13}, {"Insult", 0.23}, {"Abuse", 0.28}, {"Other", 0.36}};
  } else {
    const double p = 1.0 / static_cast<double>(task.num_classes());
    for (const auto& name : task.class_names) spec.class_proportions[name] = p;
  }
  return spec;
}

void SyntheticSpec::validate(const TaskSpec& task) const {
  const std::size_t k = task.num_classes();
  if (examples_per_task == 0) throw ValidationError("synthetic: examples_per_task must be positive");
  if (keyword_count_per_class == 0) throw ValidationError("synthetic: keyword_count_per_class must be positive");
  if (vocab_size <= keyword_count_per_class * k) {
    throw ValidationError("synthetic: vocab_size " + std::to_string(vocab_size) + " must exceed keyword_count_per_class x K = " +
                          std::to_string(keyword_count_per_class * k));
  }
  if (min_tokens < 1 || min_tokens > max_tokens) throw ValidationError("synthetic: invalid token length range");
  double total = 0.0;
  for (const auto& [label, p] : class_proportions) {
    if (!task.class_index(label)) throw ValidationError("synthetic: unknown class '" + label + "'");
    if (!(p >= 0.0)) throw ValidationError("synthetic: negative proportion for '" + label + "'");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("synthetic: class proportions must sum to 1");
}

std::vector<Example> parse_dataset(std::istream& in, const TaskSpec& spec, const std::string& source) {
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(line_error(source, line_no, std::string("malformed record: ") + e.what()));
    }
    if (!record.is_object() || record.size() != 2 || !record.contains("text") || !record.contains("label") ||
        !record["text"].is_string() || !record["label"].is_string()) {
      throw ValidationError(line_error(source, line_no, "malformed record: expected exactly string fields \"text\" and \"label\""));
    }
    Example ex{record["text"].get<std::string>(), record["label"].get<std::string>(), spec.id};
    if (!spec.class_index(ex.label)) {
      throw ValidationError(line_error(source, line_no, "unknown label \"" + ex.label + "\" for task " + std::string(task_name(spec.id))));
    }
    if (is_blank(ex.text)) throw ValidationError(line_error(source, line_no, "empty text"));
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw ValidationError(source + ": dataset is empty");
  return out;
}

std::vector<Example> load_dataset(const std::filesystem::path& path, const TaskSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return parse_dataset(in, spec, path.string());
}

std::string serialize_example(const Example& example) {
  nlohmann::ordered_json record;
  record["text"] = example.text;
  record["label"] = example.label;
  return record.dump();
}

void write_dataset(const std::filesystem::path& path, const std::vector<Example>& examples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write dataset " + path.string());
  for (const auto& ex : examples) out << serialize_example(ex) << '\n';
}

std::uint64_t fingerprint(const std::vector<Example>& examples) {
  Fnv1a h;
  for (const auto& ex : examples) {
    h.update(task_name(ex.task));
    h.update("\x1f");
    h.update(ex.label);
    h.update("\x1f");
    h.update(ex.text);
    h.update("\x1e");
  }
  return h.digest();
}

DatasetSplit split_dataset(const std::vector<Example>& examples, const TaskSpec& spec, std::uint64_t seed) {
  spec.split.validate();
  const std::size_t n = examples.size();
  if (n < 10) throw ValidationError("split_dataset: need at least 10 examples, got " + std::to_string(n));

  SeededRng rng(seed);
  std::vector<std::size_t> order = rng.permutation(n);

  // The epsilon keeps products like 100 * 0.15 from flooring to 14.
  const auto cut = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  };
  const std::size_t n_val = cut(spec.split.validation);
  const std::size_t n_test = cut(spec.split.test);
  const std::size_t n_train = n - n_val - n_test;

  DatasetSplit split;
  split.source_fingerprint = fingerprint(examples);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = examples[order[i]];
    if (i < n_train) {
      split.train.push_back(ex);
    } else if (i < n_train + n_val) {
      split.validation.push_back(ex);
    } else {
      split.test.push_back(ex);
    }
  }
  return split;
}

std::string synthetic_word(std::size_t index) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  const std::size_t base = consonants.size() * vowels.size();
  // Offsetting by the base guarantees at least two syllables.
  std::size_t v = index + base;
  std::string word;
  while (v > 0) {
    const std::size_t syl = v % base;
    word.insert(word.begin(), vowels[syl % vowels.size()]);
    word.insert(word.begin(), consonants[syl / vowels.size()]);
    v /= base;
  }
  return word;
}

std::string synthetic_keyword(TaskId task, std::size_t class_index, std::size_t j) {
  return synthetic_word(100000 * (task_index(task) + 1) + 1000 * class_index + j);
}

std::vector<Example> generate_synthetic(const SyntheticSpec& spec, const TaskSpec& task, std::uint64_t seed) {
  spec.validate(task);
  const std::size_t k = task.num_classes();
  const std::size_t n = spec.examples_per_task;

  // Largest-remainder apportionment of n over the class proportions.
  std::vector<double> quota(k, 0.0);
  for (const auto& [label, p] : spec.class_proportions) quota[*task.class_index(label)] = p * static_cast<double>(n);
  std::vector<std::size_t> counts(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    counts[c] = static_cast<std::size_t>(std::floor(quota[c] + 1e-9));
    assigned += counts[c];
  }
  std::vector<std::size_t> by_remainder(k);
  std::iota(by_remainder.begin(), by_remainder.end(), std::size_t{0});
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - static_cast<double>(counts[a]) > quota[b] - static_cast<double>(counts[b]);
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[by_remainder[i % k]];

  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), counts[c], c);

  SeededRng rng(SeededRng::derive(seed, {task_index(task.id), 0x5e7}));
  rng.shuffle(labels);

  const std::size_t filler = spec.vocab_size - spec.keyword_count_per_class * k;
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t label : labels) {
    const std::size_t len = spec.min_tokens + static_cast<std::size_t>(rng.uniform_int(spec.max_tokens - spec.min_tokens + 1));
    std::vector<std::string> words(len);
    for (auto& w : words) w = synthetic_word(static_cast<std::size_t>(rng.uniform_int(filler)));
    const std::size_t planted = (len >= 2 && rng.bernoulli(0.3)) ? 2 : 1;
    for (std::size_t pos : rng.sample_without_replacement(len, planted)) {
      words[pos] = synthetic_keyword(task.id, label, static_cast<std::size_t>(rng.uniform_int(spec.keyword_count_per_class)));
    }

    std::string text;
    std::size_t in_sentence = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (!text.empty()) text += ' ';
      text += words[i];
      ++in_sentence;
      const bool last = i + 1 == len;
      const bool may_end = in_sentence >= 2 && len - i - 1 >= 2;
      if (last || (may_end && rng.bernoulli(0.12))) {
        text += '.';
        in_sentence = 0;
      }
    }
    out.push_back(Example{std::move(text), task.class_names[label], task.id});
  }
  return out;
}

}  // namespace distilkit
