// SPDX-License-Identifier: Apache-2.0
#include "distilkit/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"

namespace distilkit {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(to_lower(c));
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Vocab::Vocab() {
  for (std::string_view s : kSpecialTokens) {
    token_to_id_.emplace(std::string(s), static_cast<std::int32_t>(id_to_token_.size()));
    id_to_token_.emplace_back(s);
  }
  Fnv1a h;
  for (const auto& t : id_to_token_) {
    h.update(t);
    h.update("\n");
  }
  hash_ = h.digest();
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, std::size_t min_frequency) {
  Vocab v;
  v.min_frequency_ = min_frequency;
  for (auto& t : tokens) {
    if (t.empty() || t.find('\n') != std::string::npos) throw ValidationError("vocab: invalid token");
    if (v.token_to_id_.count(t)) throw ValidationError("vocab: duplicate token '" + t + "'");
    v.token_to_id_.emplace(t, static_cast<std::int32_t>(v.id_to_token_.size()));
    v.id_to_token_.push_back(std::move(t));
  }
  Fnv1a h;
  for (const auto& t : v.id_to_token_) {
    h.update(t);
    h.update("\n");
  }
  v.hash_ = h.digest();
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < kSpecialTokens.size()) throw ValidationError("vocabulary " + path.string() + " is truncated");
  for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
    if (lines[i] != kSpecialTokens[i]) {
      throw ValidationError("vocabulary " + path.string() + ": line " + std::to_string(i + 1) + " must be " +
                            std::string(kSpecialTokens[i]));
    }
  }
  return from_tokens(std::vector<std::string>(lines.begin() + kSpecialTokens.size(), lines.end()));
}

void Vocab::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write vocabulary " + path.string());
  for (const auto& t : id_to_token_) out << t << '\n';
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw ValidationError("vocab: id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

Vocab build_vocab(const std::vector<Example>& corpus, std::size_t min_frequency) {
  if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
  if (min_frequency == 0) throw ValidationError("build_vocab: min_frequency must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : corpus) {
    for (auto& t : normalize_tokens(ex.text)) ++counts[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_frequency) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
  return Vocab::from_tokens(std::move(tokens), min_frequency);
}

std::vector<std::int32_t> encode_tokens(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw ValidationError("encode: max_len must be at least 2");
  std::vector<std::int32_t> ids;
  ids.reserve(std::min(max_len, tokens.size() + 1));
  ids.push_back(kClsId);
  for (const auto& t : tokens) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.id(t));
  }
  return ids;
}

std::vector<std::int32_t> encode(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  const auto tokens = normalize_tokens(text);
  return encode_tokens(tokens, vocab, max_len);
}

std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (std::int32_t id : ids) {
    if (id == kClsId || id == kPadId) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
      auto seg = trim(text.substr(start, i + 1 - start));
      if (!seg.empty()) out.emplace_back(seg);
      start = i + 1;
    }
  }
  if (start < text.size()) {
    auto seg = trim(text.substr(start));
    if (!seg.empty()) out.emplace_back(seg);
  }
  return out;
}

LabeledTokens to_labeled_tokens(const Example& example, const TaskSpec& spec) {
  auto idx = spec.class_index(example.label);
  if (!idx) throw ValidationError("unknown label '" + example.label + "' for task " + std::string(task_name(spec.id)));
  return {normalize_tokens(example.text), *idx};
}

TokenBatch make_batch(std::span<const LabeledTokens> items, const Vocab& vocab, const TaskSpec& spec,
                      std::size_t max_len) {
  if (items.empty()) throw ValidationError("make_batch: empty example list");
  const std::size_t k = spec.num_classes();
  std::vector<std::vector<std::int32_t>> rows;
  rows.reserve(items.size());
  std::size_t width = 0;
  for (const auto& item : items) {
    if (item.label >= k) throw ValidationError("make_batch: label index out of range");
    rows.push_back(encode_tokens(item.tokens, vocab, max_len));
    width = std::max(width, rows.back().size());
  }
  TokenBatch batch;
  batch.batch = items.size();
  batch.width = width;
  batch.task = spec.id;
  batch.ids.assign(batch.batch * width, kPadId);
  batch.mask.assign(batch.batch * width, 0);
  batch.targets = Tensor(Shape{batch.batch, k}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), batch.ids.begin() + static_cast<std::ptrdiff_t>(i * width));
    std::fill_n(batch.mask.begin() + static_cast<std::ptrdiff_t>(i * width), rows[i].size(), std::uint8_t{1});
    batch.labels.push_back(items[i].label);
    batch.targets.at(i, items[i].label) = 1.0;
  }
  return batch;
}

TokenBatch make_batch(const std::vector<Example>& examples, const Vocab& vocab, const TaskSpec& spec,
                      std::size_t max_len) {
  if (examples.empty()) throw ValidationError("make_batch: empty example list");
  std::vector<LabeledTokens> items;
  items.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.task != spec.id) {
      throw ValidationError("make_batch: example of task " + std::string(task_name(ex.task)) + " in a batch for task " +
                            std::string(task_name(spec.id)));
    }
    items.push_back(to_labeled_tokens(ex, spec));
  }
  return make_batch(items, vocab, spec, max_len);
}

}  // namespace distilkit
