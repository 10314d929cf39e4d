// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "distilkit/corpus.hpp"
#include "distilkit/tensor.hpp"

namespace distilkit {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kClsId = 2;
inline constexpr std::int32_t kSepId = 3;
inline constexpr std::int32_t kMaskId = 4;
inline constexpr std::array<std::string_view, 5> kSpecialTokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

/// Lowercases ASCII letters, splits on whitespace and splits every ASCII
/// punctuation character into its own token. Other bytes pass through.
std::vector<std::string> normalize_tokens(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// Word-level vocabulary. Ids 0-4 are the specials; corpus tokens follow by
/// descending frequency, ties broken lexicographically.
///
/// On disk: UTF-8, one token per line, line number (0-based) = id.
class Vocab {
 public:
  Vocab();

  static Vocab from_tokens(std::vector<std::string> tokens, std::size_t min_frequency = 1);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return id_to_token_.size(); }
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }
  std::size_t min_frequency() const noexcept { return min_frequency_; }
  std::uint64_t hash() const noexcept { return hash_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::size_t min_frequency_ = 1;
  std::uint64_t hash_ = 0;
};

Vocab build_vocab(const std::vector<Example>& corpus, std::size_t min_frequency);

/// [CLS] followed by token ids (UNK when unknown), truncated to max_len.
std::vector<std::int32_t> encode(std::string_view text, const Vocab& vocab, std::size_t max_len);
std::vector<std::int32_t> encode_tokens(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len);

/// Inverse of encode for in-vocabulary text: drops CLS and PAD.
std::vector<std::string> decode(std::span<const std::int32_t> ids, const Vocab& vocab);

/// Splits after '.', '!' or '?' when followed by whitespace or end of text.
/// Delimiters stay with their sentence; segments are trimmed, empty ones dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Normalised tokens plus class index; the unit batches are assembled from.
struct LabeledTokens {
  std::vector<std::string> tokens;
  std::size_t label = 0;

  bool operator==(const LabeledTokens&) const = default;
};

/// Padded batch for one task. `labels` are class indices; `targets` is the
/// matching [batch, K] one-hot (or soft) target matrix for either loss kind.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> labels;
  Tensor targets;
  TaskId task = TaskId::offense;

  std::int32_t id(std::size_t row, std::size_t col) const { return ids[row * width + col]; }
};

TokenBatch make_batch(const std::vector<Example>& examples, const Vocab& vocab, const TaskSpec& spec,
                      std::size_t max_len);
TokenBatch make_batch(std::span<const LabeledTokens> items, const Vocab& vocab, const TaskSpec& spec,
                      std::size_t max_len);

LabeledTokens to_labeled_tokens(const Example& example, const TaskSpec& spec);

}  // namespace distilkit
