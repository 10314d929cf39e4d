// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distilkit/corpus.hpp"
#include "distilkit/tape.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

class SeededRng;

enum class AugmentKind {
  asda,            // templated same-class composite with masked second sentence
  continuation,    // keep a prefix, regenerate the tail
  noisy,           // sentence drop or word drop (fair coin), gated by noisy_gate_alpha
  mixup_encoder,   // interpolate pooled representations before the head
  mixup_sentence,  // interpolate head logits before the softmax
};

std::string_view augment_kind_name(AugmentKind kind);
AugmentKind parse_augment_kind(std::string_view name);

struct AugmentConfig {
  AugmentKind kind = AugmentKind::noisy;
  double noisy_gate_alpha = 0.20;
  double word_drop_rate = 0.30;
  std::size_t word_drop_min = 1;
  std::size_t word_drop_max = 10;
  double mixup_lambda = 0.30;
  double asda_mask_rate = 0.15;
  double continuation_keep_fraction = 0.70;

  void validate() const;
};

/// Produces a continuation of at most `max_tokens` tokens for a prefix.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<std::string> generate(std::span<const std::string> prefix, std::size_t max_tokens,
                                            SeededRng& rng) const = 0;
};

/// Bigram language model with add-one smoothing over the training vocabulary.
///
/// Sampling walks the vocabulary in sorted token order and picks the first
/// token whose cumulative weight exceeds uniform() * total. A context token
/// never seen as a bigram left-hand side falls back to unigram counts.
class NgramGenerator final : public Generator {
 public:
  explicit NgramGenerator(const std::vector<Example>& corpus);

  std::vector<std::string> generate(std::span<const std::string> prefix, std::size_t max_tokens,
                                    SeededRng& rng) const override;

  /// Smoothed next-token weights after `context` (unigram counts if unseen).
  std::vector<double> next_weights(const std::string& context) const;
  /// Most likely next token; ties go to the lexicographically smallest.
  const std::string& mode_after(const std::string& context) const;
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> index_;
  std::vector<double> unigram_;
  std::map<std::size_t, std::map<std::size_t, double>> bigram_;
};

/// Only order 2 is implemented.
NgramGenerator fit_ngram_generator(const std::vector<Example>& corpus, int order = 2);

struct MixItem {
  std::vector<double> x;
  std::vector<double> y;
};

/// (lambda x_a + (1 - lambda) x_b, lambda y_a + (1 - lambda) y_b).
MixItem mixup_pair(const MixItem& a, const MixItem& b, double lambda);

struct MixedBatch {
  Var values;
  Tensor labels;
};

/// Row i is mixed with row pairing[i]. A single-row batch passes through.
MixedBatch mixup_encoder_level(Var pooled, const Tensor& labels, std::span<const std::size_t> pairing, double lambda);
MixedBatch mixup_sentence_level(Var logits, const Tensor& labels, std::span<const std::size_t> pairing, double lambda);

/// Plain-tensor form of the row mixing, used for constant teacher logits.
Tensor mix_rows(const Tensor& values, std::span<const std::size_t> pairing, double lambda);

struct MaskedToken {
  std::size_t position = 0;
  std::string original;
};

struct AsdaResult {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> ids;
  std::size_t e2_begin = 0;  // [e2_begin, e2_end) is the second example's region
  std::size_t e2_end = 0;
  std::vector<MaskedToken> masked;
  std::string label;
};

/// Number of tokens masked in a second sentence of `length` tokens:
/// max(1, ceil(rate * length)), capped at length.
std::size_t asda_mask_count(double mask_rate, std::size_t length);

/// Builds "the next two sentences are {label} . [SEP] the first sentence is :
/// {e1} . [SEP] the second sentence is : {e2} ." and replaces a uniformly
/// drawn set of e2 tokens with [MASK]. Positions index `tokens` (no CLS).
AsdaResult asda_augment(const Example& e1, const Example& e2, const Vocab& vocab, double mask_rate, SeededRng& rng);

/// Draw order: no draws for fewer than 2 tokens; one gate draw; one
/// bernoulli(drop_rate) per token in order. If fewer than `min` were marked,
/// the shortfall is drawn by sample_without_replacement over the unmarked
/// positions; if more than `max`, `max` marks are kept by
/// sample_without_replacement over the marked list. At least one token survives.
std::vector<std::string> word_drop(std::span<const std::string> tokens, double gate_alpha, SeededRng& rng,
                                   double drop_rate = 0.30, std::size_t min_removed = 1, std::size_t max_removed = 10);

/// Requires at least two sentences (no draws otherwise); one gate draw, then
/// one uniform_int pick of the sentence to remove. Survivors join with spaces.
std::string sentence_drop(const std::string& text, double gate_alpha, SeededRng& rng);

/// Keeps ceil(keep_fraction * L) tokens and asks the generator for at most the
/// remaining count. Requires L >= 4. A throwing generator leaves the example
/// unchanged (with a warning on stderr).
Example generative_continuation(const Example& example, const Generator& generator, double keep_fraction,
                                SeededRng& rng);

}  // namespace distilkit
