// SPDX-License-Identifier: Apache-2.0
#include "distilkit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "distilkit/error.hpp"
#include "distilkit/ops.hpp"
#include "distilkit/rng.hpp"

namespace distilkit {

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string("augment: ") + what + " must lie in [0,1]");
}

void check_pairing(std::span<const std::size_t> pairing, std::size_t rows, const char* op) {
  if (pairing.size() != rows) {
    throw ShapeError(std::string(op) + ": pairing of size " + std::to_string(pairing.size()) + " for " +
                     std::to_string(rows) + " rows");
  }
  for (std::size_t j : pairing) {
    if (j >= rows) throw ValidationError(std::string(op) + ": pairing index out of range");
  }
}

Tensor mix_labels(const Tensor& labels, std::span<const std::size_t> pairing, double lambda) {
  return mix_rows(labels, pairing, lambda);
}

MixedBatch mix_var(Var values, const Tensor& labels, std::span<const std::size_t> pairing, double lambda,
                   const char* op) {
  check_unit(lambda, "mixup lambda");
  const Tensor& v = values.value();
  if (v.rank() != 2 || labels.rank() != 2 || v.dim(0) != labels.dim(0)) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(v.shape()) + " and " +
                     shape_to_string(labels.shape()));
  }
  if (v.dim(0) < 2) return {values, labels};
  check_pairing(pairing, v.dim(0), op);
  Var partner = ops::gather_rows(values, pairing);
  Var mixed = ops::add(ops::scale(values, lambda), ops::scale(partner, 1.0 - lambda));
  return {mixed, mix_labels(labels, pairing, lambda)};
}

void append(std::vector<std::string>& out, std::initializer_list<const char*> words) {
  for (const char* w : words) out.emplace_back(w);
}

}  // namespace

std::string_view augment_kind_name(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::asda: return "asda";
    case AugmentKind::continuation: return "continuation";
    case AugmentKind::noisy: return "noisy";
    case AugmentKind::mixup_encoder: return "mixup_encoder";
    case AugmentKind::mixup_sentence: return "mixup_sentence";
  }
  return "?";
}

AugmentKind parse_augment_kind(std::string_view name) {
  for (AugmentKind k : {AugmentKind::asda, AugmentKind::continuation, AugmentKind::noisy, AugmentKind::mixup_encoder,
                        AugmentKind::mixup_sentence}) {
    if (augment_kind_name(k) == name) return k;
  }
  throw ValidationError("unknown augmentation kind '" + std::string(name) + "'");
}

void AugmentConfig::validate() const {
  check_unit(noisy_gate_alpha, "noisy_gate_alpha");
  check_unit(word_drop_rate, "word_drop_rate");
  check_unit(mixup_lambda, "mixup_lambda");
  if (word_drop_min < 1 || word_drop_min > word_drop_max) throw ValidationError("augment: invalid word drop bounds");
  if (!(asda_mask_rate > 0.0 && asda_mask_rate < 1.0)) throw ValidationError("augment: asda_mask_rate must lie in (0,1)");
  if (!(continuation_keep_fraction > 0.0 && continuation_keep_fraction < 1.0)) {
    throw ValidationError("augment: continuation_keep_fraction must lie in (0,1)");
  }
}

NgramGenerator::NgramGenerator(const std::vector<Example>& corpus) {
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, double> counts;
  for (const auto& ex : corpus) {
    docs.push_back(normalize_tokens(ex.text));
    for (const auto& t : docs.back()) counts[t] += 1.0;
  }
  if (counts.empty()) throw ValidationError("fit_ngram_generator: corpus has no tokens");
  for (const auto& [tok, n] : counts) {
    index_.emplace(tok, vocab_.size());
    vocab_.push_back(tok);
    unigram_.push_back(n);
  }
  for (const auto& doc : docs) {
    for (std::size_t i = 1; i < doc.size(); ++i) bigram_[index_.at(doc[i - 1])][index_.at(doc[i])] += 1.0;
  }
}

std::vector<double> NgramGenerator::next_weights(const std::string& context) const {
  auto ctx = index_.find(context);
  if (ctx == index_.end()) return unigram_;
  auto row = bigram_.find(ctx->second);
  if (row == bigram_.end()) return unigram_;
  std::vector<double> w(vocab_.size(), 1.0);
  for (const auto& [j, n] : row->second) w[j] += n;
  return w;
}

const std::string& NgramGenerator::mode_after(const std::string& context) const {
  const auto w = next_weights(context);
  return vocab_[static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin())];
}

std::vector<std::string> NgramGenerator::generate(std::span<const std::string> prefix, std::size_t max_tokens,
                                                  SeededRng& rng) const {
  std::vector<std::string> out;
  std::string context = prefix.empty() ? std::string() : prefix.back();
  for (std::size_t i = 0; i < max_tokens; ++i) {
    const auto w = next_weights(context);
    double total = 0.0;
    for (double x : w) total += x;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = w.size() - 1;
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc += w[j];
      if (acc > target) {
        pick = j;
        break;
      }
    }
    out.push_back(vocab_[pick]);
    context = vocab_[pick];
  }
  return out;
}

NgramGenerator fit_ngram_generator(const std::vector<Example>& corpus, int order) {
  if (order != 2) throw ValidationError("fit_ngram_generator: only order 2 is supported");
  if (corpus.empty()) throw ValidationError("fit_ngram_generator: empty corpus");
  return NgramGenerator(corpus);
}

MixItem mixup_pair(const MixItem& a, const MixItem& b, double lambda) {
  check_unit(lambda, "mixup lambda");
  if (a.x.size() != b.x.size() || a.y.size() != b.y.size()) throw ShapeError("mixup_pair: dimension mismatch");
  MixItem out{std::vector<double>(a.x.size()), std::vector<double>(a.y.size())};
  for (std::size_t i = 0; i < a.x.size(); ++i) out.x[i] = lambda * a.x[i] + (1.0 - lambda) * b.x[i];
  for (std::size_t i = 0; i < a.y.size(); ++i) out.y[i] = lambda * a.y[i] + (1.0 - lambda) * b.y[i];
  return out;
}

Tensor mix_rows(const Tensor& values, std::span<const std::size_t> pairing, double lambda) {
  check_unit(lambda, "mixup lambda");
  if (values.rank() != 2) throw ShapeError("mix_rows: expected a matrix, got " + shape_to_string(values.shape()));
  const std::size_t rows = values.dim(0), cols = values.dim(1);
  if (rows < 2) return values;
  check_pairing(pairing, rows, "mix_rows");
  Tensor out(values.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      out.at(i, c) = lambda * values.at(i, c) + (1.0 - lambda) * values.at(pairing[i], c);
    }
  }
  return out;
}

MixedBatch mixup_encoder_level(Var pooled, const Tensor& labels, std::span<const std::size_t> pairing, double lambda) {
  return mix_var(pooled, labels, pairing, lambda, "mixup_encoder_level");
}

MixedBatch mixup_sentence_level(Var logits, const Tensor& labels, std::span<const std::size_t> pairing, double lambda) {
  return mix_var(logits, labels, pairing, lambda, "mixup_sentence_level");
}

std::size_t asda_mask_count(double mask_rate, std::size_t length) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ValidationError("asda: mask_rate must lie in (0,1)");
  // The epsilon keeps exact products such as 0.15 * 20 from rounding up to 4.
  const auto want = static_cast<std::size_t>(std::ceil(mask_rate * static_cast<double>(length) - 1e-9));
  return std::min(length, std::max<std::size_t>(1, want));
}

AsdaResult asda_augment(const Example& e1, const Example& e2, const Vocab& vocab, double mask_rate, SeededRng& rng) {
  if (e1.label != e2.label || e1.task != e2.task) {
    throw ValidationError("asda: examples have different labels '" + e1.label + "' and '" + e2.label + "'");
  }
  const auto t1 = normalize_tokens(e1.text);
  const auto t2 = normalize_tokens(e2.text);
  if (t2.empty()) throw ValidationError("asda: second example is empty");
  const std::size_t count = asda_mask_count(mask_rate, t2.size());

  AsdaResult r;
  r.label = e1.label;
  auto& toks = r.tokens;
  append(toks, {"the", "next", "two", "sentences", "are"});
  for (auto& t : normalize_tokens(e1.label)) toks.push_back(std::move(t));
  append(toks, {".", "[SEP]", "the", "first", "sentence", "is", ":"});
  toks.insert(toks.end(), t1.begin(), t1.end());
  append(toks, {".", "[SEP]", "the", "second", "sentence", "is", ":"});
  r.e2_begin = toks.size();
  toks.insert(toks.end(), t2.begin(), t2.end());
  r.e2_end = toks.size();
  toks.emplace_back(".");

  for (std::size_t off : rng.sample_without_replacement(t2.size(), count)) {
    const std::size_t pos = r.e2_begin + off;
    r.masked.push_back({pos, toks[pos]});
    toks[pos] = std::string(kSpecialTokens[kMaskId]);
  }
  std::sort(r.masked.begin(), r.masked.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
  r.ids.reserve(toks.size());
  for (const auto& t : toks) r.ids.push_back(vocab.id(t));
  return r;
}

std::vector<std::string> word_drop(std::span<const std::string> tokens, double gate_alpha, SeededRng& rng,
                                   double drop_rate, std::size_t min_removed, std::size_t max_removed) {
  check_unit(gate_alpha, "noisy_gate_alpha");
  std::vector<std::string> in(tokens.begin(), tokens.end());
  const std::size_t n = in.size();
  if (n < 2) return in;
  if (!rng.bernoulli(gate_alpha)) return in;

  std::vector<std::size_t> marked;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(drop_rate)) marked.push_back(i);
  }
  // At least one token always survives, so the bounds shrink on short inputs.
  const std::size_t hi = std::min(max_removed, n - 1);
  const std::size_t lo = std::min(min_removed, hi);
  if (marked.size() < lo) {
    std::vector<std::size_t> unmarked;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::binary_search(marked.begin(), marked.end(), i)) unmarked.push_back(i);
    }
    for (std::size_t k : rng.sample_without_replacement(unmarked.size(), lo - marked.size())) {
      marked.push_back(unmarked[k]);
    }
  } else if (marked.size() > hi) {
    std::vector<std::size_t> kept;
    for (std::size_t k : rng.sample_without_replacement(marked.size(), hi)) kept.push_back(marked[k]);
    marked = std::move(kept);
  }
  std::vector<bool> drop(n, false);
  for (std::size_t i : marked) drop[i] = true;
  std::vector<std::string> out;
  out.reserve(n - marked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!drop[i]) out.push_back(std::move(in[i]));
  }
  return out;
}

std::string sentence_drop(const std::string& text, double gate_alpha, SeededRng& rng) {
  check_unit(gate_alpha, "noisy_gate_alpha");
  auto sentences = split_sentences(text);
  if (sentences.size() < 2) return text;
  if (!rng.bernoulli(gate_alpha)) return text;
  const auto victim = static_cast<std::size_t>(rng.uniform_int(sentences.size()));
  sentences.erase(sentences.begin() + static_cast<std::ptrdiff_t>(victim));
  return join_tokens(sentences);
}

Example generative_continuation(const Example& example, const Generator& generator, double keep_fraction,
                                SeededRng& rng) {
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0)) throw ValidationError("continuation: keep_fraction must lie in (0,1)");
  const auto tokens = normalize_tokens(example.text);
  const std::size_t n = tokens.size();
  if (n < 4) throw ValidationError("continuation: example needs at least 4 tokens, got " + std::to_string(n));
  const std::size_t keep = std::min(n - 1, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9)));
  const std::size_t tail = n - keep;
  std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(keep));
  std::vector<std::string> generated;
  try {
    generated = generator.generate(std::span<const std::string>(out), tail, rng);
  } catch (const std::exception& e) {
    std::cerr << "warning: continuation generator failed: " << e.what() << "; keeping the original example\n";
    return example;
  }
  if (generated.size() > tail) generated.resize(tail);
  out.insert(out.end(), generated.begin(), generated.end());
  return Example{join_tokens(out), example.label, example.task};
}

}  // namespace distilkit
