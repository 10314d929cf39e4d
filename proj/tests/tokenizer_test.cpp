// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "distilkit/error.hpp"
#include "distilkit/tokenizer.hpp"
#include "support.hpp"

namespace distilkit {
namespace {

using Strings = std::vector<std::string>;

Vocab abc_vocab(std::size_t min_frequency = 1) {
  return build_vocab({{"a b", "Other", TaskId::offense}, {"a c", "Other", TaskId::offense}}, min_frequency);
}

TEST(Tokenizer, NormalizeSplitsPunctuation) {
  EXPECT_EQ(normalize_tokens("Hello, world"), (Strings{"hello", ",", "world"}));
  EXPECT_EQ(normalize_tokens("  A-b!?  "), (Strings{"a", "-", "b", "!", "?"}));
  EXPECT_EQ(normalize_tokens("Ştefan ÎN"), (Strings{"Ştefan", "În"}));
}

TEST(Vocab, OrderingRule) {
  const Vocab v = abc_vocab();
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.id("a"), 5);
  EXPECT_EQ(v.id("b"), 6);
  EXPECT_EQ(v.id("c"), 7);
  for (std::int32_t i = 0; i < 5; ++i) EXPECT_EQ(v.token(i), kSpecialTokens[static_cast<std::size_t>(i)]);
}

TEST(Vocab, MinFrequency) {
  const Vocab v = abc_vocab(2);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.id("b"), kUnkId);
}

TEST(Vocab, SpecialsNeverFromCorpus) {
  // Brackets are punctuation, so literal special names split apart.
  const Vocab v = build_vocab({{"[MASK] [PAD] x", "Other", TaskId::offense}}, 1);
  EXPECT_EQ(v.id("[MASK]"), kMaskId);
  EXPECT_EQ(v.id("[PAD]"), kPadId);
  for (std::size_t i = kSpecialTokens.size(); i < v.size(); ++i) {
    EXPECT_EQ(std::find(kSpecialTokens.begin(), kSpecialTokens.end(), v.tokens()[i]), kSpecialTokens.end());
  }
  EXPECT_EQ(encode("[MASK]", v, 8).size(), 4u);
}

TEST(Vocab, SaveLoadRoundTrip) {
  testing::TempDir dir("vocab");
  const Vocab v = abc_vocab();
  v.save(dir / "v.txt");
  const Vocab w = Vocab::load(dir / "v.txt");
  EXPECT_EQ(w.tokens(), v.tokens());
  EXPECT_EQ(w.hash(), v.hash());
  testing::write_file(dir / "bad.txt", "[PAD]\n[UNK]\n");
  EXPECT_THROW(Vocab::load(dir / "bad.txt"), ValidationError);
  EXPECT_THROW(build_vocab({}, 1), ValidationError);
}

TEST(Encode, Examples) {
  const Vocab v = abc_vocab();
  EXPECT_EQ(encode("a b", v, 8), (std::vector<std::int32_t>{kClsId, 5, 6}));
  EXPECT_EQ(encode("zzz", v, 8), (std::vector<std::int32_t>{kClsId, kUnkId}));
  EXPECT_EQ(encode("a b c a b c a b c", v, 5).size(), 5u);
  EXPECT_THROW(encode("a", v, 1), ValidationError);
}

TEST(Encode, DecodeInvertsForKnownText) {
  const Vocab v = build_vocab({{"The cat, the Dog!", "Other", TaskId::offense}}, 1);
  EXPECT_EQ(decode(encode("the DOG, cat!", v, 64), v), normalize_tokens("the DOG, cat!"));
}

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("A b. C d!"), (Strings{"A b.", "C d!"}));
  EXPECT_EQ(split_sentences("No terminator"), (Strings{"No terminator"}));
  EXPECT_EQ(split_sentences("X? Y. Z"), (Strings{"X?", "Y.", "Z"}));
  EXPECT_EQ(split_sentences("3.14 is pi."), (Strings{"3.14 is pi."}));
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(MakeBatch, PaddingAndMask) {
  const Vocab v = abc_vocab();
  const TaskSpec spec = TaskSpec::defaults(TaskId::offense);
  const std::vector<Example> ex{{"a b", "Other", TaskId::offense}, {"a b c a", "Insult", TaskId::offense}};
  const TokenBatch b = make_batch(ex, v, spec, 16);
  EXPECT_EQ(b.batch, 2u);
  EXPECT_EQ(b.width, 5u);
  EXPECT_EQ(std::vector<std::uint8_t>(b.mask.begin(), b.mask.begin() + 5), (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
  for (std::size_t i = 0; i < b.ids.size(); ++i) EXPECT_EQ(b.mask[i] == 0, b.ids[i] == kPadId);
  for (std::size_t r = 0; r < b.batch; ++r) EXPECT_EQ(b.id(r, 0), kClsId);
  EXPECT_EQ(b.labels, (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(b.targets.at(1, 1), 1.0);
}

TEST(MakeBatch, EmotionOneHot) {
  const Vocab v = abc_vocab();
  const TaskSpec spec = TaskSpec::defaults(TaskId::emotion);
  const TokenBatch b = make_batch(std::vector<Example>{{"a", "Joy", TaskId::emotion}}, v, spec, 16);
  ASSERT_EQ(b.targets.shape(), (Shape{1, 7}));
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(b.targets.at(0, k), k == 2 ? 1.0 : 0.0);
}

TEST(MakeBatch, Rejections) {
  const Vocab v = abc_vocab();
  const TaskSpec spec = TaskSpec::defaults(TaskId::offense);
  EXPECT_THROW(make_batch(std::vector<Example>{}, v, spec, 8), ValidationError);
  EXPECT_THROW(make_batch(std::vector<Example>{{"a", "Joy", TaskId::emotion}}, v, spec, 8), ValidationError);
  EXPECT_THROW(make_batch(std::vector<Example>{{"a", "Joy", TaskId::offense}}, v, spec, 8), ValidationError);
}

}  // namespace
}  // namespace distilkit
