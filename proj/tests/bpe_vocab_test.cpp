#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "ilt/bpe.hpp"
#include "ilt/rng.hpp"
#include "ilt/vocab.hpp"

namespace ilt {
namespace {

TEST(Bpe, SinglePairCorpusLearnsOneMerge) {
  const std::vector<std::string> corpus{"aaaa"};
  const auto model = train_bpe(corpus, BpeModel::kBaseSize + 1);
  ASSERT_EQ(model.merges().size(), 1u);
  EXPECT_EQ(model.merges()[0], (std::pair<TokenId, TokenId>{'a', 'a'}));
  EXPECT_EQ(model.vocab_size(), BpeModel::kBaseSize + 1);
}

TEST(Bpe, MostFrequentPairMergesFirst) {
  // Pairs: abab -> ab, ba, ab; ab -> ab. ("a","b") occurs 3 times.
  const std::vector<std::string> corpus{"abab", "ab"};
  const auto model = train_bpe(corpus, BpeModel::kBaseSize + 1);
  ASSERT_EQ(model.merges().size(), 1u);
  EXPECT_EQ(model.merges()[0], (std::pair<TokenId, TokenId>{'a', 'b'}));
  EXPECT_EQ(model.encode("abab").size(), 2u);
  EXPECT_EQ(model.decode(model.encode("abab")), "abab");
}

TEST(Bpe, TiesBreakLexicographically) {
  // "ab" and "cd" each occur once; ("a","b") < ("c","d").
  const std::vector<std::string> corpus{"cd", "ab"};
  const auto model = train_bpe(corpus, BpeModel::kBaseSize + 1);
  EXPECT_EQ(model.merges()[0], (std::pair<TokenId, TokenId>{'a', 'b'}));
}

TEST(Bpe, StopsWhenNoPairsRemain) {
  const std::vector<std::string> corpus{"ab"};
  const auto model = train_bpe(corpus, 400);
  EXPECT_EQ(model.vocab_size(), BpeModel::kBaseSize + 1);
}

TEST(Bpe, RejectsEmptyCorpusAndSmallTarget) {
  EXPECT_THROW(train_bpe(std::vector<std::string>{}, 300), std::invalid_argument);
  EXPECT_THROW(train_bpe(std::vector<std::string>{"abc"}, 100), std::invalid_argument);
}

TEST(Bpe, EmptyTextEncodesToNothing) {
  const auto model = train_bpe(std::vector<std::string>{"hello world"}, 270);
  EXPECT_TRUE(model.encode("").empty());
  EXPECT_EQ(model.decode(std::vector<TokenId>{}), "");
}

TEST(Bpe, DecodeRejectsUnknownId) {
  const auto model = train_bpe(std::vector<std::string>{"hello"}, 260);
  const std::vector<TokenId> bad{9999};
  EXPECT_THROW((void)model.decode(bad), std::out_of_range);
}

std::string random_utf8(Rng& rng) {
  std::string s;
  const int n = static_cast<int>(rng.below(24));
  for (int i = 0; i < n; ++i) {
    const auto kind = rng.below(6);
    std::uint32_t cp;
    if (kind == 0) cp = ' ';
    else if (kind <= 2) cp = 'a' + static_cast<std::uint32_t>(rng.below(6));
    else if (kind == 3) cp = 0x80 + static_cast<std::uint32_t>(rng.below(0x780));
    else if (kind == 4) cp = 0x800 + static_cast<std::uint32_t>(rng.below(0xD000 - 0x800));
    else cp = 0x10000 + static_cast<std::uint32_t>(rng.below(0x100000));
    if (cp < 0x80) {
      s += static_cast<char>(cp);
    } else if (cp < 0x800) {
      s += static_cast<char>(0xC0 | (cp >> 6));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      s += static_cast<char>(0xE0 | (cp >> 12));
      s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      s += static_cast<char>(0xF0 | (cp >> 18));
      s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return s;
}

TEST(Bpe, RoundTripOnRandomUtf8) {
  Rng rng(11);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(random_utf8(rng));
  const auto model = train_bpe(corpus, 400);
  for (int i = 0; i < 1000; ++i) {
    const auto text = random_utf8(rng);
    ASSERT_EQ(model.decode(model.encode(text)), text);
  }
  // Whitespace runs and tabs also survive.
  const std::string odd = "  a\t\tb \n c  ";
  EXPECT_EQ(model.decode(model.encode(odd)), odd);
}

TEST(Bpe, TrainingIsDeterministicAndSerializable) {
  const std::vector<std::string> corpus{"the cat sat", "the hat", "a cat and a hat"};
  const auto a = train_bpe(corpus, 300);
  const auto b = train_bpe(corpus, 300);
  EXPECT_EQ(a.to_json(), b.to_json());
  const auto c = BpeModel::from_json(a.to_json());
  EXPECT_EQ(c.merges(), a.merges());
  for (TokenId id = 0; id < a.vocab_size(); ++id) {
    EXPECT_EQ(c.id_of(a.token(id)), id);
  }
}

TEST(Bpe, ChunksKeepSingleLeadingSpace) {
  const auto chunks = split_chunks("ab  cd e");
  const std::vector<std::string_view> expected{"ab", " ", " cd", " e"};
  EXPECT_EQ(chunks, expected);
}

TEST(JointVocab, LayoutAndModality) {
  const auto v = build_joint_vocab(512, 64);
  EXPECT_EQ(v.unit_id(0), 512);
  EXPECT_EQ(v.unit_id(5), 517);
  EXPECT_EQ(v.modality_of(0), Modality::kText);
  EXPECT_EQ(v.modality_of(511), Modality::kText);
  EXPECT_EQ(v.modality_of(512), Modality::kSpeech);
  EXPECT_EQ(v.modality_of(512 + 64), Modality::kSpecial);
  EXPECT_EQ(v.special(Special::kPad), 512 + 64);
  EXPECT_EQ(v.size(), 512 + 64 + kNumSpecials);
  EXPECT_THROW((void)v.modality_of(v.size()), std::out_of_range);
  EXPECT_THROW(build_joint_vocab(0, 64), std::invalid_argument);
  EXPECT_THROW(build_joint_vocab(512, 0), std::invalid_argument);
}

TEST(JointVocab, ModalityPartitionsIdSpace) {
  const auto v = build_joint_vocab(37, 11);
  int text = 0, speech = 0, special = 0;
  for (TokenId id = 0; id < v.size(); ++id) {
    switch (v.modality_of(id)) {
      case Modality::kText: ++text; break;
      case Modality::kSpeech: ++speech; break;
      case Modality::kSpecial: ++special; break;
    }
  }
  EXPECT_EQ(text, 37);
  EXPECT_EQ(speech, 11);
  EXPECT_EQ(special, kNumSpecials);
}

TEST(JointVocab, JsonRoundTrip) {
  const auto v = build_joint_vocab(300, 16);
  EXPECT_EQ(JointVocab::from_json(v.to_json()), v);
  EXPECT_NE(v.to_json().find("\"SEP_ASR\":319"), std::string::npos);
}

}  // namespace
}  // namespace ilt
