#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ilt/bpe.hpp"
#include "ilt/synth.hpp"

namespace ilt {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Dictionary, ReverseAndMap) {
  const Dictionary dict({"a", "b", "c"}, {"A", "B", "C"});
  EXPECT_EQ(dict.translate({"a", "b", "c"}), (std::vector<std::string>{"C", "B", "A"}));
  EXPECT_EQ(dict.invert({"C", "B", "A"}), (std::vector<std::string>{"a", "b", "c"}));
  const Dictionary identity({"x", "y"}, {"x", "y"});
  EXPECT_EQ(identity.translate({"x", "y", "x"}), (std::vector<std::string>{"x", "y", "x"}));
  EXPECT_THROW(Dictionary({"a", "a"}, {"A", "B"}), std::invalid_argument);
}

TEST(ToyPair, LengthsAndInvertibility) {
  const auto dict = make_toy_dictionary(30, 1);
  Rng rng(2);
  const auto one = gen_toy_pair(rng, dict, 1, 1);
  EXPECT_EQ(one.src.size(), 1u);
  EXPECT_EQ(one.tgt.size(), 1u);
  for (int i = 0; i < 200; ++i) {
    const auto p = gen_toy_pair(rng, dict, 2, 6);
    EXPECT_GE(p.src.size(), 2u);
    EXPECT_LE(p.src.size(), 6u);
    EXPECT_EQ(dict.invert(p.tgt), p.src);
  }
  EXPECT_THROW(gen_toy_pair(rng, dict, 0, 3), std::invalid_argument);
  EXPECT_THROW(gen_toy_pair(rng, dict, 4, 3), std::invalid_argument);
}

TEST(TextToUnits, ExactTilingWithoutJitter) {
  const UnitMap map(16, 3, 4);
  Rng rng(1);
  const auto out = text_to_units({"ka", "lo", "mi"}, 4, 0, map, rng);
  EXPECT_EQ(out.units.size(), 12u);
  EXPECT_EQ(out.align, (WordAlignment{{0, 3, "ka"}, {4, 7, "lo"}, {8, 11, "mi"}}));
  for (int u : out.units.units) {
    EXPECT_GE(u, 0);
    EXPECT_LT(u, 16);
  }
  EXPECT_THROW(text_to_units({"ka"}, 0, 0, map, rng), std::invalid_argument);
  EXPECT_THROW(text_to_units({"ka"}, 3, 3, map, rng), std::invalid_argument);
}

TEST(TextToUnits, MeanExpansionNearRatio) {
  const UnitMap map(64, 3, 9);
  Rng rng(5);
  std::vector<std::string> words(1000, "tona");
  const auto out = text_to_units(words, 10, 2, map, rng);
  const double mean = static_cast<double>(out.units.size()) / 1000.0;
  EXPECT_GE(mean, 9.8);
  EXPECT_LE(mean, 10.2);
  int prev_end = -1;
  for (const auto& s : out.align) {
    EXPECT_EQ(s.start, prev_end + 1);
    EXPECT_GE(s.end - s.start + 1, 8);
    EXPECT_LE(s.end - s.start + 1, 12);
    prev_end = s.end;
  }
  EXPECT_EQ(prev_end + 1, static_cast<int>(out.units.size()));
}

TEST(Posteriors, RowsNormalizedAndSharp) {
  const WordAlignment align{{0, 4, "a"}, {5, 9, "b"}};
  const std::vector<std::vector<int>> labels{{1, 2}, {2, 3}};
  for (double s : {0.3, 0.7, 0.99}) {
    const auto post = make_posteriors(10, align, labels, 4, s);
    EXPECT_NO_THROW(validate_posteriors(post));
  }
  const auto hard = make_posteriors(10, align, labels, 4, 1.0);
  for (std::size_t t = 0; t < 10; ++t) {
    int ones = 0;
    for (double v : hard.log_probs.row(t)) {
      if (v == 0.0) ++ones;
      else EXPECT_TRUE(std::isinf(v));
    }
    EXPECT_EQ(ones, 1);
  }
  EXPECT_THROW(make_posteriors(10, align, labels, 4, 0.0), std::invalid_argument);
  EXPECT_THROW(make_posteriors(10, align, labels, 4, 1.5), std::invalid_argument);
}

TEST(Corpus, SplitSizesAndTiling) {
  const auto splits = gen_corpus(100, 7, {});
  EXPECT_EQ(splits.train.size(), 90u);
  EXPECT_EQ(splits.dev.size(), 5u);
  EXPECT_EQ(splits.test.size(), 5u);
  const auto dict = make_toy_dictionary(CorpusParams{}.dict_words, 7);
  for (const auto& r : splits.train) {
    for (const auto* side : {&r.src_align, &r.tgt_align}) {
      int prev = -1;
      for (const auto& s : *side) {
        EXPECT_EQ(s.start, prev + 1);
        prev = s.end;
      }
    }
    EXPECT_EQ(r.src_align.back().end + 1, static_cast<int>(r.src_units.size()));
    EXPECT_EQ(r.tgt_align.back().end + 1, static_cast<int>(r.tgt_units.size()));
    EXPECT_EQ(dict.translate(split_words(r.src_text)), split_words(r.tgt_text));
  }
  EXPECT_THROW(gen_corpus(0, 7, {}), std::invalid_argument);
}

TEST(Corpus, ByteIdenticalFilesForSameSeed) {
  const auto dir = std::filesystem::temp_directory_path() / "ilt_synth_test";
  std::filesystem::remove_all(dir);
  const ArtifactHeader header{"dataset", "abc", 7};
  write_corpus(dir / "a", gen_corpus(100, 7, {}), header);
  write_corpus(dir / "b", gen_corpus(100, 7, {}), header);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_EQ(read_pairs(dir / "a" / "train.jsonl"), gen_corpus(100, 7, {}).train);
  std::filesystem::remove_all(dir);
}

TEST(Corpus, ExpansionRatioRecoverable) {
  const auto splits = gen_corpus(600, 3, {});
  std::vector<std::string> texts;
  for (const auto& r : splits.train) texts.push_back(r.src_text);
  const auto bpe = train_bpe(texts, 320);
  double units = 0, tokens = 0, words = 0;
  for (const auto& r : splits.train) {
    units += static_cast<double>(r.src_units.size());
    tokens += static_cast<double>(bpe.encode(r.src_text).size());
    words += static_cast<double>(r.src_align.size());
  }
  const double implied = 10.0 / (tokens / words);
  EXPECT_NEAR((units / tokens) / implied, 1.0, 0.15);
}

}  // namespace
}  // namespace ilt
