#include <gtest/gtest.h>

#include "ilt/cot.hpp"
#include "ilt/model.hpp"

namespace ilt {
namespace {

const JointVocab kVocab(300, 16);

std::vector<TokenId> units(std::initializer_list<int> u) {
  std::vector<TokenId> out;
  for (int x : u) out.push_back(kVocab.unit_id(x));
  return out;
}

TEST(Cot, LayoutAndMask) {
  const auto i_src = units({1, 2, 3});
  const std::vector<TokenId> t_src{10, 11};
  const std::vector<TokenId> t_tgt{20, 21};
  const auto i_tgt = units({6, 7, 8, 9});
  const auto ex = build_training_example(i_src, t_src, t_tgt, i_tgt, CotMode::kCot, kVocab);
  ASSERT_EQ(ex.tokens.size(), 16u);
  EXPECT_EQ(ex.tokens[0], kVocab.special(Special::kBos));
  EXPECT_EQ(ex.tokens[4], kVocab.special(Special::kSepAsr));
  EXPECT_EQ(ex.tokens[7], kVocab.special(Special::kSepMt));
  EXPECT_EQ(ex.tokens[10], kVocab.special(Special::kSepTts));
  EXPECT_EQ(ex.tokens[15], kVocab.special(Special::kEos));
  const std::vector<unsigned char> mask{0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_EQ(ex.loss_mask, mask);
  EXPECT_EQ(ex.segments.i_src, (Range{1, 4}));
  EXPECT_EQ(ex.segments.t_src, (Range{5, 7}));
  EXPECT_EQ(ex.segments.t_tgt, (Range{8, 10}));
  EXPECT_EQ(ex.segments.i_tgt, (Range{11, 15}));
  int targets = 0;
  for (auto m : ex.loss_mask) targets += m;
  EXPECT_EQ(targets, 12);
}

TEST(Cot, DirectLayout) {
  const auto i_src = units({1, 2, 3});
  const auto i_tgt = units({6, 7, 8, 9});
  const auto ex = build_training_example(i_src, {}, {}, i_tgt, CotMode::kDirect, kVocab);
  ASSERT_EQ(ex.tokens.size(), 10u);
  EXPECT_EQ(ex.tokens[4], kVocab.special(Special::kSepTts));
  int targets = 0;
  for (auto m : ex.loss_mask) targets += m;
  EXPECT_EQ(targets, 6);
  EXPECT_EQ(ex.segments.t_src.size(), 0);
}

TEST(Cot, RejectsEmptyOrInvalidSegments) {
  const auto s = units({1});
  const std::vector<TokenId> t{5};
  EXPECT_THROW(build_training_example({}, t, t, s, CotMode::kCot, kVocab), std::invalid_argument);
  EXPECT_THROW(build_training_example(s, t, t, {}, CotMode::kCot, kVocab), std::invalid_argument);
  EXPECT_THROW(build_training_example(s, {}, t, s, CotMode::kCot, kVocab), std::invalid_argument);
  const std::vector<TokenId> bad{kVocab.size()};
  EXPECT_THROW(build_training_example(s, bad, t, s, CotMode::kCot, kVocab), std::invalid_argument);
}

TEST(Cot, InferencePrompt) {
  const auto s = units({3, 4});
  EXPECT_EQ(build_inference_prompt(s, CotMode::kCot, kVocab),
            (std::vector<TokenId>{kVocab.special(Special::kBos), s[0], s[1], kVocab.special(Special::kSepAsr)}));
  EXPECT_EQ(build_inference_prompt(s, CotMode::kDirect, kVocab).back(), kVocab.special(Special::kSepTts));
  EXPECT_THROW(build_inference_prompt({}, CotMode::kCot, kVocab), std::invalid_argument);
}

TEST(Cot, SplitGenerated) {
  const TokenId mt = kVocab.special(Special::kSepMt);
  const TokenId tts = kVocab.special(Special::kSepTts);
  const TokenId eos = kVocab.special(Special::kEos);
  const TokenId u = kVocab.unit_id(2);

  auto g = split_generated(std::vector<TokenId>{10, mt, 20, tts, u, eos}, kVocab);
  EXPECT_FALSE(g.malformed);
  EXPECT_EQ(g.t_src, (std::vector<TokenId>{10}));
  EXPECT_EQ(g.t_tgt, (std::vector<TokenId>{20}));
  EXPECT_EQ(g.s_tgt, (std::vector<TokenId>{u}));

  EXPECT_TRUE(split_generated(std::vector<TokenId>{10, tts, u, eos}, kVocab).malformed);
  EXPECT_TRUE(split_generated(std::vector<TokenId>{10, mt, 20, tts, u}, kVocab).malformed);
  EXPECT_TRUE(split_generated(std::vector<TokenId>{10, mt, 20, tts, mt, u, eos}, kVocab).malformed);
  EXPECT_TRUE(split_generated(std::vector<TokenId>{}, kVocab).malformed);

  g = split_generated(std::vector<TokenId>{u, u, eos}, kVocab, CotMode::kDirect);
  EXPECT_FALSE(g.malformed);
  EXPECT_EQ(g.s_tgt.size(), 2u);
}

TEST(Cot, SplitInvertsBuild) {
  const auto i_src = units({1, 2});
  const std::vector<TokenId> t_src{10, 11, 12};
  const std::vector<TokenId> t_tgt{20};
  const auto i_tgt = units({6, 7, 9});
  const auto ex = build_training_example(i_src, t_src, t_tgt, i_tgt, CotMode::kCot, kVocab);
  const auto prompt = build_inference_prompt(i_src, CotMode::kCot, kVocab);
  const std::span<const TokenId> rest(ex.tokens.begin() + static_cast<long>(prompt.size()), ex.tokens.end());
  const auto g = split_generated(rest, kVocab);
  EXPECT_FALSE(g.malformed);
  EXPECT_EQ(g.t_src, t_src);
  EXPECT_EQ(g.t_tgt, t_tgt);
  EXPECT_EQ(g.s_tgt, i_tgt);
}

TEST(Cot, MaskedLossFactorizesOverSegments) {
  const JointVocab vocab(40, 8);
  ModelConfig cfg{.n_layers = 1, .d_model = 16, .n_heads = 2, .d_ff = 32, .max_seq_len = 32,
                  .vocab_size = vocab.size(), .dropout = 0.0, .seed = 5};
  const Model model = init_model(cfg);
  std::vector<TokenId> i_src, i_tgt;
  for (int u = 0; u < 6; ++u) i_src.push_back(vocab.unit_id(u));
  for (int u = 2; u < 7; ++u) i_tgt.push_back(vocab.unit_id(u));
  const std::vector<TokenId> t_src{3, 4, 5};
  const std::vector<TokenId> t_tgt{7, 8};
  const auto ex = build_training_example(i_src, t_src, t_tgt, i_tgt, CotMode::kCot, vocab);

  const double total = loss_and_grads(model, ex.tokens, ex.loss_mask, false, nullptr, false).nll_sum;
  double parts = 0.0;
  auto add = [&](int begin, int end) {
    std::vector<unsigned char> m(ex.tokens.size(), 0);
    for (int t = begin; t < end; ++t) m[t] = 1;
    parts += loss_and_grads(model, ex.tokens, m, false, nullptr, false).nll_sum;
  };
  const auto& s = ex.segments;
  add(s.i_src.end, s.i_src.end + 1);  // SEP_ASR
  add(s.t_src.begin, s.t_src.end);
  add(s.t_src.end, s.t_src.end + 1);  // SEP_MT
  add(s.t_tgt.begin, s.t_tgt.end);
  add(s.t_tgt.end, s.t_tgt.end + 1);  // SEP_TTS
  add(s.i_tgt.begin, s.i_tgt.end);
  add(s.i_tgt.end, s.i_tgt.end + 1);  // EOS
  EXPECT_NEAR(total, parts, 1e-9);
}

TEST(Cot, ModeNames) {
  EXPECT_EQ(parse_cot_mode("cot"), CotMode::kCot);
  EXPECT_EQ(parse_cot_mode(to_string(CotMode::kDirect)), CotMode::kDirect);
  EXPECT_THROW(parse_cot_mode("chain"), std::invalid_argument);
}

}  // namespace
}  // namespace ilt
