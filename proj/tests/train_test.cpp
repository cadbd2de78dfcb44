#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ilt/synth.hpp"
#include "ilt/train.hpp"

namespace ilt {
namespace {

struct ToyData {
  std::vector<PairRecord> pairs;
  BpeModel bpe;
  JointVocab vocab{1, 1};

  ToyData(long n, const CorpusParams& params, int bpe_size = 300) {
    pairs = gen_corpus(n, 11, params).train;
    std::vector<std::string> texts;
    for (const auto& r : pairs) {
      texts.push_back(r.src_text);
      texts.push_back(r.tgt_text);
    }
    bpe = train_bpe(texts, bpe_size);
    vocab = JointVocab(bpe.vocab_size(), params.n_units);
  }
};

CorpusParams small_params() {
  return {.dict_words = 12, .min_len = 2, .max_len = 3, .expansion_r = 4, .jitter = 1, .n_units = 16};
}

ModelConfig small_model(const JointVocab& vocab) {
  return {.n_layers = 1, .d_model = 16, .n_heads = 2, .d_ff = 32, .max_seq_len = 96, .vocab_size = vocab.size(),
          .dropout = 0.2, .seed = 2};
}

TEST(Train, NoScheduleKeepsSpeechOnly) {
  ToyData s(40, small_params());
  TrainConfig cfg{.batch_size = 4, .total_steps = 5, .schedule = ScheduleKind::kNone, .seed = 1};
  const auto r = train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe);
  ASSERT_EQ(r.metrics.size(), 5u);
  for (const auto& m : r.metrics) {
    EXPECT_EQ(m.p, 0.0);
    EXPECT_EQ(m.f_src, 0.0);
    EXPECT_EQ(m.f_tgt, 0.0);
  }
  const auto ex = assemble_example(s.pairs[0], 0.0, cfg, s.bpe, s.vocab, 0).example;
  for (int t = ex.segments.i_src.begin; t < ex.segments.i_src.end; ++t) EXPECT_TRUE(s.vocab.is_speech(ex.tokens[t]));
  for (int t = ex.segments.i_tgt.begin; t < ex.segments.i_tgt.end; ++t) EXPECT_TRUE(s.vocab.is_speech(ex.tokens[t]));
}

TEST(Train, ScheduledRatiosFollowSchedule) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.text_ratio(0), 0.9);
  EXPECT_EQ(cfg.text_ratio(2700), 0.0);
  EXPECT_EQ(cfg.text_ratio(5000), 0.0);
  cfg.schedule = ScheduleKind::kConstant;
  EXPECT_EQ(cfg.text_ratio(2700), 0.3);
}

TEST(Train, InterleavedExampleIsPureSpeechAtZeroRatio) {
  ToyData s(40, small_params());
  const TrainConfig cfg{.seed = 9};
  const auto a = assemble_example(s.pairs[3], 0.0, cfg, s.bpe, s.vocab, 17).example;
  TrainConfig none = cfg;
  none.schedule = ScheduleKind::kNone;
  const auto b = assemble_example(s.pairs[3], none.text_ratio(17), none, s.bpe, s.vocab, 17).example;
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.loss_mask, b.loss_mask);
  const auto c = assemble_example(s.pairs[3], 0.9, cfg, s.bpe, s.vocab, 17);
  EXPECT_GE(c.f_src, 0.9);
  EXPECT_GE(c.f_tgt, 0.9);
  EXPECT_LT(c.example.tokens.size(), a.tokens.size());
}

TEST(Train, InitialLossNearUniform) {
  ToyData s(40, small_params());
  TrainConfig cfg{.batch_size = 8, .total_steps = 1, .seed = 3};
  const auto r = train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe);
  const double uniform = std::log(static_cast<double>(s.vocab.size()));
  EXPECT_NEAR(r.metrics[0].loss / uniform, 1.0, 0.10);
}

TEST(Train, ResumeIsBitExact) {
  ToyData s(40, small_params());
  TrainConfig cfg{.batch_size = 4, .total_steps = 12, .interval = 4, .seed = 5, .threads = 2};
  const auto model_cfg = small_model(s.vocab);
  const auto full = train(s.pairs, model_cfg, cfg, s.vocab, s.bpe);

  const auto path = std::filesystem::temp_directory_path() / "ilt_resume_test.ckpt";
  TrainHooks hooks;
  hooks.checkpoint_every = 5;
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    if (c.step == 5) save_checkpoint(path, c, {"checkpoint", "x", cfg.seed});
  };
  auto first = cfg;
  first.total_steps = 5;
  train(s.pairs, model_cfg, first, s.vocab, s.bpe, hooks);
  auto loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded.step, 5);
  loaded.train_config.total_steps = 12;
  const auto rest = resume(s.pairs, loaded, s.vocab, s.bpe);

  ASSERT_EQ(rest.metrics.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(rest.metrics[i].loss, full.metrics[5 + i].loss);
  EXPECT_EQ(rest.checkpoint.model.params, full.checkpoint.model.params);
  EXPECT_EQ(rest.checkpoint.optimizer.m, full.checkpoint.optimizer.m);
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  ToyData s(40, small_params());
  TrainConfig cfg{.batch_size = 5, .total_steps = 4, .seed = 6, .threads = 1};
  const auto a = train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe);
  cfg.threads = 3;
  const auto b = train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe);
  EXPECT_EQ(a.checkpoint.model.params, b.checkpoint.model.params);
}

TEST(Train, CheckpointRoundTrip) {
  ToyData s(20, small_params());
  TrainConfig cfg{.batch_size = 2, .total_steps = 3, .schedule = ScheduleKind::kConstant, .seed = 8};
  const auto r = train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe);
  const auto path = std::filesystem::temp_directory_path() / "ilt_ckpt_roundtrip.ckpt";
  save_checkpoint(path, r.checkpoint, {"checkpoint", "abc", 8});
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.model.params, r.checkpoint.model.params);
  EXPECT_EQ(back.model.config, r.checkpoint.model.config);
  EXPECT_EQ(back.optimizer.v, r.checkpoint.optimizer.v);
  EXPECT_EQ(back.optimizer.step, 3);
  EXPECT_EQ(back.train_config.to_canonical_string(), cfg.to_canonical_string());
  {
    std::ofstream f(path, std::ios::binary);
    f << "garbage";
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Train, RejectsBadInput) {
  ToyData s(20, small_params());
  TrainConfig cfg{.total_steps = 0};
  EXPECT_THROW(train(s.pairs, small_model(s.vocab), cfg, s.vocab, s.bpe), std::invalid_argument);
  cfg.total_steps = 2;
  EXPECT_THROW(train({}, small_model(s.vocab), cfg, s.vocab, s.bpe), std::invalid_argument);
}

TEST(Train, OverlongExamplesAreSkipped) {
  ToyData s(20, small_params());
  auto model_cfg = small_model(s.vocab);
  model_cfg.max_seq_len = 8;
  TrainConfig cfg{.batch_size = 3, .total_steps = 2, .seed = 1};
  const auto r = train(s.pairs, model_cfg, cfg, s.vocab, s.bpe);
  EXPECT_EQ(r.metrics[0].skipped, 3);
  EXPECT_TRUE(std::isnan(r.metrics[0].loss));
}

TEST(Train, MetricsCsvLayout) {
  const auto path = std::filesystem::temp_directory_path() / "ilt_metrics_test.csv";
  write_metrics_csv(path, {{.step = 0, .p = 0.9, .loss = 1.5, .f_src = 1, .f_tgt = 0.5, .len_mean = 20}},
                    {"metrics", "h", 1});
  std::ifstream f(path);
  std::string header, cols, row;
  std::getline(f, header);
  std::getline(f, cols);
  std::getline(f, row);
  EXPECT_EQ(header.rfind("# {\"header\":", 0), 0u);
  EXPECT_EQ(cols, "step,p,loss,f_src,f_tgt,len_mean");
  EXPECT_EQ(row, "0,0.90000000000000002,1.5,1,0.5,20");
  std::filesystem::remove(path);
}

TEST(Train, OverfitsTenPairs) {
  ToyData s(12, small_params());
  s.pairs.resize(10);
  auto model_cfg = small_model(s.vocab);
  model_cfg.d_model = 32;
  model_cfg.d_ff = 64;
  model_cfg.dropout = 0.0;
  TrainConfig cfg{.adam = {.learning_rate = 3e-3}, .batch_size = 10, .total_steps = 2000,
                  .schedule = ScheduleKind::kNone, .seed = 4};
  double best = 1e9;
  long reached = -1;
  TrainHooks hooks;
  hooks.on_step = [&](const MetricsRow& m) {
    best = std::min(best, m.loss);
    if (reached < 0 && m.loss < 0.05) reached = m.step;
  };
  train(s.pairs, model_cfg, cfg, s.vocab, s.bpe, hooks);
  EXPECT_GE(reached, 0) << "best loss " << best;
}

}  // namespace
}  // namespace ilt
