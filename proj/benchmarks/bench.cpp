#include <benchmark/benchmark.h>

#include "ilt/bpe.hpp"
#include "ilt/ctc_align.hpp"
#include "ilt/interleave.hpp"
#include "ilt/model.hpp"
#include "ilt/quantizer.hpp"
#include "ilt/synth.hpp"

namespace {

using namespace ilt;

struct Data {
  CorpusSplits splits = gen_corpus(400, 1, {});
  BpeModel bpe;
  JointVocab vocab{1, 1};
  Data() {
    std::vector<std::string> texts;
    for (const auto& r : splits.train) texts.push_back(r.src_text + " " + r.tgt_text);
    bpe = train_bpe(texts, 512);
    vocab = JointVocab(bpe.vocab_size(), 64);
  }
};

const Data& data() {
  static const Data d;
  return d;
}

void BM_BpeEncode(benchmark::State& state) {
  const auto& d = data();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& r = d.splits.train[i++ % d.splits.train.size()];
    benchmark::DoNotOptimize(d.bpe.encode(r.src_text));
  }
}
BENCHMARK(BM_BpeEncode);

void BM_Interleave(benchmark::State& state) {
  const auto& d = data();
  const InterleaveConfig cfg{static_cast<double>(state.range(0)) / 10.0, 1.0, InterleaveMode::kText};
  Rng rng(3);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& r = d.splits.train[i++ % d.splits.train.size()];
    benchmark::DoNotOptimize(interleave(UnitSequence{r.src_units}, r.src_align, cfg, d.vocab, d.bpe, rng));
  }
}
BENCHMARK(BM_Interleave)->Arg(0)->Arg(3)->Arg(9);

void BM_CtcAlign(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const int n_words = static_cast<int>(frames / 10);
  WordAlignment align;
  std::vector<std::vector<int>> labels;
  std::vector<int> ref;
  for (int w = 0; w < n_words; ++w) {
    align.push_back({w * 10, w * 10 + 9, "w"});
    labels.push_back({1 + w % 7, 1 + (w + 3) % 7});
    ref.insert(ref.end(), labels.back().begin(), labels.back().end());
  }
  const auto post = make_posteriors(frames, align, labels, 8, 0.9);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_forced_align(post, ref, 0));
}
BENCHMARK(BM_CtcAlign)->Arg(50)->Arg(200)->Arg(800);

void BM_KMeans(benchmark::State& state) {
  Rng rng(1);
  Matrix x(static_cast<std::size_t>(state.range(0)), 16);
  for (double& v : x.data) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_fit(x, {.k = 64, .max_iters = 10, .seed = 2}));
}
BENCHMARK(BM_KMeans)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_LossAndGrads(benchmark::State& state) {
  const ModelConfig cfg{.vocab_size = 583, .seed = 1};
  const Model m = init_model(cfg);
  const auto len = static_cast<std::size_t>(state.range(0));
  std::vector<TokenId> toks(len);
  std::vector<unsigned char> mask(len, 1);
  mask[0] = 0;
  for (std::size_t i = 0; i < len; ++i) toks[i] = static_cast<TokenId>((i * 37) % 583);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(m, toks, mask, true, &rng));
}
BENCHMARK(BM_LossAndGrads)->Arg(32)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const JointVocab vocab(512, 64);
  const ModelConfig cfg{.vocab_size = vocab.size(), .seed = 1};
  const Model m = init_model(cfg);
  const std::vector<TokenId> prompt{vocab.special(Special::kBos), vocab.unit_id(1), vocab.unit_id(2)};
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(m, prompt, 100, vocab));
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
