#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilt/bpe.hpp"
#include "ilt/cot.hpp"
#include "ilt/dataset.hpp"
#include "ilt/interleave.hpp"
#include "ilt/matrix.hpp"
#include "ilt/model.hpp"
#include "ilt/vocab.hpp"

namespace ilt {

/// Corpus BLEU over token-id sequences: clipped n-gram precisions for
/// n = 1..max_n, add-one smoothing for n > 1, brevity penalty.
double unit_bleu(std::span<const std::vector<TokenId>> hypotheses, std::span<const std::vector<TokenId>> references,
                 int max_n = 4);

struct LengthRatioRow {
  double p = 0.0;
  double src_ratio = 0.0;  // mean |I_p| / |BPE(text)| on the source side
  double tgt_ratio = 0.0;
};

/// Mean interleaved-to-text length ratio per text ratio p, both sides.
std::vector<LengthRatioRow> length_ratio_stats(const std::vector<PairRecord>& dataset, std::span<const double> p_values,
                                               const InterleaveConfig& base_cfg, const BpeModel& bpe,
                                               const JointVocab& vocab, std::uint64_t seed);

struct SimilarityTriple {
  double src_speech_text = 0.0;  // cos(I_src, T_src)
  double src_tgt_text = 0.0;     // cos(T_src, T_tgt)
  double tgt_text_speech = 0.0;  // cos(T_tgt, I_tgt)
  int excluded = 0;              // examples dropped for a zero-norm pooled vector
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Mean-pools rows [range.begin, range.end) of `hidden`.
std::vector<double> mean_pool(const Matrix& hidden, Range range);

/// Similarities for one example from injected hidden states. Empty when a
/// pooled vector has zero norm or a segment is empty.
std::optional<SimilarityTriple> segment_similarity_from_hidden(const Matrix& hidden, const Segments& segments);

/// Averages per-example similarities of last-layer hidden states.
SimilarityTriple segment_similarity(const Model& model, std::span<const TrainingExample> examples);

struct Prediction {
  std::vector<TokenId> t_src;
  std::vector<TokenId> t_tgt;
  std::vector<TokenId> s_tgt;
  bool malformed = false;
};

struct Reference {
  std::vector<TokenId> t_src;
  std::vector<TokenId> t_tgt;
  std::vector<TokenId> s_tgt;
};

struct EvalReport {
  double unit_bleu = 0.0;
  double t_src_exact = 0.0;
  double t_tgt_exact = 0.0;
  double malformed_rate = 0.0;
  int n = 0;
  std::vector<LengthRatioRow> length_table;
  std::vector<std::pair<long, SimilarityTriple>> similarity_table;  // keyed by checkpoint step

  [[nodiscard]] std::string to_json(const std::string& header_line) const;
};

/// Scores predictions against references (same order, same count).
EvalReport score_predictions(std::span<const Prediction> predictions, std::span<const Reference> references);

Reference make_reference(const PairRecord& pair, const BpeModel& bpe, const JointVocab& vocab);

/// Greedy-decodes every test pair from its pure-speech prompt and scores it.
EvalReport evaluate_s2st(const Model& model, const std::vector<PairRecord>& test_set, const BpeModel& bpe,
                         const JointVocab& vocab, CotMode format = CotMode::kCot, int max_new_tokens = 0);

}  // namespace ilt
