#include "ilt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace ilt {

namespace {

using NGram = std::vector<TokenId>;

std::map<NGram, int> ngram_counts(const std::vector<TokenId>& seq, int n) {
  std::map<NGram, int> counts;
  if (seq.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[NGram(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace

double unit_bleu(std::span<const std::vector<TokenId>> hypotheses, std::span<const std::vector<TokenId>> references,
                 int max_n) {
  if (hypotheses.size() != references.size()) throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  if (references.empty()) throw std::invalid_argument("bleu: no references");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  std::vector<long> matched(max_n, 0), total(max_n, 0);
  long hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("bleu: empty reference at index " + std::to_string(i));
    hyp_len += static_cast<long>(hypotheses[i].size());
    ref_len += static_cast<long>(references[i].size());
    for (int n = 1; n <= max_n; ++n) {
      const auto h = ngram_counts(hypotheses[i], n);
      const auto r = ngram_counts(references[i], n);
      for (const auto& [gram, c] : h) {
        total[n - 1] += c;
        auto it = r.find(gram);
        if (it != r.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (hyp_len == 0 || matched[0] == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const double prec = n == 1 ? static_cast<double>(matched[0]) / static_cast<double>(total[0])
                               : (static_cast<double>(matched[n - 1]) + 1.0) / (static_cast<double>(total[n - 1]) + 1.0);
    log_sum += std::log(prec);
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_sum / max_n);
}

std::vector<LengthRatioRow> length_ratio_stats(const std::vector<PairRecord>& dataset, std::span<const double> p_values,
                                               const InterleaveConfig& base_cfg, const BpeModel& bpe,
                                               const JointVocab& vocab, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("length ratio: empty dataset");
  std::vector<LengthRatioRow> rows;
  for (std::size_t k = 0; k < p_values.size(); ++k) {
    InterleaveConfig cfg = base_cfg;
    cfg.p = p_values[k];
    LengthRatioRow row;
    row.p = cfg.p;
    for (const auto& pair : dataset) {
      auto side_ratio = [&](const std::vector<int>& units, const WordAlignment& align, const std::string& text, int side) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(pair.id), k, static_cast<std::uint64_t>(side)));
        const auto seq = interleave(UnitSequence{units}, align, cfg, vocab, bpe, rng);
        const auto text_len = bpe.encode(text).size();
        if (text_len == 0) throw std::invalid_argument("length ratio: empty transcript in pair " + std::to_string(pair.id));
        return static_cast<double>(seq.tokens.size()) / static_cast<double>(text_len);
      };
      row.src_ratio += side_ratio(pair.src_units, pair.src_align, pair.src_text, 1);
      row.tgt_ratio += side_ratio(pair.tgt_units, pair.tgt_align, pair.tgt_text, 2);
    }
    row.src_ratio /= static_cast<double>(dataset.size());
    row.tgt_ratio /= static_cast<double>(dataset.size());
    rows.push_back(row);
  }
  return rows;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nan("");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> mean_pool(const Matrix& hidden, Range range) {
  if (range.begin < 0 || range.end > static_cast<int>(hidden.rows) || range.size() <= 0) {
    throw std::invalid_argument("mean_pool: empty or out-of-range segment");
  }
  std::vector<double> out(hidden.cols, 0.0);
  for (int t = range.begin; t < range.end; ++t) {
    auto row = hidden.row(static_cast<std::size_t>(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += row[i];
  }
  for (double& v : out) v /= static_cast<double>(range.size());
  return out;
}

std::optional<SimilarityTriple> segment_similarity_from_hidden(const Matrix& hidden, const Segments& segments) {
  for (const Range& r : {segments.i_src, segments.t_src, segments.t_tgt, segments.i_tgt}) {
    if (r.size() <= 0) return std::nullopt;
  }
  const auto i_src = mean_pool(hidden, segments.i_src);
  const auto t_src = mean_pool(hidden, segments.t_src);
  const auto t_tgt = mean_pool(hidden, segments.t_tgt);
  const auto i_tgt = mean_pool(hidden, segments.i_tgt);
  SimilarityTriple s;
  s.src_speech_text = cosine(i_src, t_src);
  s.src_tgt_text = cosine(t_src, t_tgt);
  s.tgt_text_speech = cosine(t_tgt, i_tgt);
  if (std::isnan(s.src_speech_text) || std::isnan(s.src_tgt_text) || std::isnan(s.tgt_text_speech)) return std::nullopt;
  return s;
}

SimilarityTriple segment_similarity(const Model& model, std::span<const TrainingExample> examples) {
  SimilarityTriple mean;
  int used = 0;
  for (const auto& ex : examples) {
    const auto fwd = forward(model, ex.tokens, false, nullptr);
    const auto s = segment_similarity_from_hidden(fwd.hidden, ex.segments);
    if (!s) {
      ++mean.excluded;
      continue;
    }
    mean.src_speech_text += s->src_speech_text;
    mean.src_tgt_text += s->src_tgt_text;
    mean.tgt_text_speech += s->tgt_text_speech;
    ++used;
  }
  if (used > 0) {
    mean.src_speech_text /= used;
    mean.src_tgt_text /= used;
    mean.tgt_text_speech /= used;
  } else {
    mean.src_speech_text = mean.src_tgt_text = mean.tgt_text_speech = std::nan("");
  }
  return mean;
}

EvalReport score_predictions(std::span<const Prediction> predictions, std::span<const Reference> references) {
  if (predictions.size() != references.size()) throw std::invalid_argument("eval: prediction/reference count mismatch");
  if (references.empty()) throw std::invalid_argument("eval: empty test set");
  EvalReport report;
  report.n = static_cast<int>(references.size());
  std::vector<std::vector<TokenId>> hyps, refs;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto& p = predictions[i];
    const auto& r = references[i];
    if (r.s_tgt.empty()) throw std::invalid_argument("eval: reference " + std::to_string(i) + " lacks target units");
    hyps.push_back(p.s_tgt);
    refs.push_back(r.s_tgt);
    report.t_src_exact += (p.t_src == r.t_src) ? 1.0 : 0.0;
    report.t_tgt_exact += (p.t_tgt == r.t_tgt) ? 1.0 : 0.0;
    report.malformed_rate += p.malformed ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(references.size());
  report.t_src_exact /= n;
  report.t_tgt_exact /= n;
  report.malformed_rate /= n;
  report.unit_bleu = unit_bleu(hyps, refs);
  return report;
}

Reference make_reference(const PairRecord& pair, const BpeModel& bpe, const JointVocab& vocab) {
  if (pair.tgt_units.empty() || pair.src_text.empty() || pair.tgt_text.empty()) {
    throw std::invalid_argument("eval: pair " + std::to_string(pair.id) + " lacks gold text or target units");
  }
  Reference r;
  for (TokenId id : bpe.encode(pair.src_text)) r.t_src.push_back(vocab.text_id(id));
  for (TokenId id : bpe.encode(pair.tgt_text)) r.t_tgt.push_back(vocab.text_id(id));
  for (int u : pair.tgt_units) r.s_tgt.push_back(vocab.unit_id(u));
  return r;
}

EvalReport evaluate_s2st(const Model& model, const std::vector<PairRecord>& test_set, const BpeModel& bpe,
                         const JointVocab& vocab, CotMode format, int max_new_tokens) {
  if (test_set.empty()) throw std::invalid_argument("eval: empty test set");
  std::vector<Prediction> preds;
  std::vector<Reference> refs;
  for (const auto& pair : test_set) {
    refs.push_back(make_reference(pair, bpe, vocab));
    std::vector<TokenId> src;
    for (int u : pair.src_units) src.push_back(vocab.unit_id(u));
    const auto prompt = build_inference_prompt(src, format, vocab);
    int budget = model.config.max_seq_len - static_cast<int>(prompt.size());
    if (max_new_tokens > 0) budget = std::min(budget, max_new_tokens);
    Prediction p;
    if (budget < 1) {
      p.malformed = true;
    } else {
      const auto out = greedy_decode(model, prompt, budget, vocab);
      const auto seg = split_generated(out.tokens, vocab, format);
      p = Prediction{seg.t_src, seg.t_tgt, seg.s_tgt, seg.malformed || out.truncated};
    }
    preds.push_back(std::move(p));
  }
  return score_predictions(preds, refs);
}

std::string EvalReport::to_json(const std::string& header_line) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(header_line);
  j["n"] = n;
  j["unit_bleu"] = unit_bleu;
  j["t_src_exact"] = t_src_exact;
  j["t_tgt_exact"] = t_tgt_exact;
  j["malformed_rate"] = malformed_rate;
  auto lengths = nlohmann::ordered_json::array();
  for (const auto& r : length_table) lengths.push_back({{"p", r.p}, {"src", r.src_ratio}, {"tgt", r.tgt_ratio}});
  j["length_table"] = lengths;
  auto sims = nlohmann::ordered_json::array();
  for (const auto& [step, s] : similarity_table) {
    sims.push_back({{"step", step},
                    {"src_S_T", s.src_speech_text},
                    {"src_tgt_T", s.src_tgt_text},
                    {"tgt_T_S", s.tgt_text_speech},
                    {"excluded", s.excluded}});
  }
  j["similarity_table"] = sims;
  return j.dump(2);
}

}  // namespace ilt
