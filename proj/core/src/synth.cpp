#include "ilt/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ilt {

Dictionary::Dictionary(std::vector<std::string> src_words, std::vector<std::string> tgt_words)
    : src_(std::move(src_words)), tgt_(std::move(tgt_words)) {
  if (src_.empty()) throw std::invalid_argument("dictionary: no words");
  if (src_.size() != tgt_.size()) throw std::invalid_argument("dictionary: source and target word lists differ in size");
  for (std::size_t i = 0; i < src_.size(); ++i) {
    if (!src_index_.emplace(src_[i], i).second) throw std::invalid_argument("dictionary: duplicate source word " + src_[i]);
    if (!tgt_index_.emplace(tgt_[i], i).second) throw std::invalid_argument("dictionary: duplicate target word " + tgt_[i]);
  }
}

const std::string& Dictionary::to_tgt(const std::string& src_word) const {
  auto it = src_index_.find(src_word);
  if (it == src_index_.end()) throw std::out_of_range("dictionary: unknown source word " + src_word);
  return tgt_[it->second];
}

const std::string& Dictionary::to_src(const std::string& tgt_word) const {
  auto it = tgt_index_.find(tgt_word);
  if (it == tgt_index_.end()) throw std::out_of_range("dictionary: unknown target word " + tgt_word);
  return src_[it->second];
}

std::vector<std::string> Dictionary::translate(const std::vector<std::string>& src) const {
  std::vector<std::string> out;
  out.reserve(src.size());
  for (auto it = src.rbegin(); it != src.rend(); ++it) out.push_back(to_tgt(*it));
  return out;
}

std::vector<std::string> Dictionary::invert(const std::vector<std::string>& tgt) const {
  std::vector<std::string> out;
  out.reserve(tgt.size());
  for (auto it = tgt.rbegin(); it != tgt.rend(); ++it) out.push_back(to_src(*it));
  return out;
}

Dictionary make_toy_dictionary(int n_words, std::uint64_t seed) {
  if (n_words < 1) throw std::invalid_argument("dictionary: n_words must be >= 1");
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  Rng rng(derive_seed(seed, 0xD1C7));
  std::set<std::string> seen;
  std::vector<std::string> src;
  while (static_cast<int>(src.size()) < n_words) {
    const int syllables = 1 + static_cast<int>(rng.below(3));
    std::string w;
    for (int s = 0; s < syllables; ++s) {
      w += kConsonants[rng.below(kConsonants.size())];
      w += kVowels[rng.below(kVowels.size())];
    }
    if (seen.insert(w).second) src.push_back(w);
  }
  std::vector<std::string> tgt;
  tgt.reserve(src.size());
  for (const auto& w : src) {
    std::string up = w;
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    tgt.push_back(up);
  }
  return Dictionary(std::move(src), std::move(tgt));
}

ToyText gen_toy_pair(Rng& rng, const Dictionary& dict, int min_len, int max_len) {
  if (min_len < 1 || max_len < min_len) throw std::invalid_argument("toy pair: need 1 <= min_len <= max_len");
  const int len = min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - min_len + 1)));
  ToyText t;
  for (int i = 0; i < len; ++i) t.src.push_back(dict.src_words()[rng.below(dict.src_words().size())]);
  t.tgt = dict.translate(t.src);
  return t;
}

UnitMap::UnitMap(int n_units, int pattern_len, std::uint64_t seed)
    : n_units_(n_units), pattern_len_(pattern_len), seed_(seed) {
  if (n_units < 1 || pattern_len < 1) throw std::invalid_argument("unit map: n_units and pattern_len must be >= 1");
}

std::vector<int> UnitMap::pattern(const std::string& word) const {
  const std::uint64_t h = fnv1a(word.data(), word.size());
  std::vector<int> out;
  out.reserve(pattern_len_);
  for (int i = 0; i < pattern_len_; ++i) {
    out.push_back(static_cast<int>(derive_seed(seed_, h, static_cast<std::uint64_t>(i)) % static_cast<std::uint64_t>(n_units_)));
  }
  return out;
}

UnitsWithAlignment text_to_units(const std::vector<std::string>& words, int expansion_r, int jitter,
                                 const UnitMap& unit_map, Rng& rng) {
  if (expansion_r < 1) throw std::invalid_argument("text_to_units: expansion ratio must be >= 1");
  if (jitter < 0 || jitter >= expansion_r) throw std::invalid_argument("text_to_units: need 0 <= jitter < expansion ratio");
  UnitsWithAlignment out;
  for (const auto& w : words) {
    const int d = expansion_r - jitter + static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * jitter + 1)));
    const auto pat = unit_map.pattern(w);
    const int start = static_cast<int>(out.units.units.size());
    for (int i = 0; i < d; ++i) {
      out.units.units.push_back(pat[static_cast<std::size_t>(i) * pat.size() / static_cast<std::size_t>(d)]);
    }
    out.align.push_back(WordSpan{start, start + d - 1, w});
  }
  return out;
}

FramePosteriors make_posteriors(std::size_t frames, const WordAlignment& align,
                                const std::vector<std::vector<int>>& word_labels, int n_labels, double sharpness) {
  if (!(sharpness > 0.0 && sharpness <= 1.0)) throw std::invalid_argument("posteriors: sharpness must be in (0, 1]");
  if (n_labels < 2) throw std::invalid_argument("posteriors: need blank plus at least one label");
  if (word_labels.size() != align.size()) throw std::invalid_argument("posteriors: one label list per word required");
  validate_alignment(align, frames);

  constexpr int kBlank = 0;
  std::vector<int> label(frames, kBlank);
  std::vector<long> occurrence(frames, -1);
  long occ = 0;
  for (std::size_t w = 0; w < align.size(); ++w) {
    const auto& labs = word_labels[w];
    if (labs.empty()) throw std::invalid_argument("posteriors: word without labels");
    const std::size_t len = static_cast<std::size_t>(align[w].end - align[w].start + 1);
    const std::size_t m = labs.size();
    for (std::size_t k = 0; k < m; ++k, ++occ) {
      if (labs[k] <= 0 || labs[k] >= n_labels) throw std::invalid_argument("posteriors: label out of range");
      std::size_t lo = k * len / m;
      std::size_t hi = (k + 1) * len / m;
      if (m > len) {
        if (k >= len) continue;
        lo = k;
        hi = k + 1;
      }
      for (std::size_t f = lo; f < hi; ++f) {
        label[align[w].start + f] = labs[k];
        occurrence[align[w].start + f] = occ;
      }
    }
  }
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    if (label[t] != kBlank && label[t] == label[t + 1] && occurrence[t] != occurrence[t + 1]) label[t] = kBlank;
  }

  FramePosteriors post;
  post.log_probs = Matrix(frames, static_cast<std::size_t>(n_labels));
  const double rest = (1.0 - sharpness) / (n_labels - 1);
  const double log_rest = rest > 0.0 ? std::log(rest) : -std::numeric_limits<double>::infinity();
  const double log_sharp = std::log(sharpness);
  for (std::size_t t = 0; t < frames; ++t) {
    auto row = post.log_probs.row(t);
    std::fill(row.begin(), row.end(), log_rest);
    row[label[t]] = log_sharp;
  }
  return post;
}

Matrix make_unit_prototypes(int n_units, int dim, std::uint64_t seed) {
  if (n_units < 1 || dim < 1) throw std::invalid_argument("prototypes: n_units and dim must be >= 1");
  Rng rng(derive_seed(seed, 0x9807));
  Matrix p(n_units, dim);
  for (double& v : p.data) v = rng.normal();
  return p;
}

Matrix synthesize_features(const std::vector<int>& units, const Matrix& prototypes, double noise, Rng& rng) {
  Matrix f(units.size(), prototypes.cols);
  for (std::size_t t = 0; t < units.size(); ++t) {
    const auto proto = prototypes.row(static_cast<std::size_t>(units[t]));
    auto row = f.row(t);
    for (std::size_t d = 0; d < prototypes.cols; ++d) row[d] = proto[d] + noise * rng.normal();
  }
  return f;
}

std::string to_canonical_string(const CorpusParams& p) {
  return "dict_words=" + std::to_string(p.dict_words) + ";min_len=" + std::to_string(p.min_len) +
         ";max_len=" + std::to_string(p.max_len) + ";r=" + std::to_string(p.expansion_r) +
         ";jitter=" + std::to_string(p.jitter) + ";n_units=" + std::to_string(p.n_units) +
         ";pattern_len=" + std::to_string(p.pattern_len);
}

PairRecord gen_pair(long id, std::uint64_t seed, const CorpusParams& params, const Dictionary& dict,
                    const UnitMap& unit_map) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id), 0x7A1));
  const auto text = gen_toy_pair(rng, dict, params.min_len, params.max_len);
  auto src = text_to_units(text.src, params.expansion_r, params.jitter, unit_map, rng);
  auto tgt = text_to_units(text.tgt, params.expansion_r, params.jitter, unit_map, rng);
  PairRecord r;
  r.id = id;
  r.src_text = join_words(text.src);
  r.tgt_text = join_words(text.tgt);
  r.src_units = std::move(src.units.units);
  r.tgt_units = std::move(tgt.units.units);
  r.src_align = std::move(src.align);
  r.tgt_align = std::move(tgt.align);
  return r;
}

CorpusSplits gen_corpus(long n_pairs, std::uint64_t seed, const CorpusParams& params) {
  if (n_pairs < 1) throw std::invalid_argument("gen_corpus: n_pairs must be >= 1");
  const auto dict = make_toy_dictionary(params.dict_words, seed);
  const UnitMap unit_map(params.n_units, params.pattern_len, derive_seed(seed, 0x0417));

  std::vector<long> order(static_cast<std::size_t>(n_pairs));
  std::iota(order.begin(), order.end(), 0L);
  auto key = [&](long i) { return derive_seed(seed, static_cast<std::uint64_t>(i), 0x5B17); };
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    const auto ka = key(a), kb = key(b);
    return ka != kb ? ka < kb : a < b;
  });
  const long n_held = n_pairs * 5 / 100;
  std::vector<int> split(static_cast<std::size_t>(n_pairs), 0);
  for (long r = 0; r < n_pairs; ++r) {
    if (r >= n_pairs - 2 * n_held) split[order[r]] = (r >= n_pairs - n_held) ? 2 : 1;
  }

  CorpusSplits out;
  for (long i = 0; i < n_pairs; ++i) {
    auto rec = gen_pair(i, seed, params, dict, unit_map);
    switch (split[i]) {
      case 0: out.train.push_back(std::move(rec)); break;
      case 1: out.dev.push_back(std::move(rec)); break;
      default: out.test.push_back(std::move(rec)); break;
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& out_dir, const CorpusSplits& splits, const ArtifactHeader& header) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  write_pairs(out_dir / "train.jsonl", header, splits.train);
  write_pairs(out_dir / "dev.jsonl", header, splits.dev);
  write_pairs(out_dir / "test.jsonl", header, splits.test);
}

}  // namespace ilt
