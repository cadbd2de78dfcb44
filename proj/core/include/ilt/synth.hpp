#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "ilt/ctc_align.hpp"
#include "ilt/dataset.hpp"
#include "ilt/matrix.hpp"
#include "ilt/quantizer.hpp"
#include "ilt/rng.hpp"

namespace ilt {

/// Word-for-word bilingual dictionary. The toy "translation" of a sentence
/// maps each word through the dictionary and reverses word order.
class Dictionary {
 public:
  Dictionary(std::vector<std::string> src_words, std::vector<std::string> tgt_words);

  [[nodiscard]] const std::vector<std::string>& src_words() const { return src_; }
  [[nodiscard]] const std::vector<std::string>& tgt_words() const { return tgt_; }
  [[nodiscard]] const std::string& to_tgt(const std::string& src_word) const;
  [[nodiscard]] const std::string& to_src(const std::string& tgt_word) const;

  [[nodiscard]] std::vector<std::string> translate(const std::vector<std::string>& src) const;
  [[nodiscard]] std::vector<std::string> invert(const std::vector<std::string>& tgt) const;

 private:
  std::vector<std::string> src_;
  std::vector<std::string> tgt_;
  std::unordered_map<std::string, std::size_t> src_index_;
  std::unordered_map<std::string, std::size_t> tgt_index_;
};

/// Lowercase consonant-vowel pseudo-words; targets are their uppercase forms.
Dictionary make_toy_dictionary(int n_words, std::uint64_t seed);

struct ToyText {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
};

ToyText gen_toy_pair(Rng& rng, const Dictionary& dict, int min_len, int max_len);

/// Deterministic word -> base unit pattern.
class UnitMap {
 public:
  UnitMap(int n_units, int pattern_len, std::uint64_t seed);
  [[nodiscard]] std::vector<int> pattern(const std::string& word) const;
  [[nodiscard]] int n_units() const { return n_units_; }

 private:
  int n_units_;
  int pattern_len_;
  std::uint64_t seed_;
};

struct UnitsWithAlignment {
  UnitSequence units;
  WordAlignment align;
};

/// Each word gets d ~ U{r - jitter, ..., r + jitter} frames filled by
/// stretching its base pattern (repeats kept). Gold spans tile the output.
UnitsWithAlignment text_to_units(const std::vector<std::string>& words, int expansion_r, int jitter,
                                 const UnitMap& unit_map, Rng& rng);

/// Sharp synthetic CTC posteriors (column 0 is blank, label = column).
///
/// Word i's frames are split evenly among its labels word_labels[i]; each
/// frame puts `sharpness` on its label, except that the last frame before a
/// repeated label (inside or across words) puts it on blank. Frames outside
/// every word favor blank. The remaining mass is spread uniformly.
FramePosteriors make_posteriors(std::size_t frames, const WordAlignment& align,
                                const std::vector<std::vector<int>>& word_labels, int n_labels, double sharpness);

/// Gaussian prototype per unit, n_units x dim.
Matrix make_unit_prototypes(int n_units, int dim, std::uint64_t seed);
/// One noisy feature row per unit frame.
Matrix synthesize_features(const std::vector<int>& units, const Matrix& prototypes, double noise, Rng& rng);

struct CorpusParams {
  int dict_words = 48;
  int min_len = 2;
  int max_len = 5;
  int expansion_r = 10;
  int jitter = 2;
  int n_units = 64;
  int pattern_len = 3;
};

[[nodiscard]] std::string to_canonical_string(const CorpusParams& params);

/// Generates pair `id` of the corpus determined by (seed, params).
PairRecord gen_pair(long id, std::uint64_t seed, const CorpusParams& params, const Dictionary& dict,
                    const UnitMap& unit_map);

struct CorpusSplits {
  std::vector<PairRecord> train, dev, test;
};

/// 90/5/5 split by rank of a seeded hash of the pair index.
CorpusSplits gen_corpus(long n_pairs, std::uint64_t seed, const CorpusParams& params);

/// Writes train.jsonl, dev.jsonl and test.jsonl under `out_dir`.
void write_corpus(const std::filesystem::path& out_dir, const CorpusSplits& splits, const ArtifactHeader& header);

}  // namespace ilt
