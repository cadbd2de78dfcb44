#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "ilt/bpe.hpp"
#include "ilt/ctc_align.hpp"
#include "ilt/quantizer.hpp"
#include "ilt/rng.hpp"
#include "ilt/vocab.hpp"

namespace ilt {

enum class InterleaveMode {
  kText,               // replace word spans with their BPE tokens
  kMask,               // replace each word span with a single MASK token
  kTextEqualInterval,  // like kText, but word spans assumed evenly spaced
};

InterleaveMode parse_interleave_mode(std::string_view name);
std::string_view to_string(InterleaveMode mode);

struct InterleaveConfig {
  double p = 0.0;       // text ratio, fraction of words to replace
  double lambda = 1.0;  // Poisson mean of the extra span length
  InterleaveMode mode = InterleaveMode::kText;
};

struct InterleavedSequence {
  std::vector<TokenId> tokens;  // joint-vocab ids
  int n_words = 0;
  int replaced_words = 0;
  /// Replaced word-index ranges [first, last], in the order they were chosen.
  std::vector<std::pair<int, int>> replaced_spans;
};

/// Knuth's multiplication method. Throws on negative lambda.
int sample_poisson(double lambda, Rng& rng);

/// Word-level speech/text interleaving.
///
/// Starting from the pure unit sequence, repeatedly picks a not-yet-replaced
/// word j uniformly, draws l ~ Poisson(lambda), and replaces the frames of
/// words j..j+l (clamped to the last word, cut at the first already-replaced
/// word) with the BPE tokens of those words joined by single spaces. Stops
/// once the replaced-word count reaches p * N, so the realized fraction can
/// exceed p by the last span. p = 0 returns the unit sequence untouched.
InterleavedSequence interleave(const UnitSequence& units, const WordAlignment& align, const InterleaveConfig& cfg,
                               const JointVocab& vocab, const BpeModel& bpe, Rng& rng);

/// Evenly spaced pseudo-alignment: word i covers [i*q, (i+1)*q - 1] with
/// q = floor(M / N); trailing frames go to the last word.
WordAlignment equal_interval_alignment(std::size_t frames, const WordAlignment& words);

double realized_text_fraction(const InterleavedSequence& seq);

/// Stepwise decay: max(0, p0 - delta * floor(step / interval)), snapped to
/// a 1e-9 grid so decimal schedules hit their nominal values exactly.
double schedule_text_ratio(long step, double p0 = 0.9, double delta = 0.1, long interval = 300);

/// Fixed ratio used by the unscheduled interleaving baseline.
double constant_text_ratio(long step);

inline constexpr double kConstantTextRatio = 0.3;

}  // namespace ilt
