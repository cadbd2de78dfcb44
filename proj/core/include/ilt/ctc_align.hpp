#pragma once

#include <span>
#include <string>
#include <vector>

#include "ilt/matrix.hpp"

namespace ilt {

/// Frame-level CTC log posteriors, T x (labels + blank). Column `blank`
/// is the no-emission label.
struct FramePosteriors {
  Matrix log_probs;

  [[nodiscard]] std::size_t frames() const { return log_probs.rows; }
  [[nodiscard]] std::size_t labels() const { return log_probs.cols; }
};

/// Throws std::invalid_argument unless every entry is <= 0 (up to 1e-9) and
/// every row normalizes to 1 within 1e-6 in probability space.
void validate_posteriors(const FramePosteriors& posteriors);

struct TokenSpan {
  int token = 0;
  int start = 0;  // inclusive frame
  int end = 0;    // inclusive frame
  bool operator==(const TokenSpan&) const = default;
};

struct WordSpan {
  int start = 0;
  int end = 0;
  std::string word;
  bool operator==(const WordSpan&) const = default;
};

/// Sorted, non-overlapping word spans over one unit sequence.
using WordAlignment = std::vector<WordSpan>;

/// Throws unless spans are sorted, non-overlapping, a <= b and inside [0, frames).
void validate_alignment(const WordAlignment& align, std::size_t frames);

struct CtcAlignment {
  std::vector<TokenSpan> spans;
  double log_prob = 0.0;  // score of the best path
};

/// Minimum frames a CTC path needs to emit `reference`.
std::size_t ctc_min_frames(std::span<const int> reference);

/// Viterbi forced alignment over the blank-extended label graph. On score
/// ties the backtrace stays in the current state, so emissions start as late
/// as possible.
CtcAlignment ctc_forced_align(const FramePosteriors& posteriors, std::span<const int> reference, int blank_id);

/// Groups consecutive token spans into words: word i covers counts[i] tokens.
WordAlignment tokens_to_word_spans(std::span<const TokenSpan> token_spans, std::span<const int> word_token_counts,
                                   std::span<const std::string> words);

}  // namespace ilt
