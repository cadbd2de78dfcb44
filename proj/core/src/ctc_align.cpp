#include "ilt/ctc_align.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ilt {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void validate_posteriors(const FramePosteriors& posteriors) {
  const auto& lp = posteriors.log_probs;
  if (lp.cols < 2) throw std::invalid_argument("ctc: posteriors need a blank and at least one label");
  for (std::size_t t = 0; t < lp.rows; ++t) {
    double mass = 0.0;
    for (double v : lp.row(t)) {
      if (std::isnan(v) || v > 1e-9) throw std::invalid_argument("ctc: malformed log posterior at frame " + std::to_string(t));
      mass += std::exp(v);
    }
    if (std::abs(mass - 1.0) > 1e-6) {
      throw std::invalid_argument("ctc: frame " + std::to_string(t) + " posteriors sum to " + std::to_string(mass));
    }
  }
}

void validate_alignment(const WordAlignment& align, std::size_t frames) {
  long prev_end = -1;
  for (std::size_t i = 0; i < align.size(); ++i) {
    const auto& s = align[i];
    if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= frames) {
      throw std::invalid_argument("alignment: span " + std::to_string(i) + " out of range");
    }
    if (s.start <= prev_end) throw std::invalid_argument("alignment: span " + std::to_string(i) + " overlaps its predecessor");
    prev_end = s.end;
  }
}

std::size_t ctc_min_frames(std::span<const int> reference) {
  std::size_t n = reference.size();
  for (std::size_t i = 1; i < reference.size(); ++i) {
    if (reference[i] == reference[i - 1]) ++n;
  }
  return n;
}

CtcAlignment ctc_forced_align(const FramePosteriors& posteriors, std::span<const int> reference, int blank_id) {
  if (reference.empty()) throw std::invalid_argument("ctc: empty reference");
  validate_posteriors(posteriors);
  const auto& lp = posteriors.log_probs;
  const int n_labels = static_cast<int>(lp.cols);
  if (blank_id < 0 || blank_id >= n_labels) throw std::invalid_argument("ctc: blank id out of range");
  for (int tok : reference) {
    if (tok < 0 || tok >= n_labels || tok == blank_id) throw std::invalid_argument("ctc: invalid reference label");
  }
  const std::size_t frames = lp.rows;
  if (frames < ctc_min_frames(reference)) {
    throw std::invalid_argument("ctc: " + std::to_string(frames) + " frames cannot emit " +
                                std::to_string(reference.size()) + " labels (need " +
                                std::to_string(ctc_min_frames(reference)) + ")");
  }

  // Extended states: blank, l1, blank, l2, ..., lL, blank.
  const std::size_t n_states = 2 * reference.size() + 1;
  auto label_of = [&](std::size_t s) { return (s % 2 == 0) ? blank_id : reference[s / 2]; };

  Matrix score(frames, n_states, kNegInf);
  std::vector<unsigned char> back(frames * n_states, 0);  // 0 stay, 1 from s-1, 2 from s-2

  score(0, 0) = lp(0, blank_id);
  score(0, 1) = lp(0, reference[0]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < n_states; ++s) {
      double best = score(t - 1, s);
      unsigned char from = 0;
      if (s >= 1 && score(t - 1, s - 1) > best) {
        best = score(t - 1, s - 1);
        from = 1;
      }
      if (s >= 2 && s % 2 == 1 && label_of(s) != label_of(s - 2) && score(t - 1, s - 2) > best) {
        best = score(t - 1, s - 2);
        from = 2;
      }
      if (best == kNegInf) continue;
      score(t, s) = best + lp(t, label_of(s));
      back[t * n_states + s] = from;
    }
  }

  std::size_t state = n_states - 2;
  if (score(frames - 1, n_states - 1) > score(frames - 1, state)) state = n_states - 1;
  CtcAlignment result;
  result.log_prob = score(frames - 1, state);
  if (result.log_prob == kNegInf) throw std::invalid_argument("ctc: reference has zero probability under posteriors");

  std::vector<std::size_t> path(frames);
  for (std::size_t t = frames; t-- > 0;) {
    path[t] = state;
    state -= back[t * n_states + state];
  }

  result.spans.resize(reference.size());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    result.spans[i] = TokenSpan{reference[i], -1, -1};
  }
  for (std::size_t t = 0; t < frames; ++t) {
    if (path[t] % 2 == 0) continue;
    auto& span = result.spans[path[t] / 2];
    if (span.start < 0) span.start = static_cast<int>(t);
    span.end = static_cast<int>(t);
  }
  return result;
}

WordAlignment tokens_to_word_spans(std::span<const TokenSpan> token_spans, std::span<const int> word_token_counts,
                                   std::span<const std::string> words) {
  if (word_token_counts.size() != words.size()) throw std::invalid_argument("word spans: counts and words differ in length");
  std::size_t total = 0;
  for (int c : word_token_counts) {
    if (c < 1) throw std::invalid_argument("word spans: every word needs at least one token");
    total += static_cast<std::size_t>(c);
  }
  if (total != token_spans.size()) {
    throw std::invalid_argument("word spans: counts sum to " + std::to_string(total) + " but there are " +
                                std::to_string(token_spans.size()) + " token spans");
  }
  WordAlignment out;
  out.reserve(words.size());
  std::size_t next = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& first = token_spans[next];
    const auto& last = token_spans[next + word_token_counts[w] - 1];
    out.push_back(WordSpan{first.start, last.end, words[w]});
    next += word_token_counts[w];
  }
  return out;
}

}  // namespace ilt
