#include "ilt/interleave.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ilt {

InterleaveMode parse_interleave_mode(std::string_view name) {
  if (name == "text") return InterleaveMode::kText;
  if (name == "mask") return InterleaveMode::kMask;
  if (name == "text_equal_interval") return InterleaveMode::kTextEqualInterval;
  throw std::invalid_argument("unknown interleave mode '" + std::string(name) + "'");
}

std::string_view to_string(InterleaveMode mode) {
  switch (mode) {
    case InterleaveMode::kText: return "text";
    case InterleaveMode::kMask: return "mask";
    case InterleaveMode::kTextEqualInterval: return "text_equal_interval";
  }
  return "text";
}

int sample_poisson(double lambda, Rng& rng) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("poisson: lambda must be finite and >= 0");
  const double limit = std::exp(-lambda);
  int k = 0;
  double prod = rng.uniform();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform();
  }
  return k;
}

WordAlignment equal_interval_alignment(std::size_t frames, const WordAlignment& words) {
  const std::size_t n = words.size();
  WordAlignment out;
  if (n == 0) return out;
  const std::size_t q = frames / n;
  if (q == 0) {
    throw std::invalid_argument("equal-interval alignment: " + std::to_string(frames) + " frames for " +
                                std::to_string(n) + " words");
  }
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = (i + 1 == n) ? frames - 1 : (i + 1) * q - 1;
    out.push_back(WordSpan{static_cast<int>(i * q), static_cast<int>(end), words[i].word});
  }
  return out;
}

InterleavedSequence interleave(const UnitSequence& units, const WordAlignment& align, const InterleaveConfig& cfg,
                               const JointVocab& vocab, const BpeModel& bpe, Rng& rng) {
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw std::invalid_argument("interleave: p must be in [0, 1]");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("interleave: lambda must be >= 0");
  if (units.units.empty() && !align.empty()) throw std::invalid_argument("interleave: alignment given for empty units");

  const WordAlignment spans =
      cfg.mode == InterleaveMode::kTextEqualInterval ? equal_interval_alignment(units.size(), align) : align;
  validate_alignment(spans, units.size());

  const int n = static_cast<int>(spans.size());
  InterleavedSequence out;
  out.n_words = n;

  // Remaining word indices, kept sorted; `open[i]` mirrors membership.
  std::vector<int> remaining(n);
  for (int i = 0; i < n; ++i) remaining[i] = i;
  std::vector<char> open(n, 1);

  const double target = cfg.p * n - 1e-9;
  while (out.replaced_words < target) {
    const int j = remaining[rng.below(remaining.size())];
    const int l = sample_poisson(cfg.lambda, rng);
    int last = std::min(j + l, n - 1);
    for (int i = j + 1; i <= last; ++i) {
      if (!open[i]) {
        last = i - 1;
        break;
      }
    }
    for (int i = j; i <= last; ++i) open[i] = 0;
    std::erase_if(remaining, [&](int i) { return !open[i]; });
    out.replaced_spans.emplace_back(j, last);
    out.replaced_words += last - j + 1;
  }

  std::vector<std::pair<int, int>> ordered = out.replaced_spans;
  std::sort(ordered.begin(), ordered.end());

  out.tokens.reserve(units.size());
  std::size_t frame = 0;
  auto emit_units = [&](std::size_t until) {
    for (; frame < until; ++frame) out.tokens.push_back(vocab.unit_id(units.units[frame]));
  };
  for (const auto& [first, last] : ordered) {
    emit_units(static_cast<std::size_t>(spans[first].start));
    if (cfg.mode == InterleaveMode::kMask) {
      out.tokens.push_back(vocab.special(Special::kMask));
    } else {
      std::vector<std::string> words;
      for (int i = first; i <= last; ++i) words.push_back(spans[i].word);
      for (TokenId id : bpe.encode(join_words(words))) out.tokens.push_back(vocab.text_id(id));
    }
    frame = static_cast<std::size_t>(spans[last].end) + 1;
  }
  emit_units(units.size());
  return out;
}

double realized_text_fraction(const InterleavedSequence& seq) {
  if (seq.n_words == 0) return 0.0;
  return static_cast<double>(seq.replaced_words) / seq.n_words;
}

double schedule_text_ratio(long step, double p0, double delta, long interval) {
  if (step < 0) throw std::invalid_argument("schedule: step must be >= 0");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("schedule: p0 must be in [0, 1]");
  if (!(delta > 0.0)) throw std::invalid_argument("schedule: delta must be > 0");
  if (interval < 1) throw std::invalid_argument("schedule: interval must be >= 1");
  const double p = p0 - delta * static_cast<double>(step / interval);
  if (p <= 0.0) return 0.0;
  return std::round(p * 1e9) / 1e9;
}

double constant_text_ratio(long /*step*/) { return kConstantTextRatio; }

}  // namespace ilt
