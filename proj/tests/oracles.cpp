#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ilt::oracle {

CtcBruteForce ctc_brute_force(const FramePosteriors& posteriors, std::span<const int> reference, int blank_id) {
  const std::size_t T = posteriors.frames();
  const std::size_t K = posteriors.labels();
  CtcBruteForce out{-std::numeric_limits<double>::infinity(), {}, false};

  std::vector<int> labels(T, 0);
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) total *= K;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t t = 0; t < T; ++t) {
      labels[t] = static_cast<int>(c % K);
      c /= K;
    }
    // Collapse: drop repeats, then blanks; remember which output index each frame emits.
    std::vector<int> collapsed;
    std::vector<int> emits(T, -1);
    int prev = -1;
    for (std::size_t t = 0; t < T; ++t) {
      const int l = labels[t];
      if (l != blank_id) {
        if (l != prev) collapsed.push_back(l);
        emits[t] = static_cast<int>(collapsed.size()) - 1;
      }
      prev = l;
    }
    if (!std::equal(collapsed.begin(), collapsed.end(), reference.begin(), reference.end())) continue;
    out.feasible = true;
    double score = 0.0;
    for (std::size_t t = 0; t < T; ++t) score += posteriors.log_probs(t, static_cast<std::size_t>(labels[t]));
    std::vector<TokenSpan> spans(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) spans[i] = TokenSpan{reference[i], -1, -1};
    for (std::size_t t = 0; t < T; ++t) {
      if (emits[t] < 0) continue;
      auto& s = spans[static_cast<std::size_t>(emits[t])];
      if (s.start < 0) s.start = static_cast<int>(t);
      s.end = static_cast<int>(t);
    }
    if (score > out.best_log_prob + 1e-12) {
      out.best_log_prob = score;
      out.best_spans.clear();
      out.best_spans.push_back(std::move(spans));
    } else if (std::abs(score - out.best_log_prob) <= 1e-12) {
      out.best_spans.push_back(std::move(spans));
    }
  }
  return out;
}

std::vector<double> finite_difference_grads(Model model, std::span<const TokenId> tokens,
                                            std::span<const unsigned char> mask, double step, bool train_mode,
                                            std::uint64_t dropout_seed) {
  auto loss_at = [&](const Model& m) {
    Rng rng(dropout_seed);
    return loss_and_grads(m, tokens, mask, train_mode, train_mode ? &rng : nullptr, false).loss;
  };
  std::vector<double> grads(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const double orig = model.params[i];
    model.params[i] = orig + step;
    const double plus = loss_at(model);
    model.params[i] = orig - step;
    const double minus = loss_at(model);
    model.params[i] = orig;
    grads[i] = (plus - minus) / (2.0 * step);
  }
  return grads;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

FramePosteriors random_posteriors(std::size_t frames, std::size_t labels, Rng& rng) {
  FramePosteriors p;
  p.log_probs = Matrix(frames, labels);
  for (std::size_t t = 0; t < frames; ++t) {
    double sum = 0.0;
    std::vector<double> w(labels);
    for (auto& v : w) {
      v = std::exp(3.0 * rng.normal());
      sum += v;
    }
    for (std::size_t k = 0; k < labels; ++k) p.log_probs(t, k) = std::log(w[k] / sum);
  }
  return p;
}

}  // namespace ilt::oracle
