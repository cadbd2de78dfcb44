#pragma once

// Independent reference computations used by unit and acceptance tests.
// Nothing here calls the code paths it is used to check.

#include <span>
#include <vector>

#include "ilt/ctc_align.hpp"
#include "ilt/model.hpp"

namespace ilt::oracle {

struct CtcBruteForce {
  double best_log_prob;
  /// Token spans of every labeling that attains best_log_prob (within 1e-12).
  std::vector<std::vector<TokenSpan>> best_spans;
  bool feasible;
};

/// Enumerates all (labels)^frames frame labelings, keeps the ones that
/// collapse to `reference`, and returns the best-scoring ones.
CtcBruteForce ctc_brute_force(const FramePosteriors& posteriors, std::span<const int> reference, int blank_id);

/// Central finite differences of the masked mean loss w.r.t. every
/// parameter. Dropout is replayed from `dropout_seed` when train_mode.
std::vector<double> finite_difference_grads(Model model, std::span<const TokenId> tokens,
                                            std::span<const unsigned char> mask, double step, bool train_mode,
                                            std::uint64_t dropout_seed);

/// Max elementwise |a - n| / max(|a|, |n|, floor).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor);

/// Random log-posterior matrix with normalized rows.
FramePosteriors random_posteriors(std::size_t frames, std::size_t labels, Rng& rng);

}  // namespace ilt::oracle
