#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ilt/matrix.hpp"

namespace ilt {

struct Codebook {
  int k = 0;
  int dim = 0;
  Matrix centroids;  // k x dim
  double inertia = 0.0;
  /// Inertia after each Lloyd iteration (assignment + update).
  std::vector<double> inertia_trace;

  [[nodiscard]] std::string to_json() const;
  static Codebook from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static Codebook load(const std::filesystem::path& path);
};

/// Discrete unit ids for one utterance. Consecutive repeats are kept.
struct UnitSequence {
  std::vector<int> units;
  double frame_rate = 50.0;

  [[nodiscard]] std::size_t size() const { return units.size(); }
  bool operator==(const UnitSequence&) const = default;
};

struct KMeansOptions {
  int k = 64;
  int max_iters = 100;
  std::uint64_t seed = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded to
/// the point currently farthest from its centroid. Throws if inertia ever
/// increases between iterations.
Codebook kmeans_fit(const Matrix& features, const KMeansOptions& opts);

/// Nearest centroid per row (squared Euclidean, ties to the lowest index).
/// Output length always equals features.rows.
UnitSequence quantize(const Codebook& codebook, const Matrix& features);

}  // namespace ilt
