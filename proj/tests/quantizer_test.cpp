#include <gtest/gtest.h>

#include <cmath>

#include "ilt/quantizer.hpp"
#include "ilt/rng.hpp"

namespace ilt {
namespace {

Matrix random_features(std::size_t n, std::size_t dim, Rng& rng) {
  Matrix m(n, dim);
  for (auto& v : m.data) v = rng.normal() * 2.0 + rng.uniform();
  return m;
}

TEST(KMeans, SingleClusterIsColumnMean) {
  Rng rng(3);
  const auto x = random_features(57, 5, rng);
  const auto cb = kmeans_fit(x, {.k = 1, .max_iters = 10, .seed = 1});
  for (std::size_t d = 0; d < 5; ++d) {
    long double mean = 0;
    for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, d);
    mean /= x.rows;
    EXPECT_NEAR(cb.centroids(0, d), static_cast<double>(mean), 1e-12);
  }
}

TEST(KMeans, RecoversTwoTightClusters) {
  Rng rng(5);
  Matrix x(40, 2);
  for (std::size_t i = 0; i < 40; ++i) {
    const double base = i < 20 ? 0.0 : 10.0;
    x(i, 0) = base + 0.01 * (2 * rng.uniform() - 1);
    x(i, 1) = base + 0.01 * (2 * rng.uniform() - 1);
  }
  // Brute-force cluster means of the generated points.
  double m0[2] = {0, 0}, m1[2] = {0, 0};
  for (std::size_t i = 0; i < 40; ++i) {
    double* m = i < 20 ? m0 : m1;
    m[0] += x(i, 0) / 20;
    m[1] += x(i, 1) / 20;
  }
  const auto cb = kmeans_fit(x, {.k = 2, .max_iters = 50, .seed = 9});
  const int lo = cb.centroids(0, 0) < 5 ? 0 : 1;
  EXPECT_NEAR(cb.centroids(lo, 0), m0[0], 1e-9);
  EXPECT_NEAR(cb.centroids(lo, 1), m0[1], 1e-9);
  EXPECT_NEAR(cb.centroids(1 - lo, 0), m1[0], 1e-9);
  EXPECT_NEAR(cb.centroids(1 - lo, 1), m1[1], 1e-9);
  EXPECT_NEAR(cb.centroids(lo, 0), 0.0, 0.05);
  EXPECT_NEAR(cb.centroids(1 - lo, 1), 10.0, 0.05);
}

TEST(KMeans, RejectsBadInput) {
  Matrix small(3, 2, 1.0);
  EXPECT_THROW(kmeans_fit(small, {.k = 5}), std::invalid_argument);
  Matrix bad(10, 2, 0.0);
  bad(4, 1) = std::nan("");
  EXPECT_THROW(kmeans_fit(bad, {.k = 2}), std::invalid_argument);
}

TEST(KMeans, InertiaNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto x = random_features(300, 4, rng);
    const auto cb = kmeans_fit(x, {.k = 12, .max_iters = 100, .seed = seed});
    for (std::size_t i = 1; i < cb.inertia_trace.size(); ++i) {
      EXPECT_LE(cb.inertia_trace[i], cb.inertia_trace[i - 1]) << "seed " << seed << " iter " << i;
    }
  }
}

TEST(KMeans, DuplicatePointsStillFit) {
  Matrix x(6, 1, 2.0);
  x(5, 0) = 3.0;
  const auto cb = kmeans_fit(x, {.k = 3, .max_iters = 20, .seed = 0});
  for (double v : cb.centroids.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(KMeans, DeterministicForSeed) {
  Rng rng(8);
  const auto x = random_features(200, 3, rng);
  const auto a = kmeans_fit(x, {.k = 7, .max_iters = 30, .seed = 4});
  const auto b = kmeans_fit(x, {.k = 7, .max_iters = 30, .seed = 4});
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Quantize, NearestCentroidWithoutDedup) {
  Codebook cb;
  cb.k = 4;
  cb.dim = 2;
  cb.centroids = Matrix(4, 2);
  for (int c = 0; c < 4; ++c) {
    cb.centroids(c, 0) = c;
    cb.centroids(c, 1) = -c;
  }
  Matrix rows(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    rows(i, 0) = 3;
    rows(i, 1) = -3;
  }
  const auto units = quantize(cb, rows);
  EXPECT_EQ(units.units, (std::vector<int>{3, 3, 3, 3, 3}));

  // Centroids quantize to themselves, in order.
  EXPECT_EQ(quantize(cb, cb.centroids).units, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(quantize(cb, Matrix(0, 2)).units.empty());
  EXPECT_THROW(quantize(cb, Matrix(1, 3)), std::invalid_argument);
}

TEST(Quantize, TiesGoToLowestIndex) {
  Codebook cb;
  cb.k = 2;
  cb.dim = 1;
  cb.centroids = Matrix(2, 1);
  cb.centroids(0, 0) = -1;
  cb.centroids(1, 0) = 1;
  EXPECT_EQ(quantize(cb, Matrix(1, 1, 0.0)).units, (std::vector<int>{0}));
}

TEST(Codebook, JsonRoundTripIsExact) {
  Rng rng(1);
  const auto x = random_features(50, 3, rng);
  const auto cb = kmeans_fit(x, {.k = 4, .max_iters = 10, .seed = 2});
  const auto back = Codebook::from_json(cb.to_json());
  EXPECT_EQ(back.centroids, cb.centroids);
  EXPECT_EQ(back.k, 4);
}

}  // namespace
}  // namespace ilt
