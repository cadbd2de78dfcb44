#include "ilt/quantizer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ilt/rng.hpp"
#include "json.hpp"

namespace ilt {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int nearest(const Matrix& centroids, std::span<const double> x, double* dist_out) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = sq_dist(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

Matrix plus_plus_init(const Matrix& x, int k, Rng& rng) {
  const std::size_t n = x.rows;
  Matrix c(k, x.cols);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (int j = 0; j < k; ++j) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
    if (j + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(x.row(i), c.row(j)));
      total += d2[i];
    }
    if (total <= 0.0) {
      // All points coincide with chosen centroids; duplicates are fine.
      pick = rng.below(n);
      continue;
    }
    double target = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return c;
}

}  // namespace

Codebook kmeans_fit(const Matrix& features, const KMeansOptions& opts) {
  const std::size_t n = features.rows;
  const std::size_t dim = features.cols;
  if (opts.k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (dim < 1) throw std::invalid_argument("kmeans: feature dimension must be >= 1");
  if (n < static_cast<std::size_t>(opts.k)) {
    throw std::invalid_argument("kmeans: " + std::to_string(n) + " points for k=" + std::to_string(opts.k));
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("kmeans: non-finite feature value");
  }

  Rng rng(opts.seed);
  Codebook cb;
  cb.k = opts.k;
  cb.dim = static_cast<int>(dim);
  cb.centroids = plus_plus_init(features, opts.k, rng);

  std::vector<int> assign(n, -1);
  std::vector<double> dist(n, 0.0);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int a = nearest(cb.centroids, features.row(i), &dist[i]);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<std::size_t> counts(opts.k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
    for (int c = 0; c < opts.k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      --counts[assign[far]];
      assign[far] = c;
      counts[c] = 1;
      dist[far] = 0.0;
      std::copy(features.row(far).begin(), features.row(far).end(), cb.centroids.row(c).begin());
    }

    Matrix sums(opts.k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(assign[i]);
      auto x = features.row(i);
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
    }
    for (int c = 0; c < opts.k; ++c) {
      // A donor cluster emptied by reseeding keeps its previous centroid.
      if (counts[c] == 0) continue;
      auto s = sums.row(c);
      auto out = cb.centroids.row(c);
      for (std::size_t d = 0; d < dim; ++d) out[d] = s[d] / static_cast<double>(counts[c]);
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(features.row(i), cb.centroids.row(assign[i]));
    if (!cb.inertia_trace.empty()) {
      const double prev = cb.inertia_trace.back();
      if (inertia > prev + 1e-9 * std::max(1.0, prev)) {
        throw std::logic_error("kmeans: inertia increased from " + std::to_string(prev) + " to " +
                               std::to_string(inertia));
      }
    }
    cb.inertia_trace.push_back(inertia);
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    nearest(cb.centroids, features.row(i), &d);
    inertia += d;
  }
  cb.inertia = inertia;
  return cb;
}

UnitSequence quantize(const Codebook& codebook, const Matrix& features) {
  UnitSequence out;
  if (features.rows == 0) return out;
  if (features.cols != static_cast<std::size_t>(codebook.dim)) {
    throw std::invalid_argument("quantize: feature dim " + std::to_string(features.cols) + " != codebook dim " +
                                std::to_string(codebook.dim));
  }
  out.units.reserve(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) out.units.push_back(nearest(codebook.centroids, features.row(i), nullptr));
  return out;
}

std::string Codebook::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["dim"] = dim;
  auto rows = nlohmann::json::array();
  for (int c = 0; c < k; ++c) {
    auto r = centroids.row(c);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["centroids"] = rows;
  j["inertia"] = inertia;
  return j.dump();
}

Codebook Codebook::from_json(std::string_view json) {
  const auto j = nlohmann::json::parse(json);
  Codebook cb;
  cb.k = j.at("k").get<int>();
  cb.dim = j.at("dim").get<int>();
  if (cb.k < 1 || cb.dim < 1) throw std::invalid_argument("codebook: k and dim must be >= 1");
  const auto& rows = j.at("centroids");
  if (rows.size() != static_cast<std::size_t>(cb.k)) throw std::invalid_argument("codebook: centroid count != k");
  cb.centroids = Matrix(cb.k, cb.dim);
  for (int c = 0; c < cb.k; ++c) {
    const auto r = rows[c].get<std::vector<double>>();
    if (r.size() != static_cast<std::size_t>(cb.dim)) throw std::invalid_argument("codebook: centroid width != dim");
    std::copy(r.begin(), r.end(), cb.centroids.row(c).begin());
  }
  cb.inertia = j.value("inertia", 0.0);
  return cb;
}

void Codebook::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json() << '\n';
}

Codebook Codebook::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace ilt
