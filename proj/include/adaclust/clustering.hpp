#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adaclust/error.hpp"
#include "adaclust/hash.hpp"
#include "adaclust/matrix.hpp"
#include "adaclust/rng.hpp"

namespace adaclust {

struct Centroids {
  Matrix psi;  // K x p
  std::size_t iteration_count = 0;
  /// Mean unsquared distance to the nearest centroid on the fitted data.
  double final_cost = 0.0;
  /// Lloyd objective (sum of squared distances) after seeding and after each iteration.
  std::vector<double> sse_history;
  /// FNV-1a of the points the centroids were fitted on; 0 when not fitted.
  std::uint64_t source_fingerprint = 0;

  std::size_t K() const noexcept { return psi.rows(); }
  std::size_t dim() const noexcept { return psi.cols(); }
};

struct Assignment {
  std::vector<int> cluster_of;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double rel_tol = 1e-6;
  /// Independent seeded runs; the one with the lowest Lloyd objective is kept.
  std::size_t n_init = 10;
};

struct KMeansResult {
  Centroids centroids;
  Assignment assignment;
};

struct NearestCentroid {
  std::size_t index = 0;
  double distance = 0.0;
};

inline std::uint64_t fingerprint(const Matrix& points) {
  Fnv1a h;
  const std::uint64_t shape[2] = {points.rows(), points.cols()};
  h.update(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(shape), sizeof shape));
  h.update(points.data());
  return h.digest();
}

namespace detail {

/// Index of the nearest row of `centroids` by squared distance; ties go to
/// the smallest index.
inline std::pair<std::size_t, double> nearest_squared(std::span<const double> x, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows(); ++k) {
    const double d2 = squared_distance(x, centroids.row(k));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return {best, best_d2};
}

inline double assign_all(const Matrix& points, const Matrix& centroids, std::vector<int>& cluster_of) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto [k, d2] = nearest_squared(points.row(i), centroids);
    cluster_of[i] = static_cast<int>(k);
    sse += d2;
  }
  return sse;
}

}  // namespace detail

inline NearestCentroid nearest_centroid(std::span<const double> x, const Matrix& centroids) {
  detail::require(centroids.rows() >= 1, ErrorCode::invalid_argument, "nearest_centroid: no centroids");
  detail::require(x.size() == centroids.cols(), ErrorCode::dimension_mismatch,
                  "nearest_centroid: point has dimension " + std::to_string(x.size()) + ", centroids have " +
                      std::to_string(centroids.cols()));
  const auto [k, d2] = detail::nearest_squared(x, centroids);
  return {k, std::sqrt(d2)};
}

/// (1/M) * sum_x min_k ||x - psi_k||_2. Unsquared.
inline double empirical_cost(const Matrix& points, const Matrix& centroids) {
  detail::require(points.rows() >= 1, ErrorCode::invalid_argument, "empirical_cost: no points");
  detail::require(points.cols() == centroids.cols(), ErrorCode::dimension_mismatch,
                  "empirical_cost: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) total += nearest_centroid(points.row(i), centroids).distance;
  return total / static_cast<double>(points.rows());
}

/// k-means++ seeding: first seed uniform, then D^2 sampling.
inline Matrix kmeanspp_seed(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t m = points.rows();
  detail::require(k >= 1, ErrorCode::invalid_argument, "K must be positive");
  detail::require(m >= k, ErrorCode::fewer_points_than_clusters, "fewer points than clusters");
  Rng rng(split_seed(seed, 0x6b6d7070));  // "kmpp"
  Matrix seeds(k, points.cols());
  std::vector<bool> chosen(m, false);
  std::vector<double> d2(m, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.below(m);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double cumulative = 0.0;
        pick = m;
        std::size_t last_positive = m;
        for (std::size_t i = 0; i < m; ++i) {
          if (d2[i] <= 0.0) continue;
          last_positive = i;
          cumulative += d2[i];
          if (cumulative > target) {
            pick = i;
            break;
          }
        }
        if (pick == m) pick = last_positive;
      } else {
        // All remaining mass sits on chosen locations (duplicates).
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    auto src = points.row(pick);
    std::copy(src.begin(), src.end(), seeds.row(c).begin());
    for (std::size_t i = 0; i < m; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), seeds.row(c)));
  }
  return seeds;
}

namespace detail {

/// One Lloyd run from k-means++ seeds. Empty clusters are re-seeded at the
/// point farthest from its current centroid so K stays fixed.
inline KMeansResult lloyd_run(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  Matrix centroids = kmeanspp_seed(points, k, seed);
  const std::size_t m = points.rows(), p = points.cols();
  std::vector<int> cluster_of(m);
  double sse = detail::assign_all(points, centroids, cluster_of);

  KMeansResult result;
  result.centroids.sse_history.push_back(sse);
  std::size_t iterations = 0;
  while (iterations < options.max_iters && sse > 0.0) {
    Matrix next(k, p);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = static_cast<std::size_t>(cluster_of[i]);
      ++counts[c];
      auto row = points.row(i);
      auto dst = next.row(c);
      for (std::size_t j = 0; j < p; ++j) dst[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);

    std::vector<bool> used(m, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = m;
      double far_d2 = -1.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (used[i]) continue;
        const double d2 = squared_distance(points.row(i), next.row(static_cast<std::size_t>(cluster_of[i])));
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      used[far] = true;
      auto src = points.row(far);
      std::copy(src.begin(), src.end(), next.row(c).begin());
      cluster_of[far] = static_cast<int>(c);
      counts[c] = 1;
    }

    const double next_sse = detail::assign_all(points, next, cluster_of);
    ++iterations;
    if (next_sse > sse * (1.0 + 1e-12))
      throw std::logic_error("kmeans_fit: Lloyd objective increased from " + std::to_string(sse) + " to " +
                             std::to_string(next_sse));
    result.centroids.sse_history.push_back(next_sse);
    const double previous = sse;
    centroids = std::move(next);
    sse = next_sse;
    if ((previous - sse) / previous < options.rel_tol) break;
  }

  result.centroids.psi = std::move(centroids);
  result.centroids.iteration_count = iterations;
  result.assignment.cluster_of = std::move(cluster_of);
  return result;
}

}  // namespace detail

/// k-means++ with Lloyd iterations, repeated `n_init` times; the run with the
/// lowest sum of squared distances wins (ties keep the earlier run). Run 0 is
/// seeded with `seed` itself, run r with split_seed(seed, r).
inline KMeansResult kmeans_fit(const Matrix& points, std::size_t k, std::uint64_t seed, KMeansOptions options = {}) {
  detail::require(options.n_init >= 1, ErrorCode::invalid_argument, "n_init must be positive");
  KMeansResult best = detail::lloyd_run(points, k, seed, options);
  for (std::size_t r = 1; r < options.n_init; ++r) {
    KMeansResult run = detail::lloyd_run(points, k, split_seed(seed, r), options);
    if (run.centroids.sse_history.back() < best.centroids.sse_history.back()) best = std::move(run);
  }
  best.centroids.final_cost = empirical_cost(points, best.centroids.psi);
  best.centroids.source_fingerprint = fingerprint(points);
  return best;
}

/// Best of `restarts` single-run fits, ranked by the unsquared cost rather
/// than the Lloyd objective. `options.n_init` is ignored.
inline KMeansResult kmeans_best_of(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                                   KMeansOptions options = {}) {
  detail::require(restarts >= 1, ErrorCode::invalid_argument, "restarts must be positive");
  options.n_init = 1;
  KMeansResult best = kmeans_fit(points, k, split_seed(seed, 0), options);
  for (std::size_t r = 1; r < restarts; ++r) {
    KMeansResult candidate = kmeans_fit(points, k, split_seed(seed, r), options);
    if (candidate.centroids.final_cost < best.centroids.final_cost) best = std::move(candidate);
  }
  return best;
}

namespace detail {

inline double entropy_of_counts(const std::map<long long, std::size_t>& counts, double total) {
  std::vector<double> terms;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / total;
    terms.push_back(-p * std::log(p));
  }
  std::sort(terms.begin(), terms.end());
  double h = 0.0;
  for (double t : terms) h += t;
  return h;
}

}  // namespace detail

/// I(A;B) / sqrt(H(A) H(B)) with natural logs; 0 when either side has a
/// single block. Exactly symmetric in its arguments.
template <typename A, typename B>
double nmi(std::span<const A> a, std::span<const B> b) {
  detail::require(a.size() == b.size(), ErrorCode::dimension_mismatch, "nmi: partitions differ in length");
  detail::require(!a.empty(), ErrorCode::invalid_argument, "nmi: empty partitions");
  const double total = static_cast<double>(a.size());
  std::map<long long, std::size_t> ca, cb;
  std::map<std::pair<long long, long long>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = static_cast<long long>(a[i]);
    const auto y = static_cast<long long>(b[i]);
    ++ca[x];
    ++cb[y];
    ++joint[{x, y}];
  }
  const double ha = detail::entropy_of_counts(ca, total);
  const double hb = detail::entropy_of_counts(cb, total);
  if (ca.size() < 2 || cb.size() < 2 || ha <= 0.0 || hb <= 0.0) return 0.0;
  std::vector<double> terms;
  for (const auto& [cell, c] : joint) {
    const double pab = static_cast<double>(c) / total;
    const double pa = static_cast<double>(ca[cell.first]) / total;
    const double pb = static_cast<double>(cb[cell.second]) / total;
    terms.push_back(pab * std::log(pab / (pa * pb)));
  }
  std::sort(terms.begin(), terms.end());
  double mutual = 0.0;
  for (double t : terms) mutual += t;
  return std::clamp(mutual / std::sqrt(ha * hb), 0.0, 1.0);
}

template <typename A, typename B>
double nmi(const std::vector<A>& a, const std::vector<B>& b) {
  return nmi(std::span<const A>(a), std::span<const B>(b));
}

/// nmi(clusters, domains) / max(nmi(clusters, classes), 1e-12): how much more
/// the clusters align with domains than with classes.
template <typename C, typename D, typename Y>
double renormalized_nmi(std::span<const C> clusters, std::span<const D> domains, std::span<const Y> classes) {
  detail::require(clusters.size() == domains.size() && clusters.size() == classes.size(),
                  ErrorCode::dimension_mismatch, "renormalized_nmi: partitions differ in length");
  return nmi(clusters, domains) / std::max(nmi(clusters, classes), 1e-12);
}

}  // namespace adaclust
