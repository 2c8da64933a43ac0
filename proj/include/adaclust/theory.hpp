#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "adaclust/clustering.hpp"
#include "adaclust/datagen.hpp"
#include "adaclust/error.hpp"
#include "adaclust/matrix.hpp"
#include "adaclust/net.hpp"
#include "adaclust/rng.hpp"
#include "adaclust/spectral.hpp"

namespace adaclust::theory {

/// A two-level feature distribution: `sample(draw, n)` returns n feature
/// vectors from the domain addressed by `draw`. Pure in (draw, n).
template <typename S>
concept FeatureSource = requires(const S& s, std::uint64_t draw, std::size_t n) {
  { s.dim() } -> std::convertible_to<std::size_t>;
  { s.sample(draw, n) } -> std::same_as<Matrix>;
};

/// Pulls every row of `m` back into the unit ball.
inline void clip_to_unit_ball(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double r = norm(row);
    if (r > 1.0)
      for (double& v : row) v /= r;
  }
}

/// phi(x) = clip(scale * V_bar^T F_image(x)) for x drawn from the mother
/// distribution. Domains are addressed inside the theory draw range.
struct MotherFeatureSource {
  const MotherDistribution* mother;
  ExtractorWeights omega;
  SpectralBasis basis;
  double scale = 1.0;

  std::size_t dim() const { return basis.projected_dim(); }

  Matrix sample(std::uint64_t draw, std::size_t n) const {
    const DomainSpec spec = sample_domain(*mother, kTheoryDrawBase + (draw & ((1ULL << 40) - 1)));
    Matrix phi = project(extract_all(sample_points(*mother, spec, n).features, omega), basis);
    for (double& v : phi.data()) v *= scale;
    clip_to_unit_ball(phi);
    return phi;
  }
};

/// Fits the spectral basis and the unit-ball scale on a calibration sample
/// drawn from its own domain range.
inline MotherFeatureSource make_mother_source(const MotherDistribution& mother, const ExtractorWeights& omega,
                                              SpectralWindow window, std::size_t calibration_domains = 20,
                                              std::size_t per_domain = 100) {
  std::vector<std::uint64_t> draws(calibration_domains);
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = kTheoryDrawBase + (1ULL << 41) + i;
  const AggregatedDataset calib = aggregate_domains(mother, draws, per_domain);
  const Matrix features = extract_all(calib.features(), omega);
  MotherFeatureSource src{&mother, omega, covariance_eigenbasis(features, window), 1.0};
  const Matrix projected = project(features, src.basis);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < projected.rows(); ++i) max_norm = std::max(max_norm, norm(projected.row(i)));
  src.scale = max_norm > 0.0 ? 1.0 / max_norm : 1.0;
  return src;
}

namespace detail {

inline Vector random_unit_vector(std::size_t d, Rng& rng) {
  Vector v(d);
  double r = 0.0;
  while (r == 0.0) {
    for (double& x : v) x = rng.normal();
    r = norm(v);
  }
  for (double& x : v) x /= r;
  return v;
}

}  // namespace detail

/// Uniform points in the d-dimensional unit ball; every domain is the same.
struct UniformBallSource {
  std::size_t d = 2;
  std::uint64_t seed = 0;

  std::size_t dim() const { return d; }
  Matrix sample(std::uint64_t draw, std::size_t n) const {
    Rng rng(split_seed(seed, draw));
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector dir = detail::random_unit_vector(d, rng);
      const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
      for (std::size_t j = 0; j < d; ++j) out(i, j) = r * dir[j];
    }
    return out;
  }
};

/// Uniform points on a segment through the origin along a fixed random
/// direction of R^ambient (intrinsic dimension 1).
struct LineSource {
  std::size_t ambient = 16;
  double half_length = 1.0;
  std::uint64_t seed = 0;

  std::size_t dim() const { return ambient; }
  Matrix sample(std::uint64_t draw, std::size_t n) const {
    Rng dir_rng(split_seed(seed, ~0ULL));
    const Vector dir = detail::random_unit_vector(ambient, dir_rng);
    Rng rng(split_seed(seed, draw));
    Matrix out(n, ambient);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = rng.uniform(-half_length, half_length);
      for (std::size_t j = 0; j < ambient; ++j) out(i, j) = t * dir[j];
    }
    return out;
  }
};

/// Every point sits at one fixed location.
struct AtomSource {
  Vector location;

  std::size_t dim() const { return location.size(); }
  Matrix sample(std::uint64_t, std::size_t n) const {
    Matrix out(n, location.size());
    for (std::size_t i = 0; i < n; ++i) std::copy(location.begin(), location.end(), out.row(i).begin());
    return out;
  }
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Domain draws for Monte Carlo runs: draw i of a run seeded with `seed`.
inline std::uint64_t mc_draw(std::uint64_t seed, std::size_t i) { return split_seed(seed, i); }

template <FeatureSource S>
Matrix pooled_sample(const S& source, std::uint64_t seed, std::size_t num_domains, std::size_t per_domain) {
  Matrix pooled(0, 0);
  for (std::size_t i = 0; i < num_domains; ++i) {
    const Matrix m = source.sample(mc_draw(seed, i), per_domain);
    for (std::size_t r = 0; r < m.rows(); ++r) pooled.append_row(m.row(r));
  }
  return pooled;
}

/// Monte Carlo estimate of E_D E_x min_k ||phi(x) - psi_k||. The standard
/// error is computed from per-domain means, which accounts for the
/// two-level sampling.
template <FeatureSource S>
McEstimate expected_cost_mc(const S& source, const Matrix& psi, std::size_t num_domains, std::size_t per_domain,
                            std::uint64_t seed) {
  ::adaclust::detail::require(num_domains >= 2 && per_domain >= 1, ErrorCode::invalid_argument,
                              "expected_cost_mc: need at least two domains and one point each");
  Vector domain_means(num_domains);
  for (std::size_t i = 0; i < num_domains; ++i)
    domain_means[i] = empirical_cost(source.sample(mc_draw(seed, i), per_domain), psi);
  const double mean = std::accumulate(domain_means.begin(), domain_means.end(), 0.0) / static_cast<double>(num_domains);
  double var = 0.0;
  for (double m : domain_means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(num_domains - 1);
  return {mean, std::sqrt(var / static_cast<double>(num_domains)), num_domains * per_domain};
}

/// 2 sqrt(log(2N/delta)/n) + 2 sqrt(log(1/delta)/N).
inline double lemma1_bound(std::size_t n, std::size_t num_domains, double delta) {
  const double nn = static_cast<double>(n), big_n = static_cast<double>(num_domains);
  return 2.0 * std::sqrt(std::log(2.0 * big_n / delta) / nn) + 2.0 * std::sqrt(std::log(1.0 / delta) / big_n);
}

struct Lemma1Config {
  std::size_t n = 50;
  std::size_t num_domains = 50;
  double delta = 0.05;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  /// Exact expected cost when known; otherwise estimated by Monte Carlo.
  std::optional<double> expected_cost;
  std::size_t reference_domains = 2000;
  std::size_t reference_per_domain = 100;
};

struct Lemma1Report {
  double bound = 0.0;
  double expected_cost = 0.0;
  double expected_cost_std_error = 0.0;
  std::vector<double> gaps;
  double mean_gap = 0.0;
  double fraction_within = 0.0;
  /// 1 - delta - 2 sqrt(delta (1 - delta) / trials).
  double pass_threshold = 0.0;
  bool pass = false;
};

/// The evaluation sample of trial `trial`; exposed so callers can see
/// exactly which data a lemma check will touch.
template <FeatureSource S>
Matrix lemma1_trial_sample(const S& source, const Lemma1Config& config, std::size_t trial) {
  return pooled_sample(source, split_seed(config.seed, 1000 + trial), config.num_domains, config.n);
}

/// Checks |C(Psi) - C_hat(Psi)| <= bound over independent trials for fixed
/// centroids. The centroids must not have been fitted on any trial sample.
template <FeatureSource S>
Lemma1Report lemma1_check(const S& source, const Centroids& psi, const Lemma1Config& config) {
  using ::adaclust::detail::require;
  require(config.trials >= 50, ErrorCode::insufficient_trials, "insufficient trials");
  require(config.delta > 0.0 && config.delta < 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  require(config.n >= 1 && config.num_domains >= 1, ErrorCode::invalid_argument, "n and N must be positive");
  require(psi.dim() == source.dim(), ErrorCode::dimension_mismatch, "lemma1_check: centroid dimension mismatch");
  for (std::size_t k = 0; k < psi.K(); ++k)
    require(norm(psi.psi.row(k)) <= 1.0 + 1e-12, ErrorCode::invalid_argument,
            "lemma1_check: centroids must lie in the unit ball");

  Lemma1Report report;
  report.bound = lemma1_bound(config.n, config.num_domains, config.delta);
  if (config.expected_cost) {
    report.expected_cost = *config.expected_cost;
  } else {
    const McEstimate ref = expected_cost_mc(source, psi.psi, config.reference_domains, config.reference_per_domain,
                                            split_seed(config.seed, 1));
    report.expected_cost = ref.value;
    report.expected_cost_std_error = ref.std_error;
  }

  std::size_t within = 0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Matrix sample = lemma1_trial_sample(source, config, t);
    require(psi.source_fingerprint == 0 || psi.source_fingerprint != fingerprint(sample),
            ErrorCode::precondition_violation,
            "lemma1_check: centroids were fitted on evaluation sample of trial " + std::to_string(t));
    const double gap = std::abs(report.expected_cost - empirical_cost(sample, psi.psi));
    report.gaps.push_back(gap);
    if (gap <= report.bound) ++within;
  }
  const double trials = static_cast<double>(config.trials);
  report.mean_gap = std::accumulate(report.gaps.begin(), report.gaps.end(), 0.0) / trials;
  report.fraction_within = static_cast<double>(within) / trials;
  report.pass_threshold = 1.0 - config.delta - 2.0 * std::sqrt(config.delta * (1.0 - config.delta) / trials);
  report.pass = report.fraction_within >= report.pass_threshold;
  return report;
}

struct CoveringRow {
  std::size_t d = 0;
  std::size_t K = 0;
  double cost = 0.0;
  double bound = 0.0;  // 3 / K^(1/d)
  bool pass = false;
};

/// Multi-restart k-means cost of uniform unit-ball data against 3 / K^(1/d).
inline std::vector<CoveringRow> covering_check(std::size_t d, std::span<const std::size_t> ks, std::size_t num_points,
                                               std::uint64_t seed, std::size_t restarts = 20) {
  ::adaclust::detail::require(d >= 1, ErrorCode::invalid_argument, "covering_check: d must be positive");
  const Matrix points = UniformBallSource{d, seed}.sample(0, num_points);
  std::vector<CoveringRow> rows;
  for (std::size_t k : ks) {
    const KMeansResult fit = kmeans_best_of(points, k, split_seed(seed, k), restarts);
    const double bound = 3.0 / std::pow(static_cast<double>(k), 1.0 / static_cast<double>(d));
    rows.push_back({d, k, fit.centroids.final_cost, bound, fit.centroids.final_cost <= bound});
  }
  return rows;
}

struct DStarReport {
  double d_star = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the log-log fit.
  double residual = 0.0;
  std::vector<std::size_t> ks;
  std::vector<double> costs;
};

/// Fits log C(K) = a + s log K and returns d* = -1/s.
inline DStarReport fit_d_star(std::span<const std::size_t> ks, std::span<const double> costs) {
  using ::adaclust::detail::require;
  require(ks.size() >= 3 && ks.size() == costs.size(), ErrorCode::invalid_argument,
          "estimate_d_star: need at least three K values");
  DStarReport r;
  r.ks.assign(ks.begin(), ks.end());
  r.costs.assign(costs.begin(), costs.end());
  for (double c : costs)
    require(c > 0.0 && std::isfinite(c), ErrorCode::no_covering_decay, "no covering decay: zero clustering cost");
  const std::size_t m = ks.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += std::log(static_cast<double>(ks[i]));
    my += std::log(costs[i]);
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = std::log(static_cast<double>(ks[i])) - mx;
    sxy += dx * (std::log(costs[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, ErrorCode::invalid_argument, "estimate_d_star: K values must differ");
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  require(r.slope < 0.0, ErrorCode::no_covering_decay, "no covering decay: cost does not fall with K");
  r.d_star = -1.0 / r.slope;
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = std::log(costs[i]) - (r.intercept + r.slope * std::log(static_cast<double>(ks[i])));
    ss += e * e;
  }
  r.residual = std::sqrt(ss / static_cast<double>(m));
  return r;
}

template <FeatureSource S>
DStarReport estimate_d_star(const S& source, std::span<const std::size_t> ks, std::uint64_t seed,
                            std::size_t num_domains = 50, std::size_t per_domain = 100, std::size_t restarts = 10) {
  ::adaclust::detail::require(ks.size() >= 3, ErrorCode::invalid_argument,
                              "estimate_d_star: need at least three K values");
  const Matrix points = pooled_sample(source, seed, num_domains, per_domain);
  std::vector<double> costs;
  for (std::size_t k : ks) costs.push_back(kmeans_best_of(points, k, split_seed(seed, k), restarts).centroids.final_cost);
  return fit_d_star(ks, costs);
}

inline constexpr std::size_t kBadNeighborLimit = 2000;

/// Fraction of unordered pairs that share a block in exactly one of the two
/// partitions.
template <typename A, typename B>
double bad_neighbor_probability(std::span<const A> aggregated, std::span<const B> domain_wise) {
  using ::adaclust::detail::require;
  require(aggregated.size() == domain_wise.size(), ErrorCode::dimension_mismatch,
          "bad_neighbor_probability: partitions differ in length");
  const std::size_t m = aggregated.size();
  require(m >= 2, ErrorCode::invalid_argument, "bad_neighbor_probability: need at least two points");
  require(m <= kBadNeighborLimit, ErrorCode::invalid_argument,
          "bad_neighbor_probability: instance exceeds " + std::to_string(kBadNeighborLimit) + " points");
  std::map<long long, std::uint64_t> ca, cb;
  std::map<std::pair<long long, long long>, std::uint64_t> joint;
  for (std::size_t i = 0; i < m; ++i) {
    ++ca[static_cast<long long>(aggregated[i])];
    ++cb[static_cast<long long>(domain_wise[i])];
    ++joint[{static_cast<long long>(aggregated[i]), static_cast<long long>(domain_wise[i])}];
  }
  auto pairs = [](std::uint64_t c) { return c * (c - 1) / 2; };
  std::uint64_t same_a = 0, same_b = 0, same_both = 0;
  for (const auto& [k, c] : ca) same_a += pairs(c);
  for (const auto& [k, c] : cb) same_b += pairs(c);
  for (const auto& [k, c] : joint) same_both += pairs(c);
  const std::uint64_t total = pairs(m);
  return static_cast<double>(same_a + same_b - 2 * same_both) / static_cast<double>(total);
}

/// Instance form: aggregated cluster = nearest row of psi_star to phi(x);
/// domain-wise cluster = nearest row of psi_tilde_star to the domain's mean
/// embedding.
inline double bad_neighbor_probability(const Matrix& phi, std::span<const std::int64_t> domains,
                                       const Matrix& psi_star, const Matrix& psi_tilde_star) {
  ::adaclust::detail::require(phi.rows() == domains.size(), ErrorCode::dimension_mismatch,
                              "bad_neighbor_probability: points and domain ids differ in length");
  std::map<std::int64_t, Vector> sums;
  std::map<std::int64_t, std::size_t> counts;
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    auto& s = sums[domains[i]];
    s.resize(phi.cols(), 0.0);
    for (std::size_t j = 0; j < phi.cols(); ++j) s[j] += phi(i, j);
    ++counts[domains[i]];
  }
  std::map<std::int64_t, int> domain_cluster;
  for (auto& [id, s] : sums) {
    for (double& v : s) v /= static_cast<double>(counts[id]);
    domain_cluster[id] = static_cast<int>(nearest_centroid(s, psi_tilde_star).index);
  }
  std::vector<int> agg(phi.rows()), dom(phi.rows());
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    agg[i] = static_cast<int>(nearest_centroid(phi.row(i), psi_star).index);
    dom[i] = domain_cluster[domains[i]];
  }
  return bad_neighbor_probability(std::span<const int>(agg), std::span<const int>(dom));
}

/// sqrt(E ||phi(x)||^2), with a delta-method standard error.
template <FeatureSource S>
McEstimate sigma_p(const S& source, std::size_t mc_samples, std::uint64_t seed) {
  ::adaclust::detail::require(mc_samples >= 100, ErrorCode::invalid_argument, "sigma_p: need at least 100 samples");
  const std::size_t per_domain = 10;
  const std::size_t domains = (mc_samples + per_domain - 1) / per_domain;
  Vector domain_means(domains);
  for (std::size_t i = 0; i < domains; ++i) {
    const Matrix m = source.sample(mc_draw(seed, i), per_domain);
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += norm(m.row(r)) * norm(m.row(r));
    domain_means[i] = s / static_cast<double>(per_domain);
  }
  const double mean = std::accumulate(domain_means.begin(), domain_means.end(), 0.0) / static_cast<double>(domains);
  double var = 0.0;
  for (double v : domain_means) var += (v - mean) * (v - mean);
  var /= static_cast<double>(domains - 1);
  const double sigma = std::sqrt(mean);
  const double se_mean = std::sqrt(var / static_cast<double>(domains));
  return {sigma, sigma > 0.0 ? se_mean / (2.0 * sigma) : 0.0, domains * per_domain};
}

struct BoundInputs {
  std::size_t K = 1;
  std::size_t N = 1;
  std::size_t n = 1;
  double delta = 0.05;
  double d_star = 1.0;
  double constant_scale = 1.0;
};

/// Bound terms, up to the unknown constant C.
struct BoundTerms {
  double term_cover = 0.0;  // C K^(-1/d*)
  double term_n = 0.0;      // C sqrt(log(KN/delta) / n)
  double term_N = 0.0;      // C sqrt(log(nKN/delta) / N)
  double total = 0.0;
};

inline BoundTerms theorem1_terms(const BoundInputs& in) {
  using ::adaclust::detail::require;
  require(in.delta > 0.0 && in.delta < 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  require(in.K >= 1 && in.N >= 1 && in.n >= 1, ErrorCode::invalid_argument, "K, N and n must be positive");
  require(in.d_star >= 1.0, ErrorCode::invalid_argument, "d_star must be at least 1");
  require(in.constant_scale > 0.0, ErrorCode::invalid_argument, "constant_scale must be positive");
  const double k = static_cast<double>(in.K), big_n = static_cast<double>(in.N), n = static_cast<double>(in.n);
  BoundTerms t;
  t.term_cover = in.constant_scale * std::pow(k, -1.0 / in.d_star);
  t.term_n = in.constant_scale * std::sqrt(std::log(k * big_n / in.delta) / n);
  t.term_N = in.constant_scale * std::sqrt(std::log(n * k * big_n / in.delta) / big_n);
  t.total = t.term_cover + t.term_n + t.term_N;
  return t;
}

/// Estimated optimal centroids: aggregated (Psi*), domain-wise (Psi~*) and
/// on the training sample (Psi^*), each the best of `restarts` k-means fits.
struct CentroidTriple {
  Centroids psi_star;
  Centroids psi_tilde_star;
  Centroids psi_hat_star;
  std::size_t restarts = 0;
};

struct TripleConfig {
  std::size_t K = 4;
  std::size_t N = 50;
  std::size_t n = 50;
  std::size_t restarts = 20;
  std::size_t pooled_domains = 400;
  std::size_t pooled_per_domain = 50;
  std::size_t mean_domains = 400;
  std::size_t mean_per_domain = 100;
  std::uint64_t seed = 0;
};

template <FeatureSource S>
Matrix domain_mean_embeddings(const S& source, std::uint64_t seed, std::size_t num_domains, std::size_t per_domain) {
  Matrix means(num_domains, source.dim());
  for (std::size_t i = 0; i < num_domains; ++i) {
    const Matrix m = source.sample(mc_draw(seed, i), per_domain);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t j = 0; j < m.cols(); ++j) means(i, j) += m(r, j) / static_cast<double>(per_domain);
  }
  return means;
}

template <FeatureSource S>
CentroidTriple estimate_centroid_triple(const S& source, const TripleConfig& c) {
  CentroidTriple t;
  t.restarts = c.restarts;
  t.psi_star = kmeans_best_of(pooled_sample(source, split_seed(c.seed, 1), c.pooled_domains, c.pooled_per_domain), c.K,
                              split_seed(c.seed, 11), c.restarts)
                   .centroids;
  t.psi_tilde_star =
      kmeans_best_of(domain_mean_embeddings(source, split_seed(c.seed, 2), c.mean_domains, c.mean_per_domain), c.K,
                     split_seed(c.seed, 12), c.restarts)
          .centroids;
  t.psi_hat_star =
      kmeans_best_of(pooled_sample(source, split_seed(c.seed, 3), c.N, c.n), c.K, split_seed(c.seed, 13), c.restarts)
          .centroids;
  return t;
}

/// Largest centroid displacement under the best one-to-one matching
/// (exhaustive for K <= 7, greedy beyond).
inline double matched_max_distance(const Matrix& a, const Matrix& b) {
  ::adaclust::detail::require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::dimension_mismatch,
                              "matched_max_distance: centroid sets differ in shape");
  const std::size_t k = a.rows();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto cost = [&](const std::vector<std::size_t>& p) {
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, distance(a.row(i), b.row(p[i])));
    return worst;
  };
  if (k <= 7) {
    double best = std::numeric_limits<double>::infinity();
    do best = std::min(best, cost(perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> taken(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t pick = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
      if (!taken[j] && distance(a.row(i), b.row(j)) < best) {
        best = distance(a.row(i), b.row(j));
        pick = j;
      }
    taken[pick] = true;
    perm[i] = pick;
  }
  return cost(perm);
}

struct SamplingRateRow {
  std::size_t n = 0;
  std::size_t N = 0;
  double inv_sqrt_nN = 0.0;
  double discrepancy = 0.0;
};

/// How far the sample-optimal centroids sit from the aggregated optimum as
/// the training sample grows. Reported as a rate; there is no pass/fail.
template <FeatureSource S>
std::vector<SamplingRateRow> cluster_sampling_rate(const S& source, std::size_t k,
                                                   std::span<const std::pair<std::size_t, std::size_t>> grid,
                                                   std::uint64_t seed, std::size_t restarts = 20) {
  const Centroids reference =
      kmeans_best_of(pooled_sample(source, split_seed(seed, 1), 400, 50), k, split_seed(seed, 2), restarts).centroids;
  std::vector<SamplingRateRow> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto [n, big_n] = grid[g];
    const Centroids fit =
        kmeans_best_of(pooled_sample(source, split_seed(seed, 100 + g), big_n, n), k, split_seed(seed, 200 + g), restarts)
            .centroids;
    rows.push_back({n, big_n, 1.0 / std::sqrt(static_cast<double>(n * big_n)),
                    matched_max_distance(fit.psi, reference.psi)});
  }
  return rows;
}

struct BoundReport {
  BoundTerms terms;
  double d_star = 0.0;
  double sigma_p = 0.0;
  double p0 = 0.0;
};

}  // namespace adaclust::theory
