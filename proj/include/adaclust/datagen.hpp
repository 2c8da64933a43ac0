#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "adaclust/error.hpp"
#include "adaclust/matrix.hpp"
#include "adaclust/rng.hpp"

namespace adaclust {

// Stream tags under the mother seed. Changing any of these changes every
// generated dataset.
namespace streams {
inline constexpr std::uint64_t prototypes = 1;
inline constexpr std::uint64_t domains = 2;
inline constexpr std::uint64_t points = 3;
inline constexpr std::uint64_t shift_basis = 4;
}  // namespace streams

/// Draw-index ranges. Training domains use [0, N); held-out test domains,
/// pretraining domains and theory Monte Carlo domains live in disjoint ranges.
inline constexpr std::uint64_t kTestDrawBase = 1ULL << 40;
inline constexpr std::uint64_t kPretrainDrawBase = 1ULL << 41;
inline constexpr std::uint64_t kTheoryDrawBase = 1ULL << 42;

struct DomainSpec {
  std::uint64_t domain_id = 0;
  double theta = 0.0;
  Vector shift;
  double noise_scale = 0.0;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct MotherConfig {
  int num_classes = 4;
  int d_raw = 16;
  double theta_lo = 0.0;
  double theta_hi = 2.0 * std::numbers::pi;
  double shift_scale = 0.5;
  double noise_scale = 0.15;
  double prototype_scale = 1.0;
  /// Number of coordinate planes (0,1), (2,3), ... rotated by a domain's theta.
  int rotated_planes = 1;
  /// Shifts live in a random subspace of this rank; 0 means all of R^d_raw.
  int shift_rank = 0;
  std::uint64_t seed = 0;
};

/// The distribution over domains. Prototypes are drawn once from the seed;
/// everything else is sampled lazily as a pure function of (seed, draw index).
struct MotherDistribution {
  MotherConfig config;
  Matrix class_prototypes;  // num_classes x d_raw
  Matrix shift_basis;       // shift_rank x d_raw, orthonormal rows; empty when full rank

  int num_classes() const noexcept { return config.num_classes; }
  int d_raw() const noexcept { return config.d_raw; }
  std::uint64_t seed() const noexcept { return config.seed; }
};

inline void validate(const MotherConfig& c) {
  using detail::require;
  require(c.num_classes >= 1, ErrorCode::invalid_argument, "num_classes must be positive");
  require(c.d_raw >= 1, ErrorCode::invalid_argument, "d_raw must be positive");
  require(c.theta_lo <= c.theta_hi && c.theta_hi - c.theta_lo <= 2.0 * std::numbers::pi,
          ErrorCode::invalid_argument, "theta range must be an interval of width at most 2*pi");
  require(c.shift_scale >= 0.0, ErrorCode::invalid_argument, "shift_scale must be nonnegative");
  require(c.noise_scale >= 0.0, ErrorCode::invalid_argument, "noise_scale must be nonnegative");
  require(c.prototype_scale > 0.0, ErrorCode::invalid_argument, "prototype_scale must be positive");
  require(c.rotated_planes >= 0 && 2 * c.rotated_planes <= c.d_raw, ErrorCode::invalid_argument,
          "rotated_planes exceeds d_raw / 2");
  require(c.shift_rank >= 0 && c.shift_rank <= c.d_raw, ErrorCode::invalid_argument, "shift_rank exceeds d_raw");
}

inline MotherDistribution make_mother(const MotherConfig& config) {
  validate(config);
  MotherDistribution mother{config, Matrix(config.num_classes, config.d_raw), Matrix()};
  Rng rng(split_seed(config.seed, streams::prototypes));
  for (double& v : mother.class_prototypes.data()) v = config.prototype_scale * rng.normal();
  if (config.shift_rank > 0) {
    // Gram-Schmidt on Gaussian rows.
    Rng basis_rng(split_seed(config.seed, streams::shift_basis));
    Matrix& u = mother.shift_basis;
    u = Matrix(config.shift_rank, config.d_raw);
    for (int r = 0; r < config.shift_rank; ++r) {
      auto row = u.row(r);
      double len = 0.0;
      while (len < 1e-6) {
        for (double& v : row) v = basis_rng.normal();
        for (int q = 0; q < r; ++q) {
          double dot = 0.0;
          for (int j = 0; j < config.d_raw; ++j) dot += row[j] * u(q, j);
          for (int j = 0; j < config.d_raw; ++j) row[j] -= dot * u(q, j);
        }
        len = norm(row);
      }
      for (double& v : row) v /= len;
    }
  }
  for (int a = 0; a < config.num_classes; ++a)
    for (int b = a + 1; b < config.num_classes; ++b)
      detail::require(squared_distance(mother.class_prototypes.row(a), mother.class_prototypes.row(b)) > 0.0,
                      ErrorCode::invalid_argument, "class prototypes must be pairwise distinct");
  return mother;
}

inline DomainSpec sample_domain(const MotherDistribution& mother, std::uint64_t draw_index) {
  const auto& c = mother.config;
  Rng rng(split_seed(split_seed(c.seed, streams::domains), draw_index));
  DomainSpec spec;
  spec.domain_id = draw_index;
  const double u = rng.uniform();
  spec.theta = c.theta_hi > c.theta_lo ? c.theta_lo + (c.theta_hi - c.theta_lo) * u : c.theta_lo;
  spec.theta = std::fmod(spec.theta, 2.0 * std::numbers::pi);
  if (spec.theta < 0.0) spec.theta += 2.0 * std::numbers::pi;
  spec.shift.assign(c.d_raw, 0.0);
  if (c.shift_rank == 0) {
    for (double& s : spec.shift) s = c.shift_scale * rng.normal();
  } else {
    for (int r = 0; r < c.shift_rank; ++r) {
      const double g = c.shift_scale * rng.normal();
      for (int j = 0; j < c.d_raw; ++j) spec.shift[j] += g * mother.shift_basis(r, j);
    }
  }
  spec.noise_scale = c.noise_scale;
  return spec;
}

/// Rotates the first `planes` coordinate pairs of x in place.
inline void rotate_planes(std::span<double> x, double theta, int planes) noexcept {
  const double cs = std::cos(theta), sn = std::sin(theta);
  for (int p = 0; p < planes; ++p) {
    const double a = x[2 * p], b = x[2 * p + 1];
    x[2 * p] = cs * a - sn * b;
    x[2 * p + 1] = sn * a + cs * b;
  }
}

/// Noise-free location of class `label` inside `domain`.
inline Vector domain_class_center(const MotherDistribution& mother, const DomainSpec& domain, int label) {
  auto proto = mother.class_prototypes.row(label);
  Vector x(proto.begin(), proto.end());
  rotate_planes(x, domain.theta, mother.config.rotated_planes);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += domain.shift[j];
  return x;
}

struct DomainSample {
  Matrix features;
  std::vector<int> labels;
};

/// n points of one domain; labels cycle 0, 1, ..., n_c-1 so classes are
/// balanced up to rounding.
inline DomainSample sample_points(const MotherDistribution& mother, const DomainSpec& domain, std::size_t n) {
  const int d = mother.d_raw();
  DomainSample out{Matrix(n, d), std::vector<int>(n)};
  Rng rng(split_seed(split_seed(mother.seed(), streams::points), domain.domain_id));
  std::vector<Vector> centers;
  for (int c = 0; c < mother.num_classes(); ++c) centers.push_back(domain_class_center(mother, domain, c));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(mother.num_classes()));
    out.labels[i] = label;
    auto row = out.features.row(i);
    for (int j = 0; j < d; ++j) row[j] = centers[label][j] + domain.noise_scale * rng.normal();
  }
  return out;
}

/// What a learner is allowed to see: features and labels, nothing else.
struct LearnerView {
  const Matrix& features;
  std::span<const int> labels;
  int num_classes;

  std::size_t size() const noexcept { return features.rows(); }
};

/// Pooled multi-domain sample. Domain ids are kept in a separate evaluator
/// channel; reading it trips an audit flag so tests can prove that training
/// never touched it.
class AggregatedDataset {
 public:
  AggregatedDataset(Matrix features, std::vector<int> labels, std::optional<std::vector<std::int64_t>> domains,
                    int num_classes)
      : features_(std::move(features)),
        labels_(std::move(labels)),
        domains_(std::move(domains)),
        num_classes_(num_classes) {
    detail::require(features_.rows() == labels_.size(), ErrorCode::dimension_mismatch,
                    "features and labels disagree on row count");
    detail::require(!domains_ || domains_->size() == labels_.size(), ErrorCode::dimension_mismatch,
                    "features and domains disagree on row count");
    for (int y : labels_)
      detail::require(y >= 0 && y < num_classes_, ErrorCode::invalid_argument, "label out of range");
    if (domains_) {
      std::set<std::int64_t> ids(domains_->begin(), domains_->end());
      num_domains_ = ids.size();
      points_per_domain_ = num_domains_ == 0 ? 0 : labels_.size() / num_domains_;
    }
  }

  AggregatedDataset(const AggregatedDataset& other)
      : features_(other.features_),
        labels_(other.labels_),
        domains_(other.domains_),
        num_classes_(other.num_classes_),
        num_domains_(other.num_domains_),
        points_per_domain_(other.points_per_domain_) {}
  AggregatedDataset& operator=(const AggregatedDataset&) = delete;

  LearnerView learner_view() const noexcept { return {features_, labels_, num_classes_}; }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t num_domains() const noexcept { return num_domains_; }
  std::size_t points_per_domain() const noexcept { return points_per_domain_; }
  const Matrix& features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }

  bool has_hidden_domains() const noexcept { return domains_.has_value(); }

  /// Evaluator-only. Sets the audit flag.
  std::span<const std::int64_t> evaluator_domains() const {
    detail::require(domains_.has_value(), ErrorCode::invalid_argument, "dataset carries no hidden domain ids");
    domains_read_.store(true);
    return *domains_;
  }

  bool domains_were_read() const noexcept { return domains_read_.load(); }
  void reset_audit() const noexcept { domains_read_.store(false); }

  AggregatedDataset subset(std::span<const std::size_t> rows) const {
    std::vector<int> y;
    std::optional<std::vector<std::int64_t>> dom;
    if (domains_) dom.emplace();
    for (std::size_t r : rows) {
      y.push_back(labels_[r]);
      if (domains_) dom->push_back((*domains_)[r]);
    }
    return AggregatedDataset(features_.select_rows(rows), std::move(y), std::move(dom), num_classes_);
  }

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::optional<std::vector<std::int64_t>> domains_;
  int num_classes_;
  std::size_t num_domains_ = 0;
  std::size_t points_per_domain_ = 0;
  mutable std::atomic<bool> domains_read_{false};
};

inline AggregatedDataset aggregate_domains(const MotherDistribution& mother, std::span<const std::uint64_t> draws,
                                           std::size_t n) {
  Matrix features(0, 0);
  std::vector<int> labels;
  std::vector<std::int64_t> domains;
  labels.reserve(draws.size() * n);
  for (std::uint64_t draw : draws) {
    const DomainSpec spec = sample_domain(mother, draw);
    DomainSample s = sample_points(mother, spec, n);
    for (std::size_t i = 0; i < n; ++i) {
      features.append_row(s.features.row(i));
      labels.push_back(s.labels[i]);
      domains.push_back(static_cast<std::int64_t>(draw));
    }
  }
  if (features.cols() == 0) features = Matrix(0, mother.d_raw());
  return AggregatedDataset(std::move(features), std::move(labels), std::move(domains), mother.num_classes());
}

/// N training domains (draw indices 0..N-1) with n points each, pooled.
inline AggregatedDataset sample_training_set(const MotherDistribution& mother, std::size_t num_domains,
                                             std::size_t per_domain) {
  detail::require(num_domains >= 1, ErrorCode::invalid_argument, "need at least one domain");
  detail::require(per_domain >= 1, ErrorCode::invalid_argument, "need at least one point per domain");
  std::vector<std::uint64_t> draws(num_domains);
  for (std::size_t i = 0; i < num_domains; ++i) draws[i] = i;
  return aggregate_domains(mother, draws, per_domain);
}

/// A fresh domain outside the training draw range. Labels are kept for scoring.
inline AggregatedDataset sample_test_domain(const MotherDistribution& mother, std::size_t n_test,
                                            std::uint64_t test_index = 0) {
  detail::require(n_test >= 1, ErrorCode::invalid_argument, "test domain needs at least one point");
  const std::uint64_t draw = kTestDrawBase + test_index;
  return aggregate_domains(mother, std::span<const std::uint64_t>(&draw, 1), n_test);
}

}  // namespace adaclust
