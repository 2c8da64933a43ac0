#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "adaclust/clustering.hpp"
#include "adaclust/datagen.hpp"
#include "adaclust/lodo.hpp"
#include "adaclust/net.hpp"
#include "adaclust/spectral.hpp"

namespace adaclust {

struct ProbeConfig {
  std::vector<std::size_t> d_starts{0, 1, 2, 4, 8, 16};
  std::size_t width = 8;           // window is [d_start, d_start + width)
  double train_fraction = 0.8;     // per-domain split for the linear probes
  std::size_t probe_steps = 300;   // full-batch gradient steps
  double probe_learning_rate = 0.5;
  std::size_t clusters = 0;        // 0 means num_domains * num_classes
  bool center_spectrum = false;
  std::uint64_t seed = 0;
};

struct ProbeRow {
  std::size_t d_start = 0;
  std::size_t d_end = 0;
  double domain_acc = 0.0;
  double class_acc = 0.0;
  double nmi_domain = 0.0;
  double nmi_class = 0.0;
  double renorm_nmi = 0.0;
};

namespace detail {

/// Standardizes columns with statistics from `fit` and applies them to both.
inline void standardize(Matrix& fit, Matrix& other) {
  for (std::size_t c = 0; c < fit.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < fit.rows(); ++r) mean += fit(r, c);
    mean /= static_cast<double>(std::max<std::size_t>(fit.rows(), 1));
    double var = 0.0;
    for (std::size_t r = 0; r < fit.rows(); ++r) var += (fit(r, c) - mean) * (fit(r, c) - mean);
    var /= static_cast<double>(std::max<std::size_t>(fit.rows(), 1));
    const double scale = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t r = 0; r < fit.rows(); ++r) fit(r, c) = (fit(r, c) - mean) * scale;
    for (std::size_t r = 0; r < other.rows(); ++r) other(r, c) = (other(r, c) - mean) * scale;
  }
}

}  // namespace detail

/// Multinomial logistic regression by full-batch gradient descent on
/// standardized inputs; returns held-out accuracy.
inline double linear_probe_accuracy(Matrix train_x, std::span<const int> train_y, Matrix test_x,
                                    std::span<const int> test_y, int num_labels, std::size_t steps,
                                    double learning_rate) {
  detail::require(train_x.rows() == train_y.size() && test_x.rows() == test_y.size(), ErrorCode::dimension_mismatch,
                  "probe: label count differs from row count");
  detail::require(train_x.rows() > 0 && test_x.rows() > 0, ErrorCode::insufficient_samples, "probe: empty split");
  detail::require(num_labels >= 1, ErrorCode::invalid_argument, "probe: no labels");
  detail::standardize(train_x, test_x);
  const std::size_t p = train_x.cols();
  const auto L = static_cast<std::size_t>(num_labels);
  Matrix w(L, p);
  Vector b(L, 0.0);
  const double inv_m = 1.0 / static_cast<double>(train_x.rows());

  auto logits_of = [&](std::span<const double> x) {
    Vector z(b);
    for (std::size_t k = 0; k < L; ++k)
      for (std::size_t j = 0; j < p; ++j) z[k] += w(k, j) * x[j];
    return z;
  };

  for (std::size_t step = 0; step < steps; ++step) {
    Matrix gw(L, p);
    Vector gb(L, 0.0);
    for (std::size_t i = 0; i < train_x.rows(); ++i) {
      Vector z = logits_of(train_x.row(i));
      const double zmax = *std::max_element(z.begin(), z.end());
      double denom = 0.0;
      for (double& v : z) denom += (v = std::exp(v - zmax));
      for (std::size_t k = 0; k < L; ++k) {
        const double g = (z[k] / denom - (static_cast<int>(k) == train_y[i] ? 1.0 : 0.0)) * inv_m;
        gb[k] += g;
        for (std::size_t j = 0; j < p; ++j) gw(k, j) += g * train_x(i, j);
      }
    }
    for (std::size_t k = 0; k < L; ++k) {
      b[k] -= learning_rate * gb[k];
      for (std::size_t j = 0; j < p; ++j) w(k, j) -= learning_rate * gw(k, j);
    }
  }

  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_x.rows(); ++i)
    if (argmax(logits_of(test_x.row(i))) == test_y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test_x.rows());
}

/// Class and domain predictability of sliding spectral windows of the
/// extractor's features, plus cluster/domain alignment per window.
inline std::vector<ProbeRow> run_probe(const AggregatedDataset& data, const ExtractorWeights& omega,
                                       const ProbeConfig& config) {
  detail::require(data.has_hidden_domains(), ErrorCode::precondition_violation,
                  "probe: dataset lacks hidden domain labels");
  detail::require(!config.d_starts.empty(), ErrorCode::invalid_argument, "probe: no windows");
  detail::require(config.width >= 1, ErrorCode::invalid_argument, "probe: window width must be positive");

  const auto domains = data.evaluator_domains();
  std::map<std::int64_t, int> dense;
  for (std::int64_t id : domains) dense.emplace(id, 0);
  int num_domains = 0;
  for (auto& [id, index] : dense) index = num_domains++;
  std::vector<int> domain_labels;
  domain_labels.reserve(domains.size());
  for (std::int64_t id : domains) domain_labels.push_back(dense.at(id));
  const auto labels = data.labels();

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto [fit_rows, eval_rows] = split_per_domain(domains, all, config.train_fraction, split_seed(config.seed, 1));

  const Matrix features = extract_all(data.features(), omega);
  const std::size_t k = config.clusters > 0 ? config.clusters
                                            : static_cast<std::size_t>(num_domains) *
                                                  static_cast<std::size_t>(data.num_classes());

  auto pick = [](auto source, std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(static_cast<int>(source[r]));
    return out;
  };
  const std::vector<int> class_fit = pick(labels, fit_rows), class_eval = pick(labels, eval_rows);
  const std::vector<int> domain_fit = pick(domain_labels, fit_rows), domain_eval = pick(domain_labels, eval_rows);

  std::vector<ProbeRow> rows;
  for (std::size_t w = 0; w < config.d_starts.size(); ++w) {
    ProbeRow row;
    row.d_start = config.d_starts[w];
    row.d_end = row.d_start + config.width;
    const SpectralBasis basis =
        covariance_eigenbasis(features, {row.d_start, row.d_end}, {config.center_spectrum});
    const Matrix projected = project(features, basis);
    const Matrix fit_x = projected.select_rows(fit_rows), eval_x = projected.select_rows(eval_rows);

    row.class_acc = linear_probe_accuracy(fit_x, class_fit, eval_x, class_eval, data.num_classes(),
                                          config.probe_steps, config.probe_learning_rate);
    row.domain_acc = linear_probe_accuracy(fit_x, domain_fit, eval_x, domain_eval, num_domains, config.probe_steps,
                                           config.probe_learning_rate);

    const KMeansResult km = kmeans_fit(projected, k, split_seed(config.seed, 10 + w));
    const std::span<const int> clusters(km.assignment.cluster_of);
    row.nmi_domain = nmi(clusters, std::span<const int>(domain_labels));
    row.nmi_class = nmi(clusters, labels);
    row.renorm_nmi = renormalized_nmi(clusters, std::span<const int>(domain_labels), labels);
    rows.push_back(row);
  }
  return rows;
}

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), ErrorCode::dimension_mismatch, "spearman: length mismatch");
  detail::require(x.size() >= 2, ErrorCode::insufficient_samples, "spearman: need at least two pairs");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace adaclust
