#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "adaclust/error.hpp"
#include "adaclust/matrix.hpp"

namespace adaclust {

struct SymmetricEigen {
  Vector values;   // unsorted, in the order the solver leaves them
  Matrix vectors;  // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for a symmetric matrix. Deterministic: the
/// rotation order is fixed row-major over the strict upper triangle.
inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps = 100) {
  detail::require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "jacobi_eigen: matrix must be square");
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  const double total = frobenius_norm(a);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == 0.0 || std::sqrt(off) <= 1e-15 * total) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymmetricEigen out{Vector(n), std::move(v)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  return out;
}

struct SpectralWindow {
  std::size_t d_start = 0;
  std::size_t d_end = 0;

  std::size_t width() const noexcept { return d_end - d_start; }
};

/// Eigenbasis of the feature second-moment matrix plus the retained window
/// [d_start, d_end) of components.
struct SpectralBasis {
  Matrix eigenvectors;  // d x d, columns orthonormal, eigenvalue-descending
  Vector eigenvalues;   // descending, >= 0
  std::size_t d_start = 0;
  std::size_t d_end = 0;
  Matrix truncated;     // d x (d_end - d_start)

  std::size_t dim() const noexcept { return eigenvectors.rows(); }
  std::size_t projected_dim() const noexcept { return d_end - d_start; }

  friend bool operator==(const SpectralBasis&, const SpectralBasis&) = default;
};

inline void validate_window(SpectralWindow window, std::size_t d) {
  detail::require(window.d_start < window.d_end && window.d_end <= d, ErrorCode::invalid_argument,
                  "spectrum window [" + std::to_string(window.d_start) + ", " + std::to_string(window.d_end) +
                      ") is invalid for feature dimension " + std::to_string(d));
}

/// Assembles a basis from raw eigenpairs: clamps negative round-off, flips
/// each vector so its first non-negligible entry is positive, and sorts by
/// descending eigenvalue with ties broken by original column index.
inline SpectralBasis make_basis(const SymmetricEigen& eig, SpectralWindow window) {
  const std::size_t d = eig.values.size();
  validate_window(window, d);
  Matrix vectors = eig.vectors;
  Vector values = eig.values;
  for (double& s : values) s = std::max(s, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < d; ++r) {
      if (std::abs(vectors(r, c)) > 1e-12) {
        if (vectors(r, c) < 0.0)
          for (std::size_t k = 0; k < d; ++k) vectors(k, c) = -vectors(k, c);
        break;
      }
    }
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  SpectralBasis basis;
  basis.eigenvectors = Matrix(d, d);
  basis.eigenvalues.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    basis.eigenvalues[i] = values[order[i]];
    for (std::size_t r = 0; r < d; ++r) basis.eigenvectors(r, i) = vectors(r, order[i]);
  }
  basis.d_start = window.d_start;
  basis.d_end = window.d_end;
  basis.truncated = basis.eigenvectors.select_cols(window.d_start, window.d_end);
  return basis;
}

struct SpectralOptions {
  /// Subtract the column mean before forming the second-moment matrix.
  bool center = false;
};

/// (1/(M-1)) * Phi^T Phi, or the centered covariance when requested.
inline Matrix second_moment(const Matrix& features, SpectralOptions options = {}) {
  const std::size_t m = features.rows(), d = features.cols();
  Vector mean(d, 0.0);
  if (options.center) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += features(i, j);
    for (double& v : mean) v /= static_cast<double>(m);
  }
  Matrix cov(d, d);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = features.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = row[a] - mean[a];
      for (std::size_t b = a; b < d; ++b) cov(a, b) += xa * (row[b] - mean[b]);
    }
  }
  const double scale = 1.0 / static_cast<double>(m - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) *= scale;
      cov(b, a) = cov(a, b);
    }
  return cov;
}

inline SpectralBasis covariance_eigenbasis(const Matrix& features, SpectralWindow window, SpectralOptions options = {}) {
  detail::require(features.rows() >= 2, ErrorCode::insufficient_samples, "insufficient samples");
  detail::require(features.all_finite(), ErrorCode::non_finite, "covariance_eigenbasis: non-finite feature value");
  validate_window(window, features.cols());
  return make_basis(jacobi_eigen(second_moment(features, options)), window);
}

/// The identity basis over all d coordinates (used when spectral filtering is
/// switched off).
inline SpectralBasis identity_basis(std::size_t d) {
  return make_basis(SymmetricEigen{Vector(d, 0.0), Matrix::identity(d)}, {0, d});
}

inline Vector project_single(std::span<const double> feature, const SpectralBasis& basis) {
  detail::require(feature.size() == basis.dim(), ErrorCode::dimension_mismatch,
                  "project: feature has " + std::to_string(feature.size()) + " columns, basis expects " +
                      std::to_string(basis.dim()));
  const std::size_t p = basis.projected_dim();
  Vector out(p, 0.0);
  for (std::size_t k = 0; k < feature.size(); ++k) {
    const double x = feature[k];
    for (std::size_t j = 0; j < p; ++j) out[j] += x * basis.truncated(k, j);
  }
  return out;
}

/// Phi * V_bar, computed row by row with the same kernel as project_single.
inline Matrix project(const Matrix& features, const SpectralBasis& basis) {
  detail::require(features.cols() == basis.dim(), ErrorCode::dimension_mismatch,
                  "project: feature has " + std::to_string(features.cols()) + " columns, basis expects " +
                      std::to_string(basis.dim()));
  Matrix out(features.rows(), basis.projected_dim());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const Vector r = project_single(features.row(i), basis);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace adaclust
