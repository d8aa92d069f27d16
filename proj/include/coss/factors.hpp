#pragma once

// Latent factor extraction from the response matrix and BIC-type rank
// selection. Nothing here looks at the (possibly corrupted) design.

#include "coss/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace coss {

/// Which sign each eigenvector is given. The entry of largest magnitude is
/// made positive by default; the alternative exists so tests can check that
/// the fitted coefficients do not depend on the choice.
enum class SignConvention { LargestPositive, LargestNegative };

struct FactorOptions {
  double mu_tol = 1e-4;
  /// 0 means min(n, q).
  std::size_t k_max = 0;
  SignConvention sign = SignConvention::LargestPositive;
};

struct LatentFactorSet {
  /// n x K, column k is Z_k with ||Z_k||_2 = sqrt(n).
  Matrix factors;
  /// Descending, all > mu_tol.
  std::vector<double> eigenvalues;
  std::size_t n = 0;
  std::size_t q = 0;
  /// Adjacent retained eigenvalues equal to relative 1e-12.
  bool has_ties = false;

  std::size_t size() const { return eigenvalues.size(); }
  Eigen::Ref<const Vector> factor(std::size_t k) const {
    return factors.col(static_cast<Eigen::Index>(k));
  }
};

struct RankSelection {
  std::size_t r_hat = 0;
  /// C(k) for k = 1..K, stored at index k-1. A degenerate (perfect-fit)
  /// step is stored as -infinity.
  std::vector<double> criterion_values;
  /// L(k) = ||Y - Y_k||_F^2 / (nq) for k = 0..K computed from residuals.
  std::vector<double> residuals;
  /// L(k) from the recursion L(k) = L(k-1) - lambda_k.
  std::vector<double> residuals_incremental;
  bool degenerate_residual = false;
};

inline void validate_response(const Eigen::Ref<const Matrix>& y) {
  if (y.rows() < 2 || y.cols() < 2) {
    throw ValidationError("response matrix must have at least 2 rows and 2 columns");
  }
  require_finite(y, "response matrix");
}

inline LatentFactorSet extract_latent_factors(const Eigen::Ref<const Matrix>& y,
                                              const FactorOptions& opts = {}) {
  validate_response(y);
  if (!(opts.mu_tol > 0.0)) throw ValidationError("mu_tol must be positive");
  const auto n = static_cast<std::size_t>(y.rows());
  const auto q = static_cast<std::size_t>(y.cols());
  const std::size_t cap = std::min(n, q);
  const std::size_t k_max = opts.k_max == 0 ? cap : opts.k_max;
  if (k_max > cap) throw ValidationError("k_max exceeds min(n, q)");

  Matrix gram = Matrix::Zero(y.rows(), y.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0 / static_cast<double>(n * q));
  const SymmetricEigen eig = symmetric_eigen(gram);

  LatentFactorSet out;
  out.n = n;
  out.q = q;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = eig.values.size() - 1; i >= 0 && keep.size() < k_max; --i) {
    if (!(eig.values(i) > opts.mu_tol)) break;
    keep.push_back(i);
  }
  const double scale = std::sqrt(static_cast<double>(n));
  out.factors.resize(y.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Vector z = eig.vectors.col(keep[k]);
    Eigen::Index arg = 0;
    z.cwiseAbs().maxCoeff(&arg);
    const bool negative = z(arg) < 0.0;
    const bool want_negative = opts.sign == SignConvention::LargestNegative;
    if (negative != want_negative) z = -z;
    out.factors.col(static_cast<Eigen::Index>(k)) = z * (scale / z.norm());
    out.eigenvalues.push_back(eig.values(keep[k]));
    if (k > 0) {
      const double prev = out.eigenvalues[k - 1];
      if (prev - out.eigenvalues[k] <= 1e-12 * prev) out.has_ties = true;
    }
  }
  return out;
}

/// v_k = Y^T Z_k / n.
inline Vector right_singular_vector(const Eigen::Ref<const Matrix>& y,
                                    const Eigen::Ref<const Vector>& z) {
  if (z.size() != y.rows()) {
    throw ValidationError("factor length " + std::to_string(z.size()) +
                          " does not match response rows " + std::to_string(y.rows()));
  }
  const double n = static_cast<double>(y.rows());
  if (std::abs(z.squaredNorm() - n) > 1e-6 * n) {
    throw ValidationError("factor must have l2-norm sqrt(n)");
  }
  return y.transpose() * z / n;
}

/// Residual ratio L(k)/L(0) at or below which a fit counts as perfect.
inline constexpr double kDegenerateResidualRatio = 1e-20;

inline RankSelection select_rank(const Eigen::Ref<const Matrix>& y,
                                 const LatentFactorSet& factors) {
  validate_response(y);
  if (static_cast<std::size_t>(y.rows()) != factors.n ||
      static_cast<std::size_t>(y.cols()) != factors.q) {
    throw ValidationError("factor set was not extracted from this response matrix");
  }
  const double n = static_cast<double>(factors.n);
  const double nq = n * static_cast<double>(factors.q);
  const std::size_t big_k = factors.size();

  RankSelection out;
  Matrix residual = y;
  out.residuals.push_back(residual.squaredNorm() / nq);
  out.residuals_incremental.push_back(out.residuals.front());
  const double floor = kDegenerateResidualRatio * out.residuals.front();

  double best = std::numeric_limits<double>::infinity();
  bool stopped = false;
  for (std::size_t k = 1; k <= big_k; ++k) {
    const auto z = factors.factor(k - 1);
    const Vector v = right_singular_vector(y, z);
    residual.noalias() -= z * v.transpose();
    out.residuals.push_back(residual.squaredNorm() / nq);
    out.residuals_incremental.push_back(out.residuals_incremental.back() -
                                        factors.eigenvalues[k - 1]);
    if (stopped) {
      out.criterion_values.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double l = out.residuals.back();
    if (l <= floor) {
      out.criterion_values.push_back(-std::numeric_limits<double>::infinity());
      out.r_hat = k;
      out.degenerate_residual = true;
      stopped = true;
      continue;
    }
    const double c = std::sqrt(n) * std::log(l) + static_cast<double>(k) * std::log(n);
    out.criterion_values.push_back(c);
    if (c < best) {
      best = c;
      out.r_hat = k;
    }
  }
  return out;
}

}  // namespace coss
