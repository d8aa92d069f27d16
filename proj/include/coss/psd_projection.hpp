#pragma once

// Nearest positive semi-definite matrix in the elementwise max-norm,
//
//   min_{S >= 0} || S - Sigma_hat ||_max,
//
// solved by ADMM on the splitting S = R with f(S) the PSD-cone indicator and
// g(R) = ||R - Sigma_hat||_max.

#include "coss/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace coss {

/// Initial penalty scale when AdmmSettings::penalty is 0: the dual variable
/// has unit l1 mass spread over p^2 entries, so good penalties shrink like
/// 1/p^2.
inline constexpr double kDefaultPenaltyScale = 800.0;

struct AdmmSettings {
  /// Initial penalty; 0 selects kDefaultPenaltyScale / p^2.
  double penalty = 0.0;
  int max_iter = 2000;
  double primal_tol = 1e-7;
  double dual_tol = 1e-7;
  /// Residual balancing: rescale the penalty by `balance_factor` whenever one
  /// residual exceeds the other by more than `balance_ratio`.
  bool adaptive_penalty = true;
  double balance_ratio = 100.0;
  double balance_factor = 2.0;

  void validate() const {
    if (!(penalty >= 0.0) || !(primal_tol > 0.0) || !(dual_tol > 0.0) || max_iter < 1) {
      throw ValidationError("ADMM tolerances must be positive, penalty nonnegative, max_iter >= 1");
    }
    if (adaptive_penalty && (!(balance_ratio > 1.0) || !(balance_factor > 1.0))) {
      throw ValidationError("ADMM balancing ratio and factor must exceed 1");
    }
  }
};

struct PsdProjectionResult {
  Matrix sigma_tilde;
  double max_norm_distance = 0.0;
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double final_penalty = 0.0;
};

/// Euclidean projection onto {x : ||x||_1 <= radius}: soft thresholding at
/// the level that lands on the sphere.
inline Vector project_l1_ball(const Eigen::Ref<const Vector>& v, double radius) {
  if (!(radius > 0.0)) throw ValidationError("l1-ball radius must be positive");
  require_finite(v, "vector");
  const double norm1 = v.lpNorm<1>();
  if (norm1 <= radius) return v;

  // Michelot's fixed point: drop magnitudes at or below the current
  // threshold and recompute it from the survivors until none are dropped.
  // The threshold only grows, so the survivors always contain the support.
  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v(i));
  double theta = (norm1 - radius) / static_cast<double>(mags.size());
  while (true) {
    std::size_t kept = 0;
    double sum = 0.0;
    for (double m : mags) {
      if (m > theta) {
        mags[kept++] = m;
        sum += m;
      }
    }
    // Roundoff can leave theta at the largest magnitude; keep it then.
    if (kept == 0) break;
    const bool dropped = kept < mags.size();
    mags.resize(kept);
    theta = (sum - radius) / static_cast<double>(kept);
    if (!dropped) break;
  }
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double shrunk = std::max(std::abs(v(i)) - theta, 0.0);
    out(i) = std::copysign(shrunk, v(i));
  }
  return out;
}

/// Frobenius projection onto the PSD cone by clipping negative eigenvalues.
inline Matrix project_psd_cone(const Eigen::Ref<const Matrix>& s) {
  if (s.rows() != s.cols()) throw ValidationError("matrix is not square");
  const SymmetricEigen eig = symmetric_eigen(s);
  const Vector clipped = eig.values.cwiseMax(0.0);
  Matrix out = eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
  return symmetrized(out);
}

namespace detail {

/// Same result as project_psd_cone, computing only one side of the spectrum:
/// the positive part when `positive_hint` says it is the smaller one, the
/// negative part otherwise. The hint is updated with the observed count.
inline Matrix project_psd_cone_partial(const Eigen::Ref<const Matrix>& s,
                                       Eigen::Index& positive_hint) {
  const Eigen::Index p = s.rows();
  constexpr double kInf = std::numeric_limits<double>::max();
  if (2 * positive_hint <= p) {
    const SymmetricEigen pos = symmetric_eigen_range(s, 0.0, kInf);
    positive_hint = pos.values.size();
    Matrix out = Matrix::Zero(p, p);
    if (pos.values.size() > 0) {
      const Matrix scaled = pos.vectors * pos.values.asDiagonal();
      out.noalias() = scaled * pos.vectors.transpose();
    }
    return symmetrized(out);
  }
  const SymmetricEigen neg = symmetric_eigen_range(s, -kInf, 0.0);
  positive_hint = p - neg.values.size();
  Matrix out = s;
  if (neg.values.size() > 0) {
    const Matrix scaled = neg.vectors * neg.values.asDiagonal();
    out.noalias() -= scaled * neg.vectors.transpose();
  }
  return symmetrized(out);
}

}  // namespace detail

inline PsdProjectionResult nearest_psd_maxnorm(const Eigen::Ref<const Matrix>& sigma_hat,
                                               const AdmmSettings& settings = {}) {
  settings.validate();
  if (sigma_hat.rows() != sigma_hat.cols()) throw ValidationError("matrix is not square");
  require_finite(sigma_hat, "sigma_hat");
  if (asymmetry(sigma_hat) > 1e-8) throw ValidationError("matrix is not symmetric");

  const Eigen::Index p = sigma_hat.rows();
  const Matrix target = symmetrized(sigma_hat);
  const double scale = static_cast<double>(std::max<Eigen::Index>(p, 1));
  double penalty = settings.penalty > 0.0 ? settings.penalty : kDefaultPenaltyScale / (scale * scale);

  PsdProjectionResult out;
  Matrix r = target;
  Matrix u = Matrix::Zero(p, p);
  Matrix s(p, p);
  Eigen::Index positive_hint = p;
  for (int it = 1; it <= settings.max_iter; ++it) {
    s = detail::project_psd_cone_partial(r - u, positive_hint);

    // R-update: target + prox of (1/penalty)*||.||_max at (S + U - target),
    // written with Moreau's identity as v - P_{l1(1/penalty)}(v).
    const Matrix v = s + u - target;
    const Eigen::Map<const Vector> flat(v.data(), v.size());
    const Vector proj = project_l1_ball(flat, 1.0 / penalty);
    Matrix r_next = target + v - Eigen::Map<const Matrix>(proj.data(), p, p);

    const Matrix gap = s - r_next;
    u += gap;
    out.primal_residual = gap.norm();
    out.dual_residual = penalty * (r_next - r).norm();
    r = std::move(r_next);
    out.iterations = it;
    if (out.primal_residual <= settings.primal_tol * scale &&
        out.dual_residual <= settings.dual_tol * scale) {
      out.converged = true;
      break;
    }
    if (settings.adaptive_penalty) {
      // Balance residuals relative to the size of the iterates and of the
      // unscaled dual. U is the dual scaled by 1/penalty, so it rescales
      // inversely.
      const double primal_rel = out.primal_residual / std::max({s.norm(), r.norm(), 1e-300});
      const double dual_rel = out.dual_residual / std::max(penalty * u.norm(), 1e-300);
      if (primal_rel > settings.balance_ratio * dual_rel) {
        penalty *= settings.balance_factor;
        u /= settings.balance_factor;
      } else if (dual_rel > settings.balance_ratio * primal_rel) {
        penalty /= settings.balance_factor;
        u *= settings.balance_factor;
      }
    }
  }
  out.final_penalty = penalty;
  out.sigma_tilde = project_psd_cone(symmetrized(s));
  out.max_norm_distance = max_abs(out.sigma_tilde - target);
  return out;
}

}  // namespace coss
