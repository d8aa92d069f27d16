#pragma once

// Corrected Lasso on a PSD quadratic surrogate,
//
//   min_u  1/2 u^T S u - rho^T u + lambda ||u||_1,
//
// by cyclic coordinate descent, with a BIC rule over a geometric lambda path.

#include "coss/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace coss {

struct QuadraticLassoProblem {
  Eigen::Ref<const Matrix> sigma;
  Eigen::Ref<const Vector> rho;
  double lambda = 0.0;
};

struct LassoOptions {
  /// Converged when the largest coordinate change in a sweep is at most
  /// tol * max(1, ||u||_inf) and the KKT residual passes kkt_tol.
  double tol = 1e-10;
  /// Relative to max(1, ||rho||_inf).
  double kkt_tol = 1e-6;
  int max_sweeps = 10000;
  /// Record the objective after every sweep.
  bool trace_objective = false;
};

struct LassoSolution {
  Vector u;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;

  Eigen::Index nonzeros() const { return (u.array() != 0.0).count(); }
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

inline void validate_problem(const QuadraticLassoProblem& problem) {
  if (problem.sigma.rows() != problem.sigma.cols() ||
      problem.sigma.rows() != problem.rho.size()) {
    throw ValidationError("lasso problem dimensions disagree");
  }
  if (!(problem.lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
}

inline double lasso_objective(const QuadraticLassoProblem& problem,
                              const Eigen::Ref<const Vector>& u) {
  return 0.5 * u.dot(problem.sigma * u) - problem.rho.dot(u) + problem.lambda * u.lpNorm<1>();
}

/// Largest violation of the subgradient optimality conditions at u.
inline double kkt_residual(const QuadraticLassoProblem& problem,
                           const Eigen::Ref<const Vector>& u) {
  validate_problem(problem);
  if (u.size() != problem.rho.size()) throw ValidationError("lasso iterate has the wrong length");
  const Vector g = problem.sigma * u - problem.rho;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    double r = 0.0;
    if (u(j) != 0.0) {
      r = std::abs(g(j) + problem.lambda * (u(j) > 0.0 ? 1.0 : -1.0));
    } else {
      r = std::max(0.0, std::abs(g(j)) - problem.lambda);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

inline constexpr double kFrozenDiagonal = 1e-12;

inline LassoSolution solve_corrected_lasso(const QuadraticLassoProblem& problem,
                                           const LassoOptions& opts = {},
                                           const std::optional<Vector>& warm_start = {}) {
  validate_problem(problem);
  const Eigen::Index p = problem.rho.size();
  const auto& sigma = problem.sigma;
  const double lambda = problem.lambda;

  LassoSolution sol;
  sol.u = Vector::Zero(p);
  if (warm_start) {
    if (warm_start->size() != p) throw ValidationError("warm start has the wrong length");
    sol.u = *warm_start;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!(sigma(j, j) > kFrozenDiagonal)) sol.u(j) = 0.0;
    }
  }
  // Maintained product S u.
  Vector su = sigma * sol.u;
  const double kkt_limit = opts.kkt_tol * std::max(1.0, problem.rho.cwiseAbs().maxCoeff());

  // Full sweeps alternate with passes over the current support only, which
  // work on a gathered copy of the support block; a solution is certified
  // only after a full sweep.
  std::vector<Eigen::Index> active;
  Matrix block;
  Vector block_su;
  bool full = true;

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    if (full) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double d = sigma(j, j);
        if (!(d > kFrozenDiagonal)) continue;
        const double old = sol.u(j);
        const double next = soft_threshold(problem.rho(j) - (su(j) - d * old), lambda) / d;
        const double delta = next - old;
        if (delta != 0.0) {
          sol.u(j) = next;
          su.noalias() += delta * sigma.col(j);
          max_change = std::max(max_change, std::abs(delta));
        }
      }
    } else {
      for (std::size_t i = 0; i < active.size(); ++i) {
        const auto li = static_cast<Eigen::Index>(i);
        const Eigen::Index j = active[i];
        const double d = block(li, li);
        const double old = sol.u(j);
        const double next = soft_threshold(problem.rho(j) - (block_su(li) - d * old), lambda) / d;
        const double delta = next - old;
        if (delta != 0.0) {
          sol.u(j) = next;
          block_su.noalias() += delta * block.col(li);
          max_change = std::max(max_change, std::abs(delta));
        }
      }
    }
    sol.sweeps = sweep;
    if (opts.trace_objective) sol.objective_trace.push_back(lasso_objective(problem, sol.u));
    const double scale = std::max(1.0, sol.u.cwiseAbs().maxCoeff());
    const bool settled = max_change <= opts.tol * scale;
    if (!full) {
      if (settled) {
        full = true;
        su.noalias() = sigma * sol.u;
      }
      continue;
    }
    if (!settled) {
      active.clear();
      for (Eigen::Index j = 0; j < p; ++j)
        if (sol.u(j) != 0.0) active.push_back(j);
      full = active.empty();
      if (!full) {
        block = sigma(active, active);
        block_su = su(active);
      }
      continue;
    }
    {
      // Refresh the running product before certifying.
      su.noalias() = sigma * sol.u;
      sol.kkt_residual = kkt_residual(problem, sol.u);
      if (sol.kkt_residual <= kkt_limit) {
        sol.converged = true;
        break;
      }
    }
  }
  if (!sol.converged) sol.kkt_residual = kkt_residual(problem, sol.u);
  sol.objective = lasso_objective(problem, sol.u);
  return sol;
}

struct LambdaGrid {
  int n_lambda = 50;
  double decade_span = 3.0;
};

struct LambdaTraceEntry {
  double lambda = 0.0;
  double rss = 0.0;
  Eigen::Index df = 0;
  double bic = 0.0;
  bool rss_clipped = false;
};

struct LambdaTuning {
  double lambda_star = 0.0;
  LassoSolution solution;
  std::vector<LambdaTraceEntry> trace;
  bool all_rss_clipped = false;
};

inline constexpr double kRssFloor = 1e-12;

/// Corrected residual sum of squares divided by n, using ||Z||^2 / n = 1.
inline double corrected_rss(const Eigen::Ref<const Matrix>& sigma,
                            const Eigen::Ref<const Vector>& rho,
                            const Eigen::Ref<const Vector>& u) {
  return u.dot(sigma * u) - 2.0 * rho.dot(u) + 1.0;
}

inline std::vector<double> lambda_path(double lambda_max, const LambdaGrid& grid) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid.n_lambda));
  const double lo = lambda_max * std::pow(10.0, -grid.decade_span);
  for (int i = 0; i < grid.n_lambda; ++i) {
    if (grid.n_lambda == 1) {
      out.push_back(lambda_max);
    } else {
      const double t = static_cast<double>(i) / static_cast<double>(grid.n_lambda - 1);
      out.push_back(lambda_max * std::pow(lo / lambda_max, t));
    }
  }
  return out;
}

inline LambdaTuning tune_lambda_bic(const Eigen::Ref<const Matrix>& sigma,
                                    const Eigen::Ref<const Vector>& rho, Eigen::Index n,
                                    const LambdaGrid& grid = {}, const LassoOptions& opts = {}) {
  if (grid.n_lambda < 1 || !(grid.decade_span > 0.0)) {
    throw ValidationError("lambda grid must be nonempty with positive span");
  }
  if (n < 2) throw ValidationError("sample count must be at least 2");
  if (sigma.rows() != sigma.cols() || sigma.rows() != rho.size()) {
    throw ValidationError("lasso problem dimensions disagree");
  }
  const double log_n = std::log(static_cast<double>(n));
  const double lambda_max = rho.size() == 0 ? 0.0 : rho.cwiseAbs().maxCoeff();

  LambdaTuning out;
  if (lambda_max == 0.0) {
    out.solution = solve_corrected_lasso({sigma, rho, 0.0}, opts);
    out.solution.u.setZero();
    out.solution.objective = 0.0;
    out.solution.kkt_residual = 0.0;
    out.solution.converged = true;
    out.trace.push_back({0.0, 1.0, 0, 0.0, false});
    return out;
  }

  std::optional<Vector> warm;
  double best = std::numeric_limits<double>::infinity();
  out.all_rss_clipped = true;
  for (double lambda : lambda_path(lambda_max, grid)) {
    LassoSolution sol = solve_corrected_lasso({sigma, rho, lambda}, opts, warm);
    warm = sol.u;
    LambdaTraceEntry entry;
    entry.lambda = lambda;
    entry.rss = corrected_rss(sigma, rho, sol.u);
    entry.df = sol.nonzeros();
    entry.rss_clipped = entry.rss < kRssFloor;
    out.all_rss_clipped = out.all_rss_clipped && entry.rss_clipped;
    entry.bic = static_cast<double>(n) * std::log(std::max(entry.rss, kRssFloor)) +
                static_cast<double>(entry.df) * log_n;
    out.trace.push_back(entry);
    if (entry.bic < best) {
      best = entry.bic;
      out.lambda_star = lambda;
      out.solution = std::move(sol);
    }
  }
  return out;
}

}  // namespace coss
