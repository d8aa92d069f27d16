#pragma once

// End-to-end COSS fit: factors from Y, rank from the information criterion,
// one PSD-projected Gram surrogate shared by all layers, and a corrected
// Lasso per retained layer.

#include "coss/factors.hpp"
#include "coss/lasso.hpp"
#include "coss/psd_projection.hpp"
#include "coss/surrogates.hpp"

#include <vector>

namespace coss {

struct FitOptions {
  FactorOptions factors;
  AdmmSettings admm;
  LambdaGrid grid;
  LassoOptions lasso;
};

struct UnitRankLayer {
  Vector u_hat;
  Vector v_hat;
  double eigenvalue = 0.0;
  double lambda_used = 0.0;
  double kkt_residual = 0.0;
  Eigen::Index nonzeros = 0;
  int sweeps = 0;
  bool converged = false;
  bool rss_clipped = false;

  Matrix matrix() const { return u_hat * v_hat.transpose(); }
};

struct PsdSummary {
  double max_norm_distance = 0.0;
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double min_eigenvalue_before = 0.0;
};

struct CossFit {
  std::vector<UnitRankLayer> layers;
  Matrix c_hat;
  RankSelection rank_selection;
  /// All K eigenvalues above mu_tol, including those past r_hat.
  std::vector<double> eigenvalues;
  bool eigenvalue_ties = false;
  PsdSummary psd;
  std::string model;
  FitOptions options;

  std::size_t rank() const { return layers.size(); }
};

inline CossFit fit_coss(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& w,
                        const CorruptionModel& model, const FitOptions& opts = {}) {
  validate_response(y);
  require_finite(w, "W");
  if (y.rows() != w.rows()) {
    throw ValidationError("Y has " + std::to_string(y.rows()) + " rows but W has " +
                          std::to_string(w.rows()));
  }
  validate_model(model, w.cols());

  CossFit fit;
  fit.model = model_name(model);
  fit.options = opts;
  fit.c_hat = Matrix::Zero(w.cols(), y.cols());

  const LatentFactorSet factors = extract_latent_factors(y, opts.factors);
  fit.eigenvalues = factors.eigenvalues;
  fit.eigenvalue_ties = factors.has_ties;
  fit.rank_selection = select_rank(y, factors);
  const std::size_t r_hat = fit.rank_selection.r_hat;
  if (r_hat == 0) return fit;

  const SurrogatePair surrogate = gram_surrogate(w, model);
  const PsdProjectionResult projection = nearest_psd_maxnorm(surrogate.sigma_hat, opts.admm);
  fit.psd.max_norm_distance = projection.max_norm_distance;
  fit.psd.iterations = projection.iterations;
  fit.psd.converged = projection.converged;
  fit.psd.primal_residual = projection.primal_residual;
  fit.psd.dual_residual = projection.dual_residual;
  fit.psd.min_eigenvalue_before = min_eigenvalue(surrogate.sigma_hat);

  for (std::size_t k = 0; k < r_hat; ++k) {
    const auto z = factors.factor(k);
    const Vector rho = cross_surrogate(w, z, model);
    LambdaTuning tuned =
        tune_lambda_bic(projection.sigma_tilde, rho, w.rows(), opts.grid, opts.lasso);
    UnitRankLayer layer;
    layer.nonzeros = tuned.solution.nonzeros();
    layer.u_hat = std::move(tuned.solution.u);
    layer.v_hat = right_singular_vector(y, z);
    layer.eigenvalue = factors.eigenvalues[k];
    layer.lambda_used = tuned.lambda_star;
    layer.kkt_residual = tuned.solution.kkt_residual;
    layer.sweeps = tuned.solution.sweeps;
    layer.converged = tuned.solution.converged;
    layer.rss_clipped = tuned.all_rss_clipped;
    fit.c_hat.noalias() += layer.u_hat * layer.v_hat.transpose();
    fit.layers.push_back(std::move(layer));
  }
  return fit;
}

/// Same pipeline with the corruption ignored.
inline CossFit fit_naive(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& w,
                         const FitOptions& opts = {}) {
  return fit_coss(y, w, NoCorruption{}, opts);
}

inline Matrix predict(const CossFit& fit, const Eigen::Ref<const Matrix>& x_new) {
  if (x_new.cols() != fit.c_hat.rows()) {
    throw ValidationError("X_new has " + std::to_string(x_new.cols()) + " columns, expected " +
                          std::to_string(fit.c_hat.rows()));
  }
  return x_new * fit.c_hat;
}

}  // namespace coss
