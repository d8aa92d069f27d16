#pragma once

// Synthetic scenarios: AR(1) Gaussian designs, sparse low-rank coefficient
// matrices with prescribed singular values, correlated noise, and corrupted
// copies of the design.
//
// Every dataset is a pure function of (config, seed). Independent sub-streams
// are derived from the seed with fixed offsets:
//   0 design X, 1 coefficients C*, 2 noise E, 3 corruption, 4 test pair.

#include "coss/linalg.hpp"
#include "coss/surrogates.hpp"

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace coss {

using Rng = std::mt19937_64;

enum class StreamOffset : std::uint32_t { Design = 0, Coefficients = 1, Noise = 2, Corruption = 3, Test = 4 };

inline Rng make_stream(std::uint64_t seed, StreamOffset offset) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(offset)};
  return Rng(seq);
}

enum class CorruptionKind { Additive, Multiplicative, Missing };

inline std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::Additive: return "additive";
    case CorruptionKind::Multiplicative: return "multiplicative";
    default: return "missing";
  }
}

inline CorruptionKind parse_corruption_kind(const std::string& s) {
  if (s == "additive") return CorruptionKind::Additive;
  if (s == "multiplicative") return CorruptionKind::Multiplicative;
  if (s == "missing") return CorruptionKind::Missing;
  throw ValidationError("unknown corruption kind '" + s + "'");
}

struct ScenarioConfig {
  Eigen::Index n = 200;
  Eigen::Index p = 200;
  Eigen::Index q = 300;
  Eigen::Index r = 10;
  double rho_x = 0.5;
  double rho_e = 0.5;
  double tau = 0.2;
  double gamma = 0.1;
  Eigen::Index nnz = 90;
  double missing_prob = 0.1;
  CorruptionKind corruption = CorruptionKind::Additive;
  Eigen::Index test_size = 10000;
  std::uint64_t seed = 1;
  /// Rescale design columns to l2-norm sqrt(n); the test design gets the
  /// same column factors.
  bool normalize_columns = false;

  void validate() const {
    if (n < 2 || p < 1 || q < 2 || r < 1 || test_size < 1 || nnz < 1) {
      throw ValidationError("scenario dimensions must be positive (n, q >= 2)");
    }
    if (r > std::min(p, q)) throw ValidationError("r must not exceed min(p, q)");
    if (nnz > p * q) throw ValidationError("nnz must not exceed p*q");
    if (nnz < r) throw ValidationError("nnz must be at least r");
    if (!(std::abs(rho_x) < 1.0) || !(std::abs(rho_e) < 1.0))
      throw ValidationError("AR parameters must lie in (-1, 1)");
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(tau >= 0.0)) throw ValidationError("tau must be nonnegative");
    if (!(missing_prob >= 0.0 && missing_prob < 1.0))
      throw ValidationError("missing_prob must lie in [0, 1)");
  }
};

struct ScenarioDataset {
  Matrix x;
  Matrix w;
  Matrix y;
  Matrix c_star;
  Matrix x_test;
  Matrix y_test;
  CorruptionModel model;
  ScenarioConfig config;
};

inline Matrix ar1_covariance(Eigen::Index dim, double rho) {
  if (dim < 1) throw ValidationError("dimension must be positive");
  if (!(std::abs(rho) < 1.0)) throw ValidationError("AR parameter must satisfy |rho| < 1");
  Matrix out(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      out(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
  }
  return out;
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Row-major fill so a prefix of rows does not depend on the row count.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

/// Square root factor B with B B^T = sigma: lower Cholesky when it exists,
/// otherwise a symmetric eigen square root for singular PSD input.
inline Matrix covariance_factor(const Eigen::Ref<const Matrix>& sigma) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("covariance is not square");
  require_finite(sigma, "covariance");
  if (asymmetry(sigma) > 1e-10 * std::max(1.0, max_abs(sigma)))
    throw ValidationError("covariance is not symmetric");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const SymmetricEigen eig = symmetric_eigen(sigma);
  const double top = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values.minCoeff() < -1e-10 * top) {
    throw ValidationError("covariance is not positive semi-definite");
  }
  return eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Rows i.i.d. N(0, scale * sigma).
inline Matrix sample_gaussian_rows(Eigen::Index count, const Eigen::Ref<const Matrix>& sigma,
                                   double scale, Rng& rng) {
  if (count < 1) throw ValidationError("row count must be positive");
  if (!(scale > 0.0)) throw ValidationError("scale must be positive");
  const Matrix factor = covariance_factor(sigma);
  const Matrix draws = standard_normal(count, sigma.rows(), rng);
  return std::sqrt(scale) * draws * factor.transpose();
}

inline Matrix sample_gaussian_rows(Eigen::Index count, const Eigen::Ref<const Matrix>& sigma,
                                   double scale, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gaussian_rows(count, sigma, scale, rng);
}

namespace detail {

inline Matrix sparse_gaussian(Eigen::Index p, Eigen::Index q, Eigen::Index nnz, Rng& rng) {
  std::vector<Eigen::Index> cells(static_cast<std::size_t>(p * q));
  std::iota(cells.begin(), cells.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first nnz cells are a uniform sample.
  for (Eigen::Index i = 0; i < nnz; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, p * q - 1);
    std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(pick(rng))]);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out = Matrix::Zero(p, q);
  for (Eigen::Index i = 0; i < nnz; ++i) {
    const Eigen::Index cell = cells[static_cast<std::size_t>(i)];
    out(cell % p, cell / p) = normal(rng);
  }
  return out;
}

}  // namespace detail

/// Sparse Gaussian draw reparameterized to singular values 100, 99, ...,
/// 100 - r + 1 on its top-r singular vectors.
inline Matrix generate_coefficient_matrix(Eigen::Index p, Eigen::Index q, Eigen::Index r,
                                          Eigen::Index nnz, Rng& rng) {
  if (r < 1 || r > std::min(p, q)) throw ValidationError("r must lie in [1, min(p, q)]");
  if (nnz < r || nnz > p * q) throw ValidationError("nnz must lie in [r, p*q]");
  for (int attempt = 0; attempt < 2; ++attempt) {
    const Matrix draw = detail::sparse_gaussian(p, q, nnz, rng);
    // SVD of the block spanned by nonzero rows and columns; the rest is zero.
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < p; ++i)
      if (draw.row(i).any()) rows.push_back(i);
    for (Eigen::Index j = 0; j < q; ++j)
      if (draw.col(j).any()) cols.push_back(j);
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    if (std::min(nr, nc) < r) continue;
    const Matrix block = draw(rows, cols);
    Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    if (!(s(r - 1) > 1e-10 * s(0))) continue;
    Matrix u = Matrix::Zero(p, r), v = Matrix::Zero(q, r);
    u(rows, Eigen::all) = svd.matrixU().leftCols(r);
    v(cols, Eigen::all) = svd.matrixV().leftCols(r);
    Vector target(r);
    for (Eigen::Index k = 0; k < r; ++k) target(k) = 100.0 - static_cast<double>(k);
    return u * target.asDiagonal() * v.transpose();
  }
  throw NumericalError("sparse draw has rank below " + std::to_string(r) + " twice");
}

inline Matrix generate_coefficient_matrix(Eigen::Index p, Eigen::Index q, Eigen::Index r,
                                          Eigen::Index nnz, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamOffset::Coefficients);
  return generate_coefficient_matrix(p, q, r, nnz, rng);
}

struct CorruptedDesign {
  Matrix w;
  CorruptionModel model;
};

inline CorruptedDesign corrupt_design(const Eigen::Ref<const Matrix>& x, CorruptionKind kind,
                                      double tau, double missing_prob, Rng& rng) {
  require_finite(x, "X");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  CorruptedDesign out;
  switch (kind) {
    case CorruptionKind::Additive: {
      if (!(tau >= 0.0)) throw ValidationError("tau must be nonnegative");
      out.w = x + tau * standard_normal(n, p, rng);
      out.model = AdditiveErrors{tau * tau * Matrix::Identity(p, p)};
      break;
    }
    case CorruptionKind::Multiplicative: {
      if (!(tau >= 0.0)) throw ValidationError("tau must be nonnegative");
      const Matrix m = (tau * standard_normal(n, p, rng)).array().exp().matrix();
      out.w = x.cwiseProduct(m);
      const double t2 = tau * tau;
      MultiplicativeErrors model;
      model.mu = Vector::Constant(p, std::exp(t2 / 2.0));
      model.sigma_m = Matrix::Zero(p, p);
      model.sigma_m.diagonal().setConstant((std::exp(t2) - 1.0) * std::exp(t2));
      out.model = std::move(model);
      break;
    }
    case CorruptionKind::Missing: {
      if (!(missing_prob >= 0.0 && missing_prob < 1.0))
        throw ValidationError("missing_prob must lie in [0, 1)");
      std::bernoulli_distribution missing(missing_prob);
      out.w = x;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
          if (missing(rng)) out.w(i, j) = 0.0;
        }
      }
      out.model = MissingData{Vector::Constant(p, missing_prob)};
      break;
    }
  }
  return out;
}

inline ScenarioDataset generate_scenario(const ScenarioConfig& config) {
  config.validate();
  ScenarioDataset out;
  out.config = config;
  const Matrix sigma_x = ar1_covariance(config.p, config.rho_x);
  const Matrix sigma_e = ar1_covariance(config.q, config.rho_e);

  Rng design_rng = make_stream(config.seed, StreamOffset::Design);
  out.x = sample_gaussian_rows(config.n, sigma_x, 1.0, design_rng);

  Rng test_rng = make_stream(config.seed, StreamOffset::Test);
  out.x_test = sample_gaussian_rows(config.test_size, sigma_x, 1.0, test_rng);

  if (config.normalize_columns) {
    const double target = std::sqrt(static_cast<double>(config.n));
    for (Eigen::Index j = 0; j < config.p; ++j) {
      const double norm = out.x.col(j).norm();
      if (norm > 0.0) {
        out.x.col(j) *= target / norm;
        out.x_test.col(j) *= target / norm;
      }
    }
  }

  Rng coef_rng = make_stream(config.seed, StreamOffset::Coefficients);
  out.c_star = generate_coefficient_matrix(config.p, config.q, config.r, config.nnz, coef_rng);

  Rng noise_rng = make_stream(config.seed, StreamOffset::Noise);
  out.y = out.x * out.c_star + sample_gaussian_rows(config.n, sigma_e, config.gamma, noise_rng);
  out.y_test = out.x_test * out.c_star +
               sample_gaussian_rows(config.test_size, sigma_e, config.gamma, test_rng);

  Rng corruption_rng = make_stream(config.seed, StreamOffset::Corruption);
  CorruptedDesign corrupted =
      corrupt_design(out.x, config.corruption, config.tau, config.missing_prob, corruption_rng);
  out.w = std::move(corrupted.w);
  out.model = std::move(corrupted.model);
  return out;
}

}  // namespace coss
