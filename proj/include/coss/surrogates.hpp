#pragma once

// Unbiased surrogates for the clean Gram matrix X^T X / n and the cross
// moments X^T Z / n, built from the corrupted design W and the known
// corruption parameters.

#include "coss/linalg.hpp"

#include <string>
#include <type_traits>
#include <variant>

namespace coss {

struct NoCorruption {};

/// W = X + A, rows of A with covariance sigma_a.
struct AdditiveErrors {
  Matrix sigma_a;
};

/// W = X .* M, rows of M with mean mu and covariance sigma_m.
struct MultiplicativeErrors {
  Vector mu;
  Matrix sigma_m;
};

/// Cell (i, j) of W is zeroed with probability pi(j), independently.
struct MissingData {
  Vector pi;
};

using CorruptionModel =
    std::variant<NoCorruption, AdditiveErrors, MultiplicativeErrors, MissingData>;

inline std::string model_name(const CorruptionModel& model) {
  switch (model.index()) {
    case 0: return "none";
    case 1: return "additive";
    case 2: return "multiplicative";
    default: return "missing";
  }
}

/// Second moment matrix E[m m^T] used as elementwise divisor.
inline Matrix moment_divisor(const MultiplicativeErrors& m) {
  return m.sigma_m + m.mu * m.mu.transpose();
}

inline Matrix moment_divisor(const MissingData& m) {
  const Vector keep = Vector::Ones(m.pi.size()) - m.pi;
  Matrix d = keep * keep.transpose();
  d.diagonal() = keep;
  return d;
}

/// Checks the model against p columns. Throws ValidationError.
inline void validate_model(const CorruptionModel& model, Eigen::Index p) {
  std::visit(
      [p](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AdditiveErrors>) {
          if (m.sigma_a.rows() != p || m.sigma_a.cols() != p)
            throw ValidationError("sigma_a must be " + std::to_string(p) + "x" + std::to_string(p));
          require_finite(m.sigma_a, "sigma_a");
          if (asymmetry(m.sigma_a) > 1e-10 * std::max(1.0, max_abs(m.sigma_a)))
            throw ValidationError("sigma_a is not symmetric");
          if (min_eigenvalue(symmetrized(m.sigma_a)) < -1e-10)
            throw ValidationError("sigma_a is not positive semi-definite");
        } else if constexpr (std::is_same_v<T, MultiplicativeErrors>) {
          if (m.mu.size() != p) throw ValidationError("mu_m must have length " + std::to_string(p));
          if (m.sigma_m.rows() != p || m.sigma_m.cols() != p)
            throw ValidationError("sigma_m must be " + std::to_string(p) + "x" + std::to_string(p));
          require_finite(m.mu, "mu_m");
          require_finite(m.sigma_m, "sigma_m");
          if ((m.mu.array() <= 0.0).any()) throw ValidationError("mu_m entries must be positive");
          if (asymmetry(m.sigma_m) > 1e-10 * std::max(1.0, max_abs(m.sigma_m)))
            throw ValidationError("sigma_m is not symmetric");
        } else if constexpr (std::is_same_v<T, MissingData>) {
          if (m.pi.size() != p) throw ValidationError("pi must have length " + std::to_string(p));
          require_finite(m.pi, "pi");
          if ((m.pi.array() < 0.0).any() || (m.pi.array() >= 1.0).any())
            throw ValidationError("missing probabilities must lie in [0, 1)");
        }
      },
      model);
}

struct SurrogatePair {
  Matrix sigma_hat;
  CorruptionModel model;
  Eigen::Index n = 0;
};

namespace detail {

inline Matrix divide_checked(const Matrix& num, const Matrix& den) {
  for (Eigen::Index i = 0; i < den.rows(); ++i) {
    for (Eigen::Index j = 0; j < den.cols(); ++j) {
      if (den(i, j) == 0.0) {
        throw ValidationError("zero divisor entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
  return num.cwiseQuotient(den);
}

}  // namespace detail

inline SurrogatePair gram_surrogate(const Eigen::Ref<const Matrix>& w,
                                    const CorruptionModel& model) {
  require_finite(w, "W");
  validate_model(model, w.cols());
  const double n = static_cast<double>(w.rows());
  Matrix gram = Matrix::Zero(w.cols(), w.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), 1.0 / n);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  Matrix sigma = std::visit(
      [&gram](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoCorruption>) {
          return gram;
        } else if constexpr (std::is_same_v<T, AdditiveErrors>) {
          return gram - m.sigma_a;
        } else {
          return detail::divide_checked(gram, moment_divisor(m));
        }
      },
      model);
  return {symmetrized(sigma), model, w.rows()};
}

inline Vector cross_surrogate(const Eigen::Ref<const Matrix>& w,
                              const Eigen::Ref<const Vector>& z,
                              const CorruptionModel& model) {
  if (z.size() != w.rows()) {
    throw ValidationError("factor length " + std::to_string(z.size()) +
                          " does not match design rows " + std::to_string(w.rows()));
  }
  const double n = static_cast<double>(w.rows());
  if (std::abs(z.squaredNorm() - n) > 1e-6 * n) {
    throw ValidationError("factor must have l2-norm sqrt(n)");
  }
  const Vector rho = w.transpose() * z / n;
  return std::visit(
      [&rho, &w](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MultiplicativeErrors>) {
          if (m.mu.size() != w.cols()) throw ValidationError("mu_m has the wrong length");
          return rho.cwiseQuotient(m.mu);
        } else if constexpr (std::is_same_v<T, MissingData>) {
          if (m.pi.size() != w.cols()) throw ValidationError("pi has the wrong length");
          return rho.cwiseQuotient((Vector::Ones(m.pi.size()) - m.pi));
        } else {
          return rho;
        }
      },
      model);
}

}  // namespace coss
