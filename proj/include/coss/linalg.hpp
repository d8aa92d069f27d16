#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

extern "C" void openblas_set_num_threads(int);

namespace coss {

/// Single-threaded BLAS so results do not depend on how many worker
/// threads call into it.
inline void pin_blas_threads() { openblas_set_num_threads(1); }

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad input: shapes, non-finite values, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to produce a result.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long iterations = -1)
      : std::runtime_error(what), iterations_(iterations) {}
  long iterations() const noexcept { return iterations_; }

 private:
  long iterations_;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

inline void require_finite(const Eigen::Ref<const Matrix>& m,
                           const std::string& name) {
  if (!m.allFinite()) throw ValidationError(name + " contains non-finite entries");
}

inline Matrix symmetrized(const Eigen::Ref<const Matrix>& m) {
  return 0.5 * (m + m.transpose());
}

inline double max_abs(const Eigen::Ref<const Matrix>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest |a_ij - a_ji|.
inline double asymmetry(const Eigen::Ref<const Matrix>& m) {
  return max_abs(m - m.transpose());
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Full symmetric eigendecomposition via LAPACK dsyevr. Only the lower
/// triangle of `a` is referenced.
inline SymmetricEigen symmetric_eigen(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() != a.cols()) throw ValidationError("symmetric_eigen: matrix is not square");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  if (n == 0) return out;
  Matrix work = a;
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'A', 'L', n, work.data(), n, 0.0, 0.0, 0, 0, 0.0,
      &found, out.values.data(), out.vectors.data(), n, support.data());
  if (info != 0 || found != n) {
    throw NumericalError("dsyevr failed with info=" + std::to_string(info), info);
  }
  return out;
}

/// Eigenpairs with eigenvalue in the half-open interval (lower, upper].
/// Tridiagonal reduction, MRRR on the requested range, then back-transform
/// of only the selected vectors; dsyevr switches to bisection plus inverse
/// iteration for value ranges, which is slower when many pairs are wanted.
inline SymmetricEigen symmetric_eigen_range(const Eigen::Ref<const Matrix>& a, double lower,
                                            double upper) {
  if (a.rows() != a.cols()) throw ValidationError("symmetric_eigen: matrix is not square");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  SymmetricEigen out;
  if (n == 0) return out;
  // dstemr overflows when scaling infinite-looking bounds, so clamp them to
  // an interval that contains the whole spectrum.
  const double bound = 2.0 * a.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
  lower = std::max(lower, -bound);
  upper = std::min(upper, bound);
  Matrix work = a;
  Vector diag(n), offdiag(n), tau(n);
  lapack_int info = LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, work.data(), n, diag.data(),
                                   offdiag.data(), tau.data());
  if (info != 0) throw NumericalError("dsytrd failed with info=" + std::to_string(info), info);
  Vector values(n);
  Matrix vectors(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  lapack_logical tryrac = 1;
  // dstemr can read past the integer workspace its own size query returns,
  // so query the sizes and over-allocate both workspaces.
  double lwork_query = 0.0;
  lapack_int liwork_query = 0;
  info = LAPACKE_dstemr_work(LAPACK_COL_MAJOR, 'V', 'V', n, diag.data(), offdiag.data(), lower,
                             upper, 0, 0, &found, values.data(), vectors.data(), n, n,
                             support.data(), &tryrac, &lwork_query, -1, &liwork_query, -1);
  if (info != 0) throw NumericalError("dstemr failed with info=" + std::to_string(info), info);
  const lapack_int lwork = 2 * static_cast<lapack_int>(lwork_query) + 64;
  const lapack_int liwork = 2 * liwork_query + 64;
  std::vector<double> dwork(static_cast<std::size_t>(lwork));
  std::vector<lapack_int> iwork(static_cast<std::size_t>(liwork));
  info = LAPACKE_dstemr_work(LAPACK_COL_MAJOR, 'V', 'V', n, diag.data(), offdiag.data(), lower,
                             upper, 0, 0, &found, values.data(), vectors.data(), n, n,
                             support.data(), &tryrac, dwork.data(), lwork, iwork.data(), liwork);
  if (info != 0) throw NumericalError("dstemr failed with info=" + std::to_string(info), info);
  out.values = values.head(found);
  out.vectors = vectors.leftCols(found);
  if (found > 0) {
    info = LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, found, work.data(), n, tau.data(),
                          out.vectors.data(), n);
    if (info != 0) throw NumericalError("dormtr failed with info=" + std::to_string(info), info);
  }
  return out;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() == 0) return 0.0;
  Matrix work = a;
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Vector w(n);
  lapack_int found = 0;
  std::vector<lapack_int> support(2);
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'N', 'I', 'L', n, work.data(), n, 0.0, 0.0, 1, 1,
                     0.0, &found, w.data(), nullptr, 1, support.data());
  if (info != 0) throw NumericalError("dsyevr failed with info=" + std::to_string(info), info);
  return w(0);
}

}  // namespace coss
