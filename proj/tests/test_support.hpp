#pragma once

// Test-only oracles. Nothing here calls into the library's numerical paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace coss::testing {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Cyclic Jacobi rotations for a symmetric matrix. Eigenvalues ascending.
inline std::pair<Vec, Mat> jacobi_eigen(Mat a, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  Mat v = Mat::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  Vec values = a.diagonal();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return values(x) < values(y); });
  Vec sorted(n);
  Mat vecs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted(i) = values(order[static_cast<std::size_t>(i)]);
    vecs.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {sorted, vecs};
}

inline Mat jacobi_clip(const Mat& s) {
  auto [values, vectors] = jacobi_eigen(s);
  return vectors * values.cwiseMax(0.0).asDiagonal() * vectors.transpose();
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline Mat random_symmetric(Eigen::Index p, std::mt19937_64& rng) {
  const Mat a = random_matrix(p, p, rng);
  return 0.5 * (a + a.transpose());
}

/// A^T A / m with m >= p rows: positive definite with probability one.
inline Mat random_psd(Eigen::Index p, std::mt19937_64& rng, Eigen::Index m = 0) {
  if (m == 0) m = 2 * p;
  const Mat a = random_matrix(m, p, rng);
  return a.transpose() * a / static_cast<double>(m);
}

/// Random symmetric matrix with at least one negative eigenvalue.
inline Mat random_indefinite(Eigen::Index p, std::mt19937_64& rng) {
  Mat s = random_psd(p, rng, p + 1);
  s.diagonal().array() -= 0.5;
  return 0.5 * (s + s.transpose());
}

inline double soft(double x, double t) {
  return x > t ? x - t : (x < -t ? x + t : 0.0);
}

/// Proximal gradient (ISTA) with fixed step 1/L on the Lasso quadratic.
inline Vec proximal_gradient_lasso(const Mat& sigma, const Vec& rho, double lambda,
                                   double tol = 1e-13, long max_iter = 2000000) {
  const double lmax = jacobi_eigen(sigma).first.maxCoeff();
  const double step = 1.0 / lmax;
  Vec u = Vec::Zero(rho.size());
  for (long it = 0; it < max_iter; ++it) {
    const Vec grad = sigma * u - rho;
    Vec next = u - step * grad;
    for (Eigen::Index j = 0; j < next.size(); ++j) next(j) = soft(next(j), step * lambda);
    const double change = (next - u).cwiseAbs().maxCoeff();
    u = std::move(next);
    if (change < tol) break;
  }
  return u;
}

inline double lasso_value(const Mat& sigma, const Vec& rho, double lambda, const Vec& u) {
  return 0.5 * u.dot(sigma * u) - rho.dot(u) + lambda * u.cwiseAbs().sum();
}

}  // namespace coss::testing
