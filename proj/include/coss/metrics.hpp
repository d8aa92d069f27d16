#pragma once

#include "coss/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace coss {

/// ||C_hat - C*||_F / ||C*||_F.
inline double nee(const Eigen::Ref<const Matrix>& c_hat, const Eigen::Ref<const Matrix>& c_star) {
  if (c_hat.rows() != c_star.rows() || c_hat.cols() != c_star.cols())
    throw ValidationError("coefficient matrices differ in shape");
  const double denom = c_star.norm();
  if (!(denom > 0.0)) throw ValidationError("true coefficient matrix is zero");
  return (c_hat - c_star).norm() / denom;
}

/// ||Y_test - X_test C_hat||_F / ||Y_test||_F.
inline double npe(const Eigen::Ref<const Matrix>& c_hat, const Eigen::Ref<const Matrix>& x_test,
                  const Eigen::Ref<const Matrix>& y_test) {
  if (x_test.cols() != c_hat.rows() || x_test.rows() != y_test.rows() ||
      y_test.cols() != c_hat.cols())
    throw ValidationError("test matrices do not match the coefficient shape");
  const double denom = y_test.norm();
  if (!(denom > 0.0)) throw ValidationError("test response matrix is zero");
  return (y_test - x_test * c_hat).norm() / denom;
}

inline std::size_t rank_error(std::size_t r_hat, std::size_t r_star) {
  return r_hat > r_star ? r_hat - r_star : r_star - r_hat;
}

/// Count of singular values above rel_tol times the largest.
inline Eigen::Index numerical_rank(const Eigen::Ref<const Matrix>& m, double rel_tol = 1e-8) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

struct ReplicateMetrics {
  std::string scenario;
  std::string method;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double nee = 0.0;
  double npe = 0.0;
  std::size_t rank_error = 0;
  double wall_time = 0.0;
  /// Empty on success.
  std::string error;
};

struct SummaryStat {
  double mean = 0.0;
  /// Sample standard deviation / sqrt(count); absent with fewer than 2 rows.
  double std_error = 0.0;
  bool has_std_error = false;
};

struct AggregateRow {
  std::string scenario;
  std::string method;
  std::size_t count = 0;
  std::size_t failures = 0;
  SummaryStat nee;
  SummaryStat npe;
  SummaryStat rank_error;
  /// Fraction of successful replicates with rank_error == 0.
  double exact_rank_fraction = 0.0;
  bool flagged = false;
};

inline SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  std::vector<double> sorted = values;
  // Sorting makes the sums independent of replicate order.
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double count = static_cast<double>(sorted.size());
  s.mean = sum / count;
  if (sorted.size() >= 2) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    s.has_std_error = true;
  }
  return s;
}

/// Groups by (scenario, method) in lexicographic order.
inline std::vector<AggregateRow> aggregate(const std::vector<ReplicateMetrics>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<const ReplicateMetrics*>> cells;
  for (const auto& row : rows) cells[{row.scenario, row.method}].push_back(&row);

  std::vector<AggregateRow> out;
  for (const auto& [key, members] : cells) {
    AggregateRow agg;
    agg.scenario = key.first;
    agg.method = key.second;
    std::vector<double> nees, npes, res;
    std::size_t exact = 0;
    for (const auto* m : members) {
      if (!m->error.empty()) {
        ++agg.failures;
        continue;
      }
      nees.push_back(m->nee);
      npes.push_back(m->npe);
      res.push_back(static_cast<double>(m->rank_error));
      if (m->rank_error == 0) ++exact;
    }
    agg.count = nees.size();
    agg.nee = summarize(nees);
    agg.npe = summarize(npes);
    agg.rank_error = summarize(res);
    agg.exact_rank_fraction =
        agg.count == 0 ? 0.0 : static_cast<double>(exact) / static_cast<double>(agg.count);
    agg.flagged = agg.count < 2;
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace coss
