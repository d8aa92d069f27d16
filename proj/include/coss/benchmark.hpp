#pragma once

// Seeded Monte Carlo benchmark: for every (corruption kind, p) cell and every
// replicate, generate a scenario, fit COSS and the corruption-ignoring
// baseline, and score both. Replicate i of every cell uses seed
// base_seed + i, and rows are merged by index, so output does not depend on
// the worker count.

#include "coss/io.hpp"
#include "coss/metrics.hpp"
#include "coss/pipeline.hpp"
#include "coss/simgen.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace coss {

inline constexpr const char* kLongSchema = "# coss-benchmark-long v1";
inline constexpr const char* kAggregateSchema = "# coss-benchmark-aggregate v1";
inline constexpr const char* kMethodCoss = "coss";
inline constexpr const char* kMethodNaive = "naive";

struct BenchmarkCell {
  CorruptionKind corruption = CorruptionKind::Additive;
  Eigen::Index p = 200;

  std::string name() const { return to_string(corruption) + "_p" + std::to_string(p); }
};

struct BenchmarkSpec {
  std::vector<BenchmarkCell> cells;
  std::size_t replicates = 2;
  std::uint64_t base_seed = 1;
  unsigned threads = 1;
  /// Template for every cell; corruption, p and seed are overwritten.
  ScenarioConfig scenario;
  FitOptions fit;
  bool run_naive = true;
};

/// Rows for one replicate: COSS first, then the baseline when requested.
inline std::vector<ReplicateMetrics> run_replicate(const BenchmarkSpec& spec,
                                                   const BenchmarkCell& cell,
                                                   std::size_t replicate) {
  using clock = std::chrono::steady_clock;
  const std::uint64_t seed = spec.base_seed + replicate;
  std::vector<std::string> methods{kMethodCoss};
  if (spec.run_naive) methods.emplace_back(kMethodNaive);

  std::vector<ReplicateMetrics> rows;
  for (const auto& method : methods) {
    ReplicateMetrics row;
    row.scenario = cell.name();
    row.method = method;
    row.replicate = replicate;
    row.seed = seed;
    rows.push_back(row);
  }
  try {
    ScenarioConfig config = spec.scenario;
    config.corruption = cell.corruption;
    config.p = cell.p;
    config.seed = seed;
    const ScenarioDataset data = generate_scenario(config);
    for (auto& row : rows) {
      const auto start = clock::now();
      try {
        const CossFit fit = row.method == kMethodCoss ? fit_coss(data.y, data.w, data.model, spec.fit)
                                                      : fit_naive(data.y, data.w, spec.fit);
        row.nee = nee(fit.c_hat, data.c_star);
        row.npe = npe(fit.c_hat, data.x_test, data.y_test);
        row.rank_error = rank_error(fit.rank(), static_cast<std::size_t>(config.r));
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    }
  } catch (const std::exception& e) {
    for (auto& row : rows) row.error = e.what();
  }
  return rows;
}

/// Runs every cell x replicate. `progress`, when set, is called after each
/// finished replicate from the worker thread that ran it (serialized).
inline std::vector<ReplicateMetrics> run_benchmark(
    const BenchmarkSpec& spec,
    const std::function<void(const std::vector<ReplicateMetrics>&)>& progress = {}) {
  if (spec.cells.empty()) throw ValidationError("benchmark needs at least one scenario cell");
  if (spec.replicates < 1) throw ValidationError("benchmark needs at least one replicate");
  const std::size_t tasks = spec.cells.size() * spec.replicates;
  std::vector<std::vector<ReplicateMetrics>> results(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const BenchmarkCell& cell = spec.cells[t / spec.replicates];
      results[t] = run_replicate(spec, cell, t % spec.replicates);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(results[t]);
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(tasks)));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ReplicateMetrics> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

inline void write_long_csv(std::ostream& os, const std::vector<ReplicateMetrics>& rows) {
  os << kLongSchema << "\n";
  os << "scenario,method,replicate,seed,nee,npe,rank_error,wall_time,error\n";
  for (const auto& r : rows) {
    std::string error = r.error;
    for (char& c : error) {
      if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    os << r.scenario << ',' << r.method << ',' << r.replicate << ',' << r.seed << ','
       << io::format_double(r.nee) << ',' << io::format_double(r.npe) << ',' << r.rank_error << ','
       << io::format_double(r.wall_time) << ',' << error << "\n";
  }
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  auto se = [](const SummaryStat& s) { return s.has_std_error ? io::format_double(s.std_error) : ""; };
  os << kAggregateSchema << "\n";
  os << "scenario,method,count,failures,npe_mean,npe_se,nee_mean,nee_se,rank_error_mean,"
        "rank_error_se,exact_rank_fraction\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.method << ',' << r.count << ',' << r.failures << ','
       << io::format_double(r.npe.mean) << ',' << se(r.npe) << ',' << io::format_double(r.nee.mean)
       << ',' << se(r.nee) << ',' << io::format_double(r.rank_error.mean) << ','
       << se(r.rank_error) << ',' << io::format_double(r.exact_rank_fraction) << "\n";
  }
}

/// Human-readable table in the "mean (se)" x 10^-2 style.
inline void write_summary_table(std::ostream& os, const std::vector<AggregateRow>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %-6s %5s  %-16s %-16s %-12s\n", "scenario", "method", "R",
                "NPE (x1e-2)", "NEE (x1e-2)", "RE");
  os << buf;
  for (const auto& r : rows) {
    auto cell = [](const SummaryStat& s, double scale) {
      char b[64];
      if (s.has_std_error)
        std::snprintf(b, sizeof(b), "%.2f (%.2f)", s.mean * scale, s.std_error * scale);
      else
        std::snprintf(b, sizeof(b), "%.2f (-)", s.mean * scale);
      return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%-22s %-6s %5zu  %-16s %-16s %-12s\n", r.scenario.c_str(),
                  r.method.c_str(), r.count, cell(r.npe, 100.0).c_str(), cell(r.nee, 100.0).c_str(),
                  cell(r.rank_error, 1.0).c_str());
    os << buf;
  }
}

}  // namespace coss
