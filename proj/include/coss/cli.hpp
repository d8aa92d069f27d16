#pragma once

// Command-line front end: fit, simulate, benchmark, project-psd.
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include "coss/benchmark.hpp"
#include "coss/config.hpp"
#include "coss/io.hpp"
#include "coss/metrics.hpp"
#include "coss/pipeline.hpp"
#include "coss/psd_projection.hpp"
#include "coss/simgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace coss::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

/// Flags shared by every subcommand; each maps onto a configuration key.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<long long> replicates;
  std::optional<long long> threads;
  std::optional<std::string> out;
  std::optional<std::string> scenario;
  std::optional<std::string> p;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load(config_path);
    if (seed) cfg.set("run.seed", std::to_string(*seed));
    if (replicates) cfg.set("run.replicates", std::to_string(*replicates));
    if (threads) cfg.set("run.threads", std::to_string(*threads));
    if (out) cfg.set("run.out", *out);
    // Lists feed the benchmark grid; single-scenario keys take the first entry.
    auto first = [](const std::string& list) { return std::string(io::trim(list.substr(0, list.find(',')))); };
    if (scenario) {
      cfg.set("scenario.corruption", first(*scenario));
      cfg.set("benchmark.scenarios", *scenario);
    }
    if (p) {
      cfg.set("scenario.p", first(*p));
      cfg.set("benchmark.p", *p);
    }
    for (const auto& o : overrides) cfg.apply(o);
    return cfg;
  }
};

inline void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "key = value configuration file");
  app->add_option("--set", f.overrides, "override a configuration key (key=value), repeatable");
  app->add_option("--seed", f.seed, "base seed (run.seed)");
  app->add_option("--replicates", f.replicates, "replicates per benchmark cell (run.replicates)");
  app->add_option("--threads", f.threads, "benchmark worker threads (run.threads)");
  app->add_option("--out", f.out, "output directory (run.out)");
  app->add_option("--scenario", f.scenario,
                  "corruption kind: additive|multiplicative|missing (comma list for benchmark)");
  app->add_option("--p", f.p, "predictor count (comma list for benchmark)");
}

inline fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.str("run.out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("cannot create output directory '" + dir.string() + "'");
  }
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw ValidationError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

inline json fit_diagnostics(const CossFit& fit, Eigen::Index n, Eigen::Index p, Eigen::Index q) {
  json j;
  j["n"] = n;
  j["p"] = p;
  j["q"] = q;
  j["model"] = fit.model;
  j["retained_factors"] = fit.eigenvalues.size();
  j["eigenvalues"] = fit.eigenvalues;
  j["eigenvalue_ties"] = fit.eigenvalue_ties;
  j["r_hat"] = fit.rank_selection.r_hat;
  j["criterion"] = fit.rank_selection.criterion_values;
  j["residuals"] = fit.rank_selection.residuals;
  j["degenerate_residual"] = fit.rank_selection.degenerate_residual;
  j["numerical_rank"] = numerical_rank(fit.c_hat);
  json layers = json::array();
  for (const auto& l : fit.layers) {
    layers.push_back({{"eigenvalue", l.eigenvalue},
                      {"lambda", l.lambda_used},
                      {"nonzeros", l.nonzeros},
                      {"kkt_residual", l.kkt_residual},
                      {"sweeps", l.sweeps},
                      {"converged", l.converged},
                      {"rss_clipped", l.rss_clipped}});
  }
  j["layers"] = layers;
  j["psd_projection"] = {{"max_norm_distance", fit.psd.max_norm_distance},
                         {"iterations", fit.psd.iterations},
                         {"converged", fit.psd.converged},
                         {"primal_residual", fit.psd.primal_residual},
                         {"dual_residual", fit.psd.dual_residual},
                         {"min_eigenvalue_before", fit.psd.min_eigenvalue_before}};
  j["lambda_rule"] = "bic: n*log(max(rss,1e-12)) + df*log(n) on a geometric grid";
  return j;
}

struct FitArgs {
  std::string y_path;
  std::string w_path;
  std::string model_path;
};

inline int cmd_fit(const CommonFlags& flags, const FitArgs& args, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const FitOptions opts = fit_options_from(cfg);
  const Matrix y = io::read_matrix(args.y_path);
  const Matrix w = io::read_matrix(args.w_path);
  if (y.rows() != w.rows()) {
    throw ValidationError("Y has " + std::to_string(y.rows()) + " rows but W has " +
                          std::to_string(w.rows()));
  }
  const CorruptionModel model = read_corruption_model(args.model_path, w.cols());
  const fs::path dir = prepare_out_dir(cfg);
  const CossFit fit = fit_coss(y, w, model, opts);
  io::write_matrix(dir / "c_hat.csv", fit.c_hat);
  write_json(dir / "diagnostics.json", fit_diagnostics(fit, y.rows(), w.cols(), y.cols()));
  cfg.write(dir / "resolved_config.cfg");
  out << "r_hat=" << fit.rank() << " psd_distance=" << io::format_double(fit.psd.max_norm_distance)
      << " psd_converged=" << (fit.psd.converged ? "true" : "false") << "\n";
  return kExitOk;
}

inline int cmd_simulate(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const ScenarioConfig sc = scenario_from(cfg);
  const fs::path dir = prepare_out_dir(cfg);
  const ScenarioDataset data = generate_scenario(sc);
  const std::vector<std::pair<std::string, const Matrix*>> files = {
      {"X.csv", &data.x},           {"W.csv", &data.w},           {"Y.csv", &data.y},
      {"C_star.csv", &data.c_star}, {"X_test.csv", &data.x_test}, {"Y_test.csv", &data.y_test}};
  json manifest;
  for (const auto& [name, m] : files) {
    io::write_matrix(dir / name, *m);
    manifest["files"][name] = {m->rows(), m->cols()};
  }
  write_corruption_model(dir, data.model);
  cfg.write(dir / "resolved_config.cfg");
  manifest["model_file"] = "model.cfg";
  manifest["seed"] = sc.seed;
  manifest["created_utc"] = utc_timestamp();
  write_json(dir / "manifest.json", manifest);
  out << "wrote scenario " << to_string(sc.corruption) << " p=" << sc.p << " seed=" << sc.seed
      << " to " << dir.string() << "\n";
  return kExitOk;
}

inline BenchmarkSpec benchmark_spec_from(const RunConfig& cfg) {
  BenchmarkSpec spec;
  spec.scenario = scenario_from(cfg);
  spec.fit = fit_options_from(cfg);
  const long long reps = cfg.integer("run.replicates");
  const long long threads = cfg.integer("run.threads");
  if (reps < 1) throw ValidationError("run.replicates must be at least 1");
  if (threads < 1) throw ValidationError("run.threads must be at least 1");
  spec.replicates = static_cast<std::size_t>(reps);
  spec.threads = static_cast<unsigned>(threads);
  spec.base_seed = cfg.unsigned_integer("run.seed");
  const auto kinds = cfg.list("benchmark.scenarios");
  const auto ps = cfg.list("benchmark.p");
  if (kinds.empty() || ps.empty()) throw ValidationError("benchmark grid is empty");
  for (const auto& k : kinds) {
    for (const auto& p : ps) {
      BenchmarkCell cell;
      cell.corruption = parse_corruption_kind(k);
      cell.p = static_cast<Eigen::Index>(io::parse_double(p, "benchmark.p"));
      if (cell.p < 1) throw ValidationError("benchmark.p entries must be positive");
      ScenarioConfig probe = spec.scenario;
      probe.p = cell.p;
      probe.validate();
      spec.cells.push_back(cell);
    }
  }
  return spec;
}

inline int cmd_benchmark(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const BenchmarkSpec spec = benchmark_spec_from(cfg);
  const fs::path dir = prepare_out_dir(cfg);
  const auto started = std::chrono::steady_clock::now();
  const auto rows = run_benchmark(spec);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const auto table = aggregate(rows);
  {
    std::ofstream os(dir / "benchmark_long.csv");
    write_long_csv(os, rows);
  }
  {
    std::ofstream os(dir / "benchmark_aggregate.csv");
    write_aggregate_csv(os, table);
  }
  {
    std::ofstream os(dir / "summary.txt");
    write_summary_table(os, table);
  }
  cfg.write(dir / "resolved_config.cfg");
  json manifest;
  manifest["long_csv"] = "benchmark_long.csv";
  manifest["aggregate_csv"] = "benchmark_aggregate.csv";
  manifest["schema"] = {kLongSchema, kAggregateSchema};
  manifest["replicates"] = spec.replicates;
  manifest["base_seed"] = spec.base_seed;
  manifest["created_utc"] = utc_timestamp();
  manifest["elapsed_seconds"] = elapsed;
  write_json(dir / "manifest.json", manifest);
  write_summary_table(out, table);

  for (const auto& row : table) {
    if (row.count == 0) {
      out << "all replicates failed for " << row.scenario << "/" << row.method << "\n";
      return kExitNumerical;
    }
  }
  return kExitOk;
}

struct ProjectArgs {
  std::string input;
};

inline int cmd_project_psd(const CommonFlags& flags, const ProjectArgs& args, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const FitOptions opts = fit_options_from(cfg);
  const Matrix m = io::read_matrix(args.input);
  if (m.rows() != m.cols()) {
    throw ValidationError("'" + args.input + "' is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected a square matrix");
  }
  const fs::path dir = prepare_out_dir(cfg);
  const PsdProjectionResult res = nearest_psd_maxnorm(m, opts.admm);
  io::write_matrix(dir / "sigma_tilde.csv", res.sigma_tilde);
  const std::string report = "distance=" + io::format_double(res.max_norm_distance) +
                             " iterations=" + std::to_string(res.iterations) +
                             " converged=" + (res.converged ? "true" : "false");
  {
    std::ofstream os(dir / "report.txt");
    os << report << "\n";
  }
  out << report << "\n";
  return kExitOk;
}

/// Parses arguments and dispatches. Never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"COSS: sequential sparse learning for multi-response regression with corrupted covariates"};
  app.require_subcommand(1);

  CommonFlags fit_flags, sim_flags, bench_flags, psd_flags;
  FitArgs fit_args;
  ProjectArgs psd_args;

  auto* fit = app.add_subcommand("fit", "fit COSS on Y, W and a corruption model file");
  add_common(fit, fit_flags);
  fit->add_option("--y", fit_args.y_path, "response matrix file")->required();
  fit->add_option("--w", fit_args.w_path, "observed design matrix file")->required();
  fit->add_option("--model", fit_args.model_path, "corruption model file")->required();

  auto* sim = app.add_subcommand("simulate", "generate one synthetic scenario");
  add_common(sim, sim_flags);

  auto* bench = app.add_subcommand("benchmark", "seeded Monte Carlo comparison of COSS and the naive fit");
  add_common(bench, bench_flags);

  auto* psd = app.add_subcommand("project-psd", "nearest PSD matrix in max-norm");
  add_common(psd, psd_flags);
  psd->add_option("--input", psd_args.input, "symmetric matrix file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*fit) return cmd_fit(fit_flags, fit_args, out);
    if (*sim) return cmd_simulate(sim_flags, out);
    if (*bench) return cmd_benchmark(bench_flags, out);
    if (*psd) return cmd_project_psd(psd_flags, psd_args, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInvalid;
}

}  // namespace coss::cli
