#pragma once

// Flat `key = value` run configuration with dotted section keys. Every key
// has a default; files and command-line overrides may only set known keys.

#include "coss/io.hpp"
#include "coss/pipeline.hpp"
#include "coss/simgen.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace coss {

struct ConfigKey {
  const char* key;
  const char* default_value;
  const char* help;
};

// clang-format off
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"factors.mu_tol", "0.0001", "eigenvalue cutoff for retained latent factors"},
      {"factors.k_max", "0", "maximum number of factors, 0 = min(n, q)"},
      {"admm.penalty", "0", "initial ADMM penalty, 0 = 800/p^2"},
      {"admm.adaptive", "true", "residual-balancing penalty updates"},
      {"admm.balance_ratio", "100", "residual ratio that triggers a penalty update"},
      {"admm.max_iter", "2000", "ADMM iteration cap"},
      {"admm.primal_tol", "1e-7", "primal residual tolerance (times p)"},
      {"admm.dual_tol", "1e-7", "dual residual tolerance (times p)"},
      {"lasso.n_lambda", "50", "lambda grid size"},
      {"lasso.decade_span", "3", "decades spanned by the lambda grid"},
      {"lasso.tol", "1e-10", "coordinate change tolerance"},
      {"lasso.kkt_tol", "1e-6", "KKT certificate tolerance (relative)"},
      {"lasso.max_sweeps", "10000", "coordinate descent sweep cap"},
      {"scenario.n", "200", "training sample size"},
      {"scenario.p", "200", "predictor count"},
      {"scenario.q", "300", "response count"},
      {"scenario.r", "10", "true rank"},
      {"scenario.rho_x", "0.5", "AR(1) parameter of the design covariance"},
      {"scenario.rho_e", "0.5", "AR(1) parameter of the noise covariance"},
      {"scenario.tau", "0.2", "corruption scale"},
      {"scenario.gamma", "0.1", "noise scale"},
      {"scenario.nnz", "90", "nonzeros in the sparse draw of C*"},
      {"scenario.missing_prob", "0.1", "per-cell missing probability"},
      {"scenario.corruption", "additive", "additive | multiplicative | missing"},
      {"scenario.test_size", "10000", "test sample size"},
      {"scenario.normalize_columns", "false", "rescale design columns to norm sqrt(n)"},
      {"run.seed", "1", "base seed"},
      {"run.replicates", "100", "benchmark replicates per cell"},
      {"run.threads", "1", "benchmark worker threads"},
      {"run.out", "out", "output directory"},
      {"benchmark.scenarios", "additive,multiplicative,missing", "comma-separated corruption kinds"},
      {"benchmark.p", "200", "comma-separated predictor counts"},
  };
  return keys;
}
// clang-format on

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ValidationError("unknown configuration key '" + key + "'");
    values_[key] = value;
  }

  /// Applies a `key=value` assignment.
  void apply(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + assignment + "'");
    set(std::string(io::trim(std::string_view(assignment).substr(0, eq))),
        std::string(io::trim(std::string_view(assignment).substr(eq + 1))));
  }

  void load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config file '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      const std::string_view body = io::trim(std::string_view(line).substr(0, hash));
      if (body.empty()) continue;
      try {
        apply(std::string(body));
      } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown configuration key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const { return io::parse_double(str(key), key); }

  long long integer(const std::string& key) const {
    const std::string& s = str(key);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ValidationError(key + ": cannot parse '" + s + "' as an integer");
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ValidationError(key + ": cannot parse '" + s + "' as an unsigned integer");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ValidationError(key + ": expected true or false, got '" + s + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    const std::string& s = str(key);
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto comma = s.find(',', start);
      const auto item = io::trim(std::string_view(s).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!item.empty()) out.emplace_back(item);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  /// Resolved configuration in load-compatible form.
  void write(std::ostream& os) const {
    for (const auto& k : config_keys()) os << k.key << " = " << values_.at(k.key) << "\n";
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write '" + path.string() + "'");
    write(os);
  }

 private:
  std::map<std::string, std::string> values_;
};

inline FitOptions fit_options_from(const RunConfig& cfg) {
  FitOptions o;
  o.factors.mu_tol = cfg.real("factors.mu_tol");
  const long long k_max = cfg.integer("factors.k_max");
  if (k_max < 0) throw ValidationError("factors.k_max must be nonnegative");
  o.factors.k_max = static_cast<std::size_t>(k_max);
  o.admm.penalty = cfg.real("admm.penalty");
  o.admm.adaptive_penalty = cfg.boolean("admm.adaptive");
  o.admm.balance_ratio = cfg.real("admm.balance_ratio");
  o.admm.max_iter = static_cast<int>(cfg.integer("admm.max_iter"));
  o.admm.primal_tol = cfg.real("admm.primal_tol");
  o.admm.dual_tol = cfg.real("admm.dual_tol");
  o.admm.validate();
  o.grid.n_lambda = static_cast<int>(cfg.integer("lasso.n_lambda"));
  o.grid.decade_span = cfg.real("lasso.decade_span");
  o.lasso.tol = cfg.real("lasso.tol");
  o.lasso.kkt_tol = cfg.real("lasso.kkt_tol");
  o.lasso.max_sweeps = static_cast<int>(cfg.integer("lasso.max_sweeps"));
  if (!(o.lasso.tol > 0.0) || !(o.lasso.kkt_tol > 0.0) || o.lasso.max_sweeps < 1)
    throw ValidationError("lasso tolerances must be positive");
  return o;
}

inline ScenarioConfig scenario_from(const RunConfig& cfg) {
  ScenarioConfig s;
  s.n = cfg.integer("scenario.n");
  s.p = cfg.integer("scenario.p");
  s.q = cfg.integer("scenario.q");
  s.r = cfg.integer("scenario.r");
  s.rho_x = cfg.real("scenario.rho_x");
  s.rho_e = cfg.real("scenario.rho_e");
  s.tau = cfg.real("scenario.tau");
  s.gamma = cfg.real("scenario.gamma");
  s.nnz = cfg.integer("scenario.nnz");
  s.missing_prob = cfg.real("scenario.missing_prob");
  s.corruption = parse_corruption_kind(cfg.str("scenario.corruption"));
  s.test_size = cfg.integer("scenario.test_size");
  s.normalize_columns = cfg.boolean("scenario.normalize_columns");
  s.seed = cfg.unsigned_integer("run.seed");
  s.validate();
  return s;
}

/// Corruption model stored as a `key = value` file next to its matrices:
///   type = none | additive | multiplicative | missing
///   sigma_a = <file>                   (additive)
///   mu_m = <file>, sigma_m = <file>    (multiplicative)
///   pi = <file> or missing_prob = <x>  (missing)
/// Relative paths resolve against the model file's directory.
inline CorruptionModel read_corruption_model(const std::filesystem::path& path, Eigen::Index p) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open corruption model file '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    const std::string_view body = io::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError(path.string() + ": expected key = value, got '" + std::string(body) + "'");
    kv[std::string(io::trim(body.substr(0, eq)))] = std::string(io::trim(body.substr(eq + 1)));
  }
  const auto base = path.parent_path();
  auto file = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end() || it->second.empty())
      throw ValidationError(path.string() + ": '" + key + "' file is required for this model");
    std::filesystem::path f(it->second);
    return f.is_absolute() ? f : base / f;
  };
  const auto type_it = kv.find("type");
  if (type_it == kv.end()) throw ValidationError(path.string() + ": missing 'type'");
  const std::string& type = type_it->second;

  CorruptionModel model;
  if (type == "none") {
    model = NoCorruption{};
  } else if (type == "additive") {
    model = AdditiveErrors{io::read_matrix(file("sigma_a"))};
  } else if (type == "multiplicative") {
    model = MultiplicativeErrors{io::read_vector(file("mu_m")), io::read_matrix(file("sigma_m"))};
  } else if (type == "missing") {
    if (kv.count("pi")) {
      model = MissingData{io::read_vector(file("pi"))};
    } else if (kv.count("missing_prob")) {
      model = MissingData{Vector::Constant(p, io::parse_double(kv["missing_prob"], "missing_prob"))};
    } else {
      throw ValidationError(path.string() + ": missing model needs 'pi' or 'missing_prob'");
    }
  } else {
    throw ValidationError(path.string() + ": unknown model type '" + type + "'");
  }
  validate_model(model, p);
  return model;
}

/// Writes the model file plus its parameter matrices into `dir`.
inline void write_corruption_model(const std::filesystem::path& dir, const CorruptionModel& model,
                                   const std::string& filename = "model.cfg") {
  std::ofstream os(dir / filename);
  if (!os) throw ValidationError("cannot write '" + (dir / filename).string() + "'");
  os << "type = " << model_name(model) << "\n";
  if (const auto* a = std::get_if<AdditiveErrors>(&model)) {
    io::write_matrix(dir / "sigma_a.csv", a->sigma_a);
    os << "sigma_a = sigma_a.csv\n";
  } else if (const auto* m = std::get_if<MultiplicativeErrors>(&model)) {
    io::write_matrix(dir / "mu_m.csv", m->mu);
    io::write_matrix(dir / "sigma_m.csv", m->sigma_m);
    os << "mu_m = mu_m.csv\nsigma_m = sigma_m.csv\n";
  } else if (const auto* mi = std::get_if<MissingData>(&model)) {
    io::write_matrix(dir / "pi.csv", mi->pi);
    os << "pi = pi.csv\n";
  }
}

}  // namespace coss
