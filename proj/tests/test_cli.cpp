#include "coss/cli.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <sstream>

using namespace coss;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("coss_cli_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "coss");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

// Small scenario shared by the simulate/fit/benchmark tests.
std::vector<std::string> tiny_scenario() {
  return {"--set", "scenario.n=60", "--set", "scenario.q=40", "--set", "scenario.r=3",
          "--set", "scenario.nnz=40", "--set", "scenario.test_size=200", "--p", "30"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Long CSV rows with the wall_time column dropped.
std::vector<std::string> metric_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() >= 8) cells.erase(cells.begin() + 7);
    std::string joined;
    for (const auto& c : cells) joined += c + ",";
    rows.push_back(joined);
  }
  return rows;
}

}  // namespace

TEST_CASE("matrix files", "[io]") {
  const fs::path dir = scratch_dir("io");
  SECTION("round trip is exact") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    Matrix m(7, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) * std::pow(10.0, i % 9 - 4);
    m(0, 0) = 0.1;
    m(1, 1) = -0.0;
    io::write_matrix(dir / "m.csv", m);
    CHECK(io::read_matrix(dir / "m.csv") == m);
  }
  SECTION("format") {
    std::ostringstream os;
    io::write_matrix(os, (Matrix(2, 2) << 1.0, 0.5, -2.0, 1e-20).finished());
    CHECK(os.str() == "1,0.5\n-2,9.9999999999999995e-21\n");
  }
  SECTION("ragged and malformed files are rejected") {
    write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(io::read_matrix(dir / "ragged.csv"), ValidationError);
    write_text(dir / "bad.csv", "1,x\n");
    CHECK_THROWS_AS(io::read_matrix(dir / "bad.csv"), ValidationError);
    write_text(dir / "empty.csv", "\n");
    CHECK_THROWS_AS(io::read_matrix(dir / "empty.csv"), ValidationError);
    CHECK_THROWS_AS(io::read_matrix(dir / "absent.csv"), ValidationError);
  }
  SECTION("vectors accept a row or a column") {
    write_text(dir / "row.csv", "1,2,3\n");
    write_text(dir / "col.csv", "1\n2\n3\n");
    CHECK(io::read_vector(dir / "row.csv") == io::read_vector(dir / "col.csv"));
  }
  fs::remove_all(dir);
}

TEST_CASE("run configuration", "[config]") {
  const fs::path dir = scratch_dir("config");
  SECTION("defaults resolve") {
    RunConfig cfg;
    const FitOptions o = fit_options_from(cfg);
    CHECK(o.factors.mu_tol == 1e-4);
    CHECK(o.grid.n_lambda == 50);
    CHECK(o.admm.max_iter == 2000);
    const ScenarioConfig s = scenario_from(cfg);
    CHECK(s.n == 200);
    CHECK(s.q == 300);
    CHECK(s.corruption == CorruptionKind::Additive);
  }
  SECTION("files, comments and overrides") {
    write_text(dir / "run.cfg", "# comment\nscenario.n = 80  # trailing\n\nlasso.n_lambda=20\n");
    RunConfig cfg;
    cfg.load(dir / "run.cfg");
    cfg.apply("scenario.corruption=missing");
    CHECK(scenario_from(cfg).n == 80);
    CHECK(scenario_from(cfg).corruption == CorruptionKind::Missing);
    CHECK(fit_options_from(cfg).grid.n_lambda == 20);
    std::ostringstream os;
    cfg.write(os);
    write_text(dir / "resolved.cfg", os.str());
    RunConfig again;
    again.load(dir / "resolved.cfg");
    std::ostringstream os2;
    again.write(os2);
    CHECK(os.str() == os2.str());
  }
  SECTION("unknown keys and bad values") {
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("scenario.bogus", "1"), ValidationError);
    CHECK_THROWS_AS(cfg.apply("no_equals"), ValidationError);
    cfg.set("scenario.n", "abc");
    CHECK_THROWS_AS(scenario_from(cfg), ValidationError);
    write_text(dir / "bad.cfg", "run.seed = 1\nnot.a.key = 3\n");
    try {
      RunConfig c2;
      c2.load(dir / "bad.cfg");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
    }
  }
  SECTION("corruption model files") {
    write_text(dir / "sigma.csv", "0.04,0\n0,0.04\n");
    write_text(dir / "add.cfg", "type = additive\nsigma_a = sigma.csv\n");
    const CorruptionModel m = read_corruption_model(dir / "add.cfg", 2);
    CHECK(std::get<AdditiveErrors>(m).sigma_a(1, 1) == 0.04);
    write_text(dir / "miss.cfg", "type = missing\nmissing_prob = 0.25\n");
    CHECK(std::get<MissingData>(read_corruption_model(dir / "miss.cfg", 3)).pi.isConstant(0.25));
    write_text(dir / "nofile.cfg", "type = additive\n");
    CHECK_THROWS_AS(read_corruption_model(dir / "nofile.cfg", 2), ValidationError);
    write_text(dir / "wrongdim.cfg", "type = additive\nsigma_a = sigma.csv\n");
    CHECK_THROWS_AS(read_corruption_model(dir / "wrongdim.cfg", 3), ValidationError);
    write_corruption_model(dir, MultiplicativeErrors{Vector::Constant(2, 1.1), Matrix::Identity(2, 2)},
                           "mult.cfg");
    const auto mult = std::get<MultiplicativeErrors>(read_corruption_model(dir / "mult.cfg", 2));
    CHECK(mult.mu(0) == 1.1);
  }
  fs::remove_all(dir);
}

TEST_CASE("project-psd command", "[cli]") {
  const fs::path dir = scratch_dir("psd");
  SECTION("identity") {
    io::write_matrix(dir / "eye.csv", Matrix::Identity(3, 3));
    const CliResult r = run({"project-psd", "--input", (dir / "eye.csv").string(), "--out",
                             (dir / "eye_out").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("distance=0 ") != std::string::npos);
    CHECK(io::read_matrix(dir / "eye_out" / "sigma_tilde.csv") == Matrix::Identity(3, 3));
    CHECK(fs::exists(dir / "eye_out" / "report.txt"));
  }
  SECTION("indefinite 2x2") {
    write_text(dir / "a.csv", "1,2\n2,1\n");
    const CliResult r = run({"project-psd", "--input", (dir / "a.csv").string(), "--out",
                             (dir / "a_out").string()});
    REQUIRE(r.code == 0);
    const Matrix s = io::read_matrix(dir / "a_out" / "sigma_tilde.csv");
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff() >= -1e-10);
    CHECK((s - (Matrix(2, 2) << 1, 2, 2, 1).finished()).cwiseAbs().maxCoeff() <= 0.5 + 1e-4);
  }
  SECTION("invalid inputs exit 2") {
    write_text(dir / "rect.csv", "1,2,3\n4,5,6\n");
    CHECK(run({"project-psd", "--input", (dir / "rect.csv").string(), "--out", dir.string()}).code == 2);
    write_text(dir / "asym.csv", "1,2\n0,1\n");
    CHECK(run({"project-psd", "--input", (dir / "asym.csv").string(), "--out", dir.string()}).code == 2);
    CHECK(run({"project-psd", "--input", (dir / "none.csv").string(), "--out", dir.string()}).code == 2);
    CHECK(run({"project-psd"}).code == 2);
    CHECK(run({"no-such-command"}).code == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("simulate and fit commands", "[cli]") {
  const fs::path dir = scratch_dir("simfit");
  const auto sim_args = concat({"simulate", "--seed", "7", "--out", (dir / "sim").string()},
                               tiny_scenario());

  SECTION("files, shapes and determinism") {
    REQUIRE(run(sim_args).code == 0);
    const auto again = concat({"simulate", "--seed", "7", "--out", (dir / "sim2").string()},
                              tiny_scenario());
    REQUIRE(run(again).code == 0);
    for (const char* name : {"X.csv", "W.csv", "Y.csv", "C_star.csv", "X_test.csv", "Y_test.csv",
                             "sigma_a.csv", "model.cfg"}) {
      CHECK(slurp(dir / "sim" / name) == slurp(dir / "sim2" / name));
    }
    CHECK(io::read_matrix(dir / "sim" / "W.csv").rows() == 60);
    CHECK(io::read_matrix(dir / "sim" / "W.csv").cols() == 30);
    CHECK(io::read_matrix(dir / "sim" / "Y_test.csv").rows() == 200);
    const auto manifest = nlohmann::json::parse(slurp(dir / "sim" / "manifest.json"));
    CHECK(manifest["files"]["Y.csv"][1] == 40);
    CHECK(manifest["seed"] == 7);
  }
  SECTION("fit on simulated files equals the in-process fit") {
    REQUIRE(run(sim_args).code == 0);
    const fs::path sim = dir / "sim";
    const CliResult r = run({"fit", "--y", (sim / "Y.csv").string(), "--w", (sim / "W.csv").string(),
                             "--model", (sim / "model.cfg").string(), "--out", (dir / "fit").string()});
    REQUIRE(r.code == 0);
    ScenarioConfig cfg;
    cfg.n = 60;
    cfg.p = 30;
    cfg.q = 40;
    cfg.r = 3;
    cfg.nnz = 40;
    cfg.test_size = 200;
    cfg.seed = 7;
    const ScenarioDataset d = generate_scenario(cfg);
    const CossFit fit = fit_coss(d.y, d.w, d.model);
    CHECK(io::read_matrix(dir / "fit" / "c_hat.csv") == fit.c_hat);
    const auto diag = nlohmann::json::parse(slurp(dir / "fit" / "diagnostics.json"));
    CHECK(diag["r_hat"] == fit.rank());
    CHECK(diag["layers"].size() == fit.rank());
  }
  SECTION("clean fixture has zero projection distance") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    Matrix w(30, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    io::write_matrix(dir / "Wc.csv", w);
    io::write_matrix(dir / "Yc.csv", w * Matrix::Ones(5, 4));
    write_text(dir / "none.cfg", "type = none\n");
    const CliResult r = run({"fit", "--y", (dir / "Yc.csv").string(), "--w", (dir / "Wc.csv").string(),
                             "--model", (dir / "none.cfg").string(), "--out", (dir / "fc").string()});
    REQUIRE(r.code == 0);
    const auto diag = nlohmann::json::parse(slurp(dir / "fc" / "diagnostics.json"));
    CHECK(diag["psd_projection"]["max_norm_distance"].get<double>() <= 1e-8);
  }
  SECTION("validation failures exit 2") {
    REQUIRE(run(sim_args).code == 0);
    const fs::path sim = dir / "sim";
    write_text(dir / "nosigma.cfg", "type = additive\n");
    CHECK(run({"fit", "--y", (sim / "Y.csv").string(), "--w", (sim / "W.csv").string(), "--model",
               (dir / "nosigma.cfg").string(), "--out", (dir / "f2").string()})
              .code == 2);
    CHECK(run({"fit", "--y", (sim / "Y.csv").string(), "--w", (sim / "X_test.csv").string(),
               "--model", (sim / "model.cfg").string(), "--out", (dir / "f3").string()})
              .code == 2);
    write_text(dir / "blocker", "not a directory");
    CHECK(run(concat({"simulate", "--out", (dir / "blocker" / "sub").string()}, tiny_scenario())).code == 2);
    CHECK(run({"simulate", "--set", "scenario.bogus=1", "--out", (dir / "s3").string()}).code == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("default simulate shapes", "[cli][slow]") {
  const fs::path dir = scratch_dir("simdefault");
  REQUIRE(run({"simulate", "--out", dir.string()}).code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  auto shape = [&](const char* name) {
    return std::pair<int, int>(manifest["files"][name][0], manifest["files"][name][1]);
  };
  CHECK(shape("X.csv") == std::pair(200, 200));
  CHECK(shape("W.csv") == std::pair(200, 200));
  CHECK(shape("Y.csv") == std::pair(200, 300));
  CHECK(shape("C_star.csv") == std::pair(200, 300));
  CHECK(shape("X_test.csv") == std::pair(10000, 200));
  CHECK(shape("Y_test.csv") == std::pair(10000, 300));
  CHECK(io::read_matrix(dir / "Y_test.csv").rows() == 10000);
  fs::remove_all(dir);
}

TEST_CASE("benchmark command", "[cli][benchmark]") {
  const fs::path dir = scratch_dir("bench");
  SECTION("smoke run with schema checks") {
    const auto start = std::chrono::steady_clock::now();
    const CliResult r = run(concat({"benchmark", "--replicates", "2", "--seed", "3", "--scenario",
                                    "additive", "--out", (dir / "b1").string()},
                                   tiny_scenario()));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 10.0);
    std::istringstream lines(slurp(dir / "b1" / "benchmark_long.csv"));
    std::string line;
    std::getline(lines, line);
    CHECK(line == kLongSchema);
    std::getline(lines, line);
    CHECK(line == "scenario,method,replicate,seed,nee,npe,rank_error,wall_time,error");
    int count = 0;
    while (std::getline(lines, line)) {
      ++count;
      CHECK(line.rfind("additive_p30,", 0) == 0);
      CHECK(std::count(line.begin(), line.end(), ',') == 8);
    }
    CHECK(count == 4);
    std::istringstream agg(slurp(dir / "b1" / "benchmark_aggregate.csv"));
    std::getline(agg, line);
    CHECK(line == kAggregateSchema);
    std::getline(agg, line);
    CHECK(line ==
          "scenario,method,count,failures,npe_mean,npe_se,nee_mean,nee_se,rank_error_mean,"
          "rank_error_se,exact_rank_fraction");
    CHECK(fs::exists(dir / "b1" / "summary.txt"));
    CHECK(fs::exists(dir / "b1" / "manifest.json"));
    CHECK(fs::exists(dir / "b1" / "resolved_config.cfg"));
  }
  SECTION("rows do not depend on the thread count") {
    const auto base = concat({"benchmark", "--replicates", "4", "--seed", "11", "--scenario",
                              "additive,missing"},
                             tiny_scenario());
    REQUIRE(run(concat(base, {"--threads", "1", "--out", (dir / "t1").string()})).code == 0);
    REQUIRE(run(concat(base, {"--threads", "8", "--out", (dir / "t8").string()})).code == 0);
    CHECK(metric_rows(slurp(dir / "t1" / "benchmark_long.csv")) ==
          metric_rows(slurp(dir / "t8" / "benchmark_long.csv")));
    CHECK(slurp(dir / "t1" / "benchmark_aggregate.csv") == slurp(dir / "t8" / "benchmark_aggregate.csv"));
  }
  SECTION("bad grid exits 2") {
    CHECK(run({"benchmark", "--scenario", "sideways", "--out", (dir / "b2").string()}).code == 2);
    CHECK(run({"benchmark", "--replicates", "0", "--out", (dir / "b3").string()}).code == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("golden fit regression", "[cli][golden]") {
  const fs::path data = COSS_TEST_DATA_DIR;
  const fs::path dir = scratch_dir("golden");
  const CliResult r = run({"fit", "--y", (data / "Y.csv").string(), "--w", (data / "W.csv").string(),
                           "--model", (data / "model.cfg").string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "c_hat.csv") == slurp(data / "c_hat_expected.csv"));
  fs::remove_all(dir);
}
