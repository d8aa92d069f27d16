#include "coss/metrics.hpp"
#include "coss/pipeline.hpp"
#include "coss/simgen.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace coss;
using coss::testing::random_matrix;

namespace {

// Rank-2 coefficients with sparse rows and distinct layer strengths.
Matrix two_layer_coefficients(Eigen::Index p, Eigen::Index q, std::mt19937_64& rng) {
  Vector u1 = Vector::Zero(p), u2 = Vector::Zero(p);
  u1.head(4) << 1.0, -0.8, 0.6, 0.5;
  u2.segment(4, 4) << 0.7, 0.6, -0.5, 0.4;
  const Vector v1 = random_matrix(q, 1, rng).col(0).normalized();
  const Vector v2 = random_matrix(q, 1, rng).col(0).normalized();
  return 6.0 * u1 * v1.transpose() + 3.0 * u2 * v2.transpose();
}

struct SmallProblem {
  Matrix x, y, c_star;
};

SmallProblem small_problem(std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  SmallProblem s;
  s.x = random_matrix(100, 20, rng);
  s.c_star = two_layer_coefficients(20, 30, rng);
  s.y = s.x * s.c_star + noise * random_matrix(100, 30, rng);
  return s;
}

}  // namespace

TEST_CASE("zero response gives the null model", "[pipeline]") {
  std::mt19937_64 rng(1);
  const Matrix w = random_matrix(20, 5, rng);
  const CossFit fit = fit_coss(Matrix::Zero(20, 7), w, AdditiveErrors{Matrix::Identity(5, 5) * 0.01});
  CHECK(fit.rank() == 0);
  CHECK(fit.c_hat.rows() == 5);
  CHECK(fit.c_hat.cols() == 7);
  CHECK(fit.c_hat.isZero(0.0));
  const Matrix x_test = random_matrix(4, 5, rng);
  CHECK(predict(fit, x_test).isZero(0.0));
  CHECK(npe(fit.c_hat, x_test, x_test * Matrix::Ones(5, 7)) == Catch::Approx(1.0));
}

TEST_CASE("clean noiseless data is recovered", "[pipeline]") {
  const SmallProblem s = small_problem(3, 0.0);
  const CossFit fit = fit_coss(s.y, s.x, NoCorruption{});
  CHECK(fit.rank() == 2);
  const double rel = (s.x * fit.c_hat - s.x * s.c_star).norm() / (s.x * s.c_star).norm();
  CHECK(rel <= 0.05);
}

TEST_CASE("fit structure invariants", "[pipeline][property]") {
  const SmallProblem s = small_problem(4, 0.5);
  const CossFit fit = fit_coss(s.y, s.x, AdditiveErrors{Matrix::Identity(20, 20) * 0.01});
  REQUIRE(fit.rank() >= 1);
  Matrix sum = Matrix::Zero(20, 30);
  for (const UnitRankLayer& layer : fit.layers) {
    sum += layer.matrix();
    CHECK(layer.nonzeros == (layer.u_hat.array() != 0.0).count());
    CHECK(layer.eigenvalue > 0.0);
  }
  CHECK((fit.c_hat - sum).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(numerical_rank(fit.c_hat) <= static_cast<Eigen::Index>(fit.rank()));
  CHECK(fit.eigenvalues.size() >= fit.rank());
  CHECK(fit.model == "additive");
}

TEST_CASE("sign convention does not change the estimate", "[pipeline][property]") {
  const SmallProblem s = small_problem(5, 0.3);
  const AdditiveErrors model{Matrix::Identity(20, 20) * 0.02};
  FitOptions pos, neg;
  neg.factors.sign = SignConvention::LargestNegative;
  const CossFit a = fit_coss(s.y, s.x, model, pos);
  const CossFit b = fit_coss(s.y, s.x, model, neg);
  REQUIRE(a.rank() == b.rank());
  for (std::size_t k = 0; k < a.rank(); ++k) {
    CHECK((a.layers[k].matrix() - b.layers[k].matrix()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK((a.c_hat - b.c_hat).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("naive baseline", "[pipeline]") {
  const SmallProblem s = small_problem(6, 0.3);
  SECTION("equals the none model bitwise") {
    const CossFit naive = fit_naive(s.y, s.x);
    const CossFit none = fit_coss(s.y, s.x, NoCorruption{});
    CHECK(naive.c_hat == none.c_hat);
  }
  SECTION("equals COSS when the supplied corruption is zero") {
    const CossFit naive = fit_naive(s.y, s.x);
    const CossFit coss = fit_coss(s.y, s.x, AdditiveErrors{Matrix::Zero(20, 20)});
    CHECK((naive.c_hat - coss.c_hat).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("prediction", "[pipeline]") {
  const SmallProblem s = small_problem(7, 0.3);
  const CossFit fit = fit_coss(s.y, s.x, NoCorruption{});
  std::mt19937_64 rng(8);
  SECTION("zero input") { CHECK(predict(fit, Matrix::Zero(3, 20)).isZero(0.0)); }
  SECTION("single layer algebra") {
    CossFit one = fit;
    one.layers.resize(1);
    one.c_hat = one.layers[0].matrix();
    const Matrix row = random_matrix(1, 20, rng);
    const Matrix expected = row.row(0).dot(one.layers[0].u_hat) * one.layers[0].v_hat.transpose();
    CHECK((predict(one, row) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("row stacking") {
    const Matrix a = random_matrix(3, 20, rng), b = random_matrix(5, 20, rng);
    Matrix stacked(8, 20);
    stacked << a, b;
    Matrix expected(8, 30);
    expected << predict(fit, a), predict(fit, b);
    CHECK((predict(fit, stacked) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("column mismatch") { CHECK_THROWS_AS(predict(fit, Matrix::Zero(2, 19)), ValidationError); }
}

TEST_CASE("pipeline input validation", "[pipeline]") {
  CHECK_THROWS_AS(fit_coss(Matrix::Ones(10, 4), Matrix::Ones(9, 3), NoCorruption{}), ValidationError);
  CHECK_THROWS_AS(fit_coss(Matrix::Ones(10, 4), Matrix::Ones(10, 3), MissingData{Vector::Zero(4)}),
                  ValidationError);
  Matrix w = Matrix::Ones(10, 3);
  w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_coss(Matrix::Ones(10, 4), w, NoCorruption{}), ValidationError);
}

TEST_CASE("default scenario fit is sane", "[pipeline][simulation]") {
  ScenarioConfig cfg;
  cfg.seed = 11;
  cfg.test_size = 2000;
  const ScenarioDataset d = generate_scenario(cfg);
  const CossFit fit = fit_coss(d.y, d.w, d.model);
  CHECK(fit.rank() == 10);
  CHECK(fit.psd.min_eigenvalue_before < 0.0);  // p = n makes the additive surrogate indefinite
  CHECK(fit.psd.max_norm_distance > 0.0);
  CHECK(nee(fit.c_hat, d.c_star) < 0.2);
  CHECK(npe(fit.c_hat, d.x_test, d.y_test) < 0.2);
  for (const UnitRankLayer& layer : fit.layers) CHECK(layer.converged);
}
