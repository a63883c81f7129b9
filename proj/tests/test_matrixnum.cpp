#include "slfm/matrixnum.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "slfm/errors.hpp"

using slfm::Matrix;
using slfm::Vector;

namespace {
double max_abs_diff(const Matrix& A, const Matrix& B) {
  return (A - B).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_SUITE("matrixnum") {

TEST_CASE("mat_exp: zero matrix gives the identity") {
  const Matrix E = slfm::mat_exp(Matrix::Zero(3, 3));
  CHECK(max_abs_diff(E, Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("mat_exp: nilpotent shift matrix integrates to a unit upper triangle") {
  const double t = 0.7;
  Matrix N = Matrix::Zero(2, 2);
  N(0, 1) = 1.0;
  const Matrix E = slfm::mat_exp(N * t);
  Matrix expected(2, 2);
  expected << 1.0, t, 0.0, 1.0;
  CHECK(max_abs_diff(E, expected) <= 1e-15);
}

TEST_CASE("mat_exp: agrees with a power-series oracle") {
  Matrix F(2, 2);
  F << 0.0, 1.0, -0.4, -2.0;
  const Matrix E = slfm::mat_exp(Matrix(F * 0.3));
  const Matrix E_ref = oracles::series_exp(Matrix(F * 0.3));
  CHECK(max_abs_diff(E, E_ref) <= 1e-12);
}

TEST_CASE("mat_exp: skew-symmetric argument yields an orthogonal matrix") {
  std::mt19937 rng(1234);
  const Matrix K = oracles::random_matrix(rng, 5, 5);
  const Matrix skew = 0.5 * (K - K.transpose());
  const Matrix E = slfm::mat_exp(skew);
  CHECK(max_abs_diff(E * E.transpose(), Matrix::Identity(5, 5)) <= 1e-10);
}

TEST_CASE("mat_exp: semigroup property on random stable matrices") {
  std::mt19937 rng(99);
  for (int n : {2, 5, 8}) {
    const Matrix F = oracles::random_stable(rng, n);
    const double a = 0.37, b = 0.81;
    const Matrix lhs = slfm::mat_exp(Matrix(F * (a + b)));
    const Matrix rhs = slfm::mat_exp(Matrix(F * a)) * slfm::mat_exp(Matrix(F * b));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
  }
}

TEST_CASE("mat_exp: rejects non-square and non-finite inputs") {
  CHECK_THROWS_AS(slfm::mat_exp(Matrix::Zero(2, 3)), slfm::InvalidInputError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(slfm::mat_exp(bad), slfm::InvalidInputError);
}

TEST_CASE("discretize: vanishing step gives identity transition and no noise") {
  Matrix F(2, 2);
  F << 0.0, 1.0, -3.0, -2.0;
  Matrix L(2, 1);
  L << 0.0, 1.0;
  Vector qc(1);
  qc << 2.0;
  const auto d = slfm::discretize(F, L, qc, 1e-12);
  CHECK(max_abs_diff(d.A, Matrix::Identity(2, 2)) <= 1e-10);
  CHECK(d.Q.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("discretize: scalar mean-reverting process matches the closed form") {
  const double lambda = 1.3, q = 0.7, dt = 0.35;
  Matrix F(1, 1);
  F << -lambda;
  Matrix L(1, 1);
  L << 1.0;
  Vector qc(1);
  qc << q;
  const auto d = slfm::discretize(F, L, qc, dt);
  CHECK(d.A(0, 0) == doctest::Approx(std::exp(-lambda * dt)).epsilon(1e-12));
  const double Q_exact = q * (1.0 - std::exp(-2.0 * lambda * dt)) / (2.0 * lambda);
  CHECK(d.Q(0, 0) == doctest::Approx(Q_exact).epsilon(1e-12));
}

TEST_CASE("discretize: matches adaptive quadrature on a random stable system") {
  std::mt19937 rng(2024);
  const Matrix F = oracles::random_stable(rng, 4);
  const Matrix L = oracles::random_matrix(rng, 4, 2);
  Vector qc(2);
  qc << 0.9, 1.7;
  const double dt = 0.6;
  const auto d = slfm::discretize(F, L, qc, dt);
  const Matrix Q_ref =
      oracles::quadrature_process_noise(F, L, qc, dt, 1e-13 * d.Q.norm());
  const double rel = (d.Q - Q_ref).norm() / Q_ref.norm();
  CHECK(rel <= 1e-8);
  // Transition agrees with the series oracle too.
  CHECK(max_abs_diff(d.A, oracles::series_exp(Matrix(F * dt))) <= 1e-11);
}

TEST_CASE("discretize: noise covariance is exactly symmetric and PSD") {
  std::mt19937 rng(7);
  const Matrix F = oracles::random_stable(rng, 5);
  const Matrix L = oracles::random_matrix(rng, 5, 2);
  Vector qc(2);
  qc << 1.0, 0.3;
  const auto d = slfm::discretize(F, L, qc, 0.8);
  CHECK((d.Q - d.Q.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(d.Q);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12 * d.Q.norm());
}

TEST_CASE("discretize: rejects invalid arguments") {
  const Matrix F = Matrix::Identity(2, 2) * -1.0;
  Matrix L(2, 1);
  L << 0.0, 1.0;
  Vector qc(1);
  qc << 1.0;
  CHECK_THROWS_AS(slfm::discretize(F, L, qc, 0.0), slfm::InvalidInputError);
  CHECK_THROWS_AS(slfm::discretize(F, L, qc, -1.0), slfm::InvalidInputError);
  Vector neg(1);
  neg << -1.0;
  CHECK_THROWS_AS(slfm::discretize(F, L, neg, 0.1), slfm::InvalidInputError);
  CHECK_THROWS_AS(slfm::discretize(F, Matrix::Zero(3, 1), qc, 0.1),
                  slfm::InvalidInputError);
}

TEST_CASE("solve_stationary: zero spectral density gives zero covariance") {
  Matrix F(2, 2);
  F << 0.0, 1.0, -3.0, -2.0;
  Vector L(2);
  L << 0.0, 1.0;
  const Matrix P = slfm::solve_stationary(F, L, 0.0);
  CHECK(P.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("solve_stationary: scalar mean-reverting closed form") {
  const double lambda = 2.5, q = 3.0;
  Matrix F(1, 1);
  F << -lambda;
  Vector L(1);
  L << 1.0;
  const Matrix P = slfm::solve_stationary(F, L, q);
  CHECK(P(0, 0) == doctest::Approx(q / (2.0 * lambda)).epsilon(1e-12));
}

TEST_CASE("solve_stationary: second-order companion model has diagonal stationary covariance") {
  // Companion dynamics with characteristic polynomial (s + lambda)^2 and
  // spectral density 4 lambda^3: the stationary covariance is diag(1, lambda^2).
  const double lambda = std::sqrt(3.0);
  Matrix F(2, 2);
  F << 0.0, 1.0, -lambda * lambda, -2.0 * lambda;
  Vector L(2);
  L << 0.0, 1.0;
  const double q = 4.0 * lambda * lambda * lambda;
  const Matrix P = slfm::solve_stationary(F, L, q);
  CHECK(P(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(P(1, 1) == doctest::Approx(lambda * lambda).epsilon(1e-12));
  CHECK(std::abs(P(0, 1)) <= 1e-12);
  const Matrix residual = F * P + P * F.transpose() + q * L * L.transpose();
  CHECK(residual.norm() <= 1e-10 * (P.norm() + q));
}

TEST_CASE("solve_stationary: rejects drift matrices without a stationary solution") {
  Vector L1(1);
  L1 << 1.0;
  Matrix pos(1, 1);
  pos << 1.0;
  CHECK_THROWS_AS(slfm::solve_stationary(pos, L1, 1.0),
                  slfm::NoStationarySolutionError);
  Matrix F(2, 2);
  F << 0.0, 1.0, 0.0, 0.0;  // double integrator: marginally stable
  Vector L2(2);
  L2 << 0.0, 1.0;
  CHECK_THROWS_AS(slfm::solve_stationary(F, L2, 1.0),
                  slfm::NoStationarySolutionError);
}

TEST_CASE("solve_lyapunov: residual, symmetry, and positive semidefiniteness") {
  std::mt19937 rng(5150);
  for (int n : {2, 4, 7}) {
    const Matrix F = oracles::random_stable(rng, n);
    const Matrix G = oracles::random_matrix(rng, n, 2);
    const Matrix W = G * G.transpose();
    const Matrix P = slfm::solve_lyapunov(F, W);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Matrix residual = F * P + P * F.transpose() + W;
    CHECK(residual.norm() <= 1e-10 * (P.norm() + W.norm()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * P.norm());
  }
}

TEST_CASE("discretize and solve_stationary satisfy the stationarity fixed point") {
  // For any step, P = A P A^T + Q holds exactly at the stationary covariance.
  Matrix F(2, 2);
  F << 0.0, 1.0, -3.0, -2.0 * std::sqrt(3.0);
  Vector L(2);
  L << 0.0, 1.0;
  const double q = 4.0 * std::pow(3.0, 1.5);
  const Matrix Pinf = slfm::solve_stationary(F, L, q);
  Matrix Lm(2, 1);
  Lm << 0.0, 1.0;
  Vector qc(1);
  qc << q;
  for (double dt : {0.05, 0.7, 50.0}) {
    const auto d = slfm::discretize(F, Lm, qc, dt);
    const Matrix fixed_point = d.A * Pinf * d.A.transpose() + d.Q;
    CHECK(max_abs_diff(fixed_point, Pinf) <= 1e-10 * Pinf.norm());
  }
}

TEST_CASE("gaussian_logpdf: standard normal at its mode") {
  Vector y(1), m(1);
  y << 0.0;
  m << 0.0;
  Matrix S(1, 1);
  S << 1.0;
  const double expected = -0.5 * std::log(2.0 * M_PI);
  CHECK(slfm::gaussian_logpdf(y, m, S) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian_logpdf: hand-computed scalar case") {
  Vector y(1), m(1);
  y << 2.0;
  m << 0.0;
  Matrix S(1, 1);
  S << 4.0;
  const double expected = -0.5 * std::log(8.0 * M_PI) - 0.5;
  CHECK(slfm::gaussian_logpdf(y, m, S) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian_logpdf: matches the explicit determinant formula") {
  std::mt19937 rng(31);
  const Matrix S = oracles::random_spd(rng, 3);
  const Vector y = oracles::random_matrix(rng, 3, 1).col(0);
  const Vector m = oracles::random_matrix(rng, 3, 1).col(0);
  const double got = slfm::gaussian_logpdf(y, m, S);
  const double want = oracles::naive_logpdf(y, m, S);
  CHECK(std::abs(got - want) <= 1e-12);
}

TEST_CASE("gaussian_logpdf: rejects a covariance that is not positive definite") {
  Vector y(2), m(2);
  y << 0.0, 0.0;
  m << 0.0, 0.0;
  CHECK_THROWS_AS(slfm::gaussian_logpdf(y, m, Matrix(-Matrix::Identity(2, 2))),
                  slfm::NumericalError);
}

TEST_CASE("llt_with_jitter: repairs a marginally indefinite covariance") {
  // Rank-one matrix: plain Cholesky fails, the jittered retry succeeds.
  Vector v(3);
  v << 1.0, 2.0, -1.0;
  const Matrix S = v * v.transpose();
  const auto llt = slfm::llt_with_jitter(S);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("symmetrize: output is exactly symmetric and fixes asymmetry") {
  std::mt19937 rng(8);
  const Matrix M = oracles::random_matrix(rng, 4, 4);
  const Matrix S = slfm::symmetrize(M);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs_diff(S, 0.5 * (M + M.transpose())) <= 1e-16);
  // Idempotent on already-symmetric input.
  CHECK(max_abs_diff(slfm::symmetrize(S), S) == 0.0);
}

TEST_CASE("is_hurwitz: classifies stability correctly") {
  Matrix stable(2, 2);
  stable << -1.0, 0.0, 0.0, -2.0;
  CHECK(slfm::is_hurwitz(stable));
  Matrix marginal(2, 2);
  marginal << 0.0, 1.0, 0.0, 0.0;
  CHECK_FALSE(slfm::is_hurwitz(marginal));
  Matrix unstable(1, 1);
  unstable << 1.0;
  CHECK_FALSE(slfm::is_hurwitz(unstable));
}

TEST_CASE("psd_sqrt: factor reproduces the matrix, including rank-deficient input") {
  std::mt19937 rng(77);
  const Matrix P = oracles::random_spd(rng, 4);
  const Matrix B = slfm::psd_sqrt(P);
  CHECK(max_abs_diff(B * B.transpose(), P) <= 1e-10 * P.norm());

  Vector v(3);
  v << 1.0, -2.0, 0.5;
  const Matrix R1 = v * v.transpose();  // rank one
  const Matrix B1 = slfm::psd_sqrt(R1);
  CHECK(max_abs_diff(B1 * B1.transpose(), R1) <= 1e-10 * R1.norm());

  CHECK_THROWS_AS(slfm::psd_sqrt(Matrix(-Matrix::Identity(2, 2))),
                  slfm::NumericalError);
}

}  // TEST_SUITE
