// Independent reference implementations used only by tests. These deliberately
// use different algorithms from the library (plain power series instead of
// Pade, numerical quadrature instead of block exponentials, explicit inverses
// instead of factorizations) so agreement is meaningful.
#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "slfm/matrixnum.hpp"

namespace oracles {

using slfm::Matrix;
using slfm::Vector;

// exp(M) by scaled-and-squared plain Taylor summation.
inline Matrix series_exp(const Matrix& M) {
  const Eigen::Index n = M.rows();
  int squarings = 0;
  Matrix S = M;
  while (S.cwiseAbs().maxCoeff() > 0.5) {
    S *= 0.5;
    ++squarings;
  }
  Matrix term = Matrix::Identity(n, n);
  Matrix sum = Matrix::Identity(n, n);
  for (int k = 1; k <= 60; ++k) {
    term = term * S / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

namespace detail {
template <typename Fn>
Matrix simpson_rec(Fn& f, double a, double b, const Matrix& fa, const Matrix& fm,
                   const Matrix& fb, const Matrix& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Matrix flm = f(lm);
  const Matrix frm = f(rm);
  const Matrix left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Matrix right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Matrix delta = left + right - whole;
  if (depth <= 0 || delta.cwiseAbs().maxCoeff() <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Adaptive Simpson quadrature of a matrix-valued integrand over [a, b].
template <typename Fn>
Matrix integrate_matrix(Fn f, double a, double b, double tol) {
  const Matrix fa = f(a);
  const Matrix fb = f(b);
  const Matrix fm = f(0.5 * (a + b));
  const Matrix whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Process-noise covariance integral computed by quadrature of its definition.
inline Matrix quadrature_process_noise(const Matrix& F, const Matrix& L,
                                       const Vector& qc, double dt, double tol) {
  const Matrix W = L * qc.asDiagonal() * L.transpose();
  auto integrand = [&](double tau) -> Matrix {
    const Matrix Phi = series_exp(F * (dt - tau));
    return Phi * W * Phi.transpose();
  };
  return integrate_matrix(integrand, 0.0, dt, tol);
}

// Gaussian log density via explicit determinant and inverse.
inline double naive_logpdf(const Vector& y, const Vector& m, const Matrix& S) {
  const Eigen::Index n = y.size();
  const double det = S.determinant();
  if (!(det > 0)) throw std::runtime_error("naive_logpdf: non-positive determinant");
  const Matrix Sinv = S.inverse();
  const Vector d = y - m;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return -0.5 * (static_cast<double>(n) * std::log(kTwoPi) + std::log(det) +
                 d.dot(Sinv * d));
}

// Classical fixed-step fourth-order Runge-Kutta integration of
// dx/dt = f(t, x) from t0 to t1 in n_steps steps.
template <typename Fn>
Vector rk4(Fn f, Vector x, double t0, double t1, int n_steps) {
  const double h = (t1 - t0) / n_steps;
  double t = t0;
  for (int i = 0; i < n_steps; ++i) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, Vector(x + 0.5 * h * k1));
    const Vector k3 = f(t + 0.5 * h, Vector(x + 0.5 * h * k2));
    const Vector k4 = f(t + h, Vector(x + h * k3));
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return x;
}

// Deterministic pseudo-random matrices for property tests.
inline Matrix random_matrix(std::mt19937& rng, int rows, int cols) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = gauss(rng);
  return M;
}

inline Matrix random_spd(std::mt19937& rng, int n) {
  const Matrix B = random_matrix(rng, n, n);
  return Matrix(B * B.transpose() + 0.1 * Matrix::Identity(n, n));
}

// Random Hurwitz matrix: skew part plus a negative-definite symmetric part.
inline Matrix random_stable(std::mt19937& rng, int n) {
  const Matrix B = random_matrix(rng, n, n);
  const Matrix K = random_matrix(rng, n, n);
  const Matrix skew = 0.5 * (K - K.transpose());
  return Matrix(skew - B * B.transpose() - 0.1 * Matrix::Identity(n, n));
}

}  // namespace oracles
