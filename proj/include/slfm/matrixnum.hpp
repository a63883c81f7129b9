#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace slfm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Mean and covariance of a multivariate normal; the unit of filtering state.
struct Gaussian {
  Vector mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

// One-step discretization x_{k+1} = A x_k + w_k, w_k ~ N(0, Q), of an LTI
// SDE over a step of length dt.
struct DiscreteTransition {
  Matrix A;
  Matrix Q;
  double dt = 0.0;
};

// (P + P^T)/2, computed so the result is bitwise symmetric.
Matrix symmetrize(const Matrix& P);

// True iff every eigenvalue of F has real part < -1e-12.
bool is_hurwitz(const Matrix& F);

// Matrix exponential exp(M) (scaling-and-squaring with Pade approximants).
Matrix mat_exp(const Matrix& M);

// Exact discretization of dx = F x dt + L dbeta, where dbeta has diagonal
// spectral density diag(qc), over a step dt > 0. Uses the block-matrix
// exponential identity so A and Q come from a single mat_exp call.
DiscreteTransition discretize(const Matrix& F, const Matrix& L, const Vector& qc,
                              double dt);

// Solves the continuous Lyapunov equation F P + P F^T + W = 0 for symmetric
// P by unfolding to a linear system in vec(P). Requires F Hurwitz.
Matrix solve_lyapunov(const Matrix& F, const Matrix& W);

// Stationary covariance of dx = F x dt + L dbeta with scalar spectral
// density q (L a single column). Throws NoStationarySolutionError if F is
// not Hurwitz.
Matrix solve_stationary(const Matrix& F, const Vector& L, double q);

// Cholesky factorization of S with one jitter retry (1e-10 * trace/dim added
// to the diagonal). Throws NumericalError if S still fails to factorize.
Eigen::LLT<Matrix> llt_with_jitter(const Matrix& S);

// log N(y; m, S) evaluated through a Cholesky factor of S.
double gaussian_logpdf(const Vector& y, const Vector& m, const Matrix& S);

// Matrix B with B B^T = P for symmetric positive semidefinite P, via an
// eigendecomposition with small negative eigenvalues clamped to zero.
// Intended for sampling from possibly rank-deficient covariances.
Matrix psd_sqrt(const Matrix& P);

}  // namespace slfm
