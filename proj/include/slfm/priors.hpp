#pragma once

#include "slfm/matrixnum.hpp"

namespace slfm {

// Parameters of a Matern covariance function with half-integer smoothness:
// k(tau) = sigma2 * (polynomial in lambda*tau) * exp(-lambda*tau),
// lambda = sqrt(2 nu) / l.
struct MaternSpec {
  double nu = 1.5;      // smoothness; nu + 1/2 must be a positive integer
  double lengthscale = 1.0;
  double sigma2 = 1.0;  // marginal variance
};

// LTI SDE representation of a stationary scalar GP prior:
//   dz = F_z z dt + L_z dbeta,  spectral density q,
// in companion form: z = (u, du/dt, ..., d^{p-1}u/dt^{p-1}), superdiagonal
// ones, last row -a^0 .. -a^{p-1}, L_z the last basis vector. P0 is the
// stationary covariance of z, so the first component of z has the kernel's
// marginal variance.
struct PriorSSM {
  Matrix F_z;
  Vector L_z;
  double q = 0.0;
  Matrix P0;
  Vector a;  // characteristic polynomial coefficients a^0 .. a^{p-1}

  int dim() const { return static_cast<int>(F_z.rows()); }
};

// Exact state-space form of a half-integer Matern prior. The state dimension
// is nu + 1/2, the characteristic polynomial is (s + lambda)^p.
PriorSSM matern_ssm(const MaternSpec& spec);

// Matern covariance value at lag tau >= 0 (closed form for any half-integer
// smoothness).
double matern_kernel(double tau, const MaternSpec& spec);

// Approximate state-space form of the squared-exponential prior
// k(tau) = sigma2 * exp(-tau^2 / l^2), built by truncating the Taylor series
// of the reciprocal spectral density at n_states terms and keeping the stable
// half of the spectral factorization. Requires n_states >= 2.
PriorSSM se_taylor_ssm(double lengthscale, double sigma2, int n_states);

}  // namespace slfm
