#include "slfm/priors.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "slfm/errors.hpp"

namespace slfm {

namespace {

constexpr double kSqrtPi = 1.7724538509055160272981674833411;

void validate_common(double lengthscale, double sigma2, const char* who) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw InvalidInputError(std::string(who) + ": lengthscale must be positive");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw InvalidInputError(std::string(who) + ": variance must be positive");
  }
}

// Number of states p for half-integer smoothness nu = p - 1/2.
int matern_state_count(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw InvalidInputError("matern: smoothness must be positive");
  }
  const double p_real = nu + 0.5;
  const int p = static_cast<int>(std::lround(p_real));
  if (p < 1 || std::abs(p_real - p) > 1e-9) {
    throw InvalidInputError("matern: smoothness must be a half-integer (1/2, 3/2, ...)");
  }
  return p;
}

// Companion-form drift for a monic characteristic polynomial with
// coefficients a[0..p-1] (constant term first).
Matrix companion_from_coeffs(const Vector& a) {
  const int p = static_cast<int>(a.size());
  Matrix F = Matrix::Zero(p, p);
  for (int i = 0; i + 1 < p; ++i) F(i, i + 1) = 1.0;
  for (int j = 0; j < p; ++j) F(p - 1, j) = -a(j);
  return F;
}

Vector last_basis(int p) {
  Vector L = Vector::Zero(p);
  L(p - 1) = 1.0;
  return L;
}

}  // namespace

PriorSSM matern_ssm(const MaternSpec& spec) {
  validate_common(spec.lengthscale, spec.sigma2, "matern_ssm");
  const int p = matern_state_count(spec.nu);
  const double lambda = std::sqrt(2.0 * spec.nu) / spec.lengthscale;

  // Characteristic polynomial (s + lambda)^p: a^i = C(p,i) lambda^(p-i).
  Vector a(p);
  double binom = 1.0;  // C(p, 0)
  for (int i = 0; i < p; ++i) {
    a(i) = binom * std::pow(lambda, p - i);
    binom *= static_cast<double>(p - i) / static_cast<double>(i + 1);
  }

  PriorSSM out;
  out.a = a;
  out.F_z = companion_from_coeffs(a);
  out.L_z = last_basis(p);
  // Spectral density fixed so the first state component has stationary
  // variance sigma2: q = 2 sigma2 sqrt(pi) Gamma(nu + 1/2) lambda^(2 nu) / Gamma(nu).
  out.q = 2.0 * spec.sigma2 * kSqrtPi * std::tgamma(spec.nu + 0.5) *
          std::pow(lambda, 2.0 * spec.nu) / std::tgamma(spec.nu);
  out.P0 = solve_stationary(out.F_z, out.L_z, out.q);
  return out;
}

double matern_kernel(double tau, const MaternSpec& spec) {
  validate_common(spec.lengthscale, spec.sigma2, "matern_kernel");
  const int p = matern_state_count(spec.nu);
  if (tau < 0.0 || !std::isfinite(tau)) {
    throw InvalidInputError("matern_kernel: lag must be nonnegative and finite");
  }
  const int n = p - 1;
  const double lambda = std::sqrt(2.0 * spec.nu) / spec.lengthscale;

  // Half-integer closed form:
  // k(tau) = sigma2 e^{-lambda tau} (n!/(2n)!) sum_i (n+i)!/(i!(n-i)!) (2 lambda tau)^{n-i}.
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double coef = std::exp(std::lgamma(n + i + 1.0) - std::lgamma(i + 1.0) -
                                 std::lgamma(n - i + 1.0));
    sum += coef * std::pow(2.0 * lambda * tau, n - i);
  }
  const double front =
      std::exp(std::lgamma(n + 1.0) - std::lgamma(2.0 * n + 1.0) - lambda * tau);
  return spec.sigma2 * front * sum;
}

PriorSSM se_taylor_ssm(double lengthscale, double sigma2, int n_states) {
  validate_common(lengthscale, sigma2, "se_taylor_ssm");
  if (n_states < 2) {
    throw InvalidInputError("se_taylor_ssm: need at least 2 state components");
  }
  const int N = n_states;
  const double kappa = lengthscale * lengthscale / 4.0;

  // The reciprocal spectral density of k(tau) = exp(-tau^2/l^2) is
  // proportional to exp(kappa w^2); truncate its Taylor series after N terms.
  // With x = kappa w^2, the truncation is the partial exponential sum
  // e_N(x) = sum_{k<=N} x^k / k!, whose roots are lengthscale-free.
  // Monic coefficients of N! * e_N(x): c_k = N!/k!.
  Vector c(N);
  for (int k = 0; k < N; ++k) {
    c(k) = std::exp(std::lgamma(N + 1.0) - std::lgamma(k + 1.0));
  }
  const Matrix comp = companion_from_coeffs(c);  // eigenvalues are the roots
  Eigen::EigenSolver<Matrix> es(comp);
  if (es.info() != Eigen::Success) {
    throw ApproximationError("se_taylor_ssm: root finding failed");
  }

  // Map each root x_j to a stable pole: w^2 = x_j/kappa, s^2 = -w^2, and of
  // the two square roots keep the one in the left half plane.
  std::vector<std::complex<double>> poles(N);
  for (int j = 0; j < N; ++j) {
    const std::complex<double> x = es.eigenvalues()(j);
    const std::complex<double> s0 = std::sqrt(-x / kappa);  // principal, Re >= 0
    const std::complex<double> s = -s0;
    if (!(s.real() < 0.0)) {
      throw ApproximationError(
          "se_taylor_ssm: truncated spectral density has no strictly stable factor");
    }
    poles[j] = s;
  }

  // Expand prod_j (s - pole_j) into monic real coefficients.
  std::vector<std::complex<double>> poly(1, {1.0, 0.0});
  for (const auto& s : poles) {
    std::vector<std::complex<double>> next(poly.size() + 1, {0.0, 0.0});
    for (size_t k = 0; k < poly.size(); ++k) {
      next[k + 1] += poly[k];
      next[k] -= s * poly[k];
    }
    poly.swap(next);
  }
  double max_coeff = 0.0, max_imag = 0.0;
  for (const auto& z : poly) {
    max_coeff = std::max(max_coeff, std::abs(z));
    max_imag = std::max(max_imag, std::abs(z.imag()));
  }
  if (max_imag > 1e-8 * max_coeff) {
    throw ApproximationError(
        "se_taylor_ssm: spectral factor coefficients are not real");
  }
  Vector a(N);
  for (int i = 0; i < N; ++i) a(i) = poly[i].real();

  PriorSSM out;
  out.a = a;
  out.F_z = companion_from_coeffs(a);
  out.L_z = last_basis(N);
  // Matching the truncated density at its leading order fixes the white-noise
  // level: q = sigma2 l sqrt(pi) N! / kappa^N.
  out.q = sigma2 * lengthscale * kSqrtPi *
          std::exp(std::lgamma(N + 1.0) - static_cast<double>(N) * std::log(kappa));
  if (!is_hurwitz(out.F_z)) {
    throw ApproximationError("se_taylor_ssm: constructed drift is not Hurwitz");
  }
  out.P0 = solve_stationary(out.F_z, out.L_z, out.q);
  return out;
}

}  // namespace slfm
