#include "slfm/matrixnum.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "slfm/errors.hpp"

namespace slfm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Matrix symmetrize(const Matrix& P) {
  if (P.rows() != P.cols()) {
    throw InvalidInputError("symmetrize: matrix must be square");
  }
  const Eigen::Index n = P.rows();
  Matrix S(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    S(j, j) = P(j, j);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (P(i, j) + P(j, i));
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

bool is_hurwitz(const Matrix& F) {
  if (F.rows() != F.cols()) {
    throw InvalidInputError("is_hurwitz: matrix must be square");
  }
  if (F.rows() == 0) return true;
  Eigen::EigenSolver<Matrix> es(F, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("is_hurwitz: eigenvalue computation failed");
  }
  return (es.eigenvalues().real().array() < -1e-12).all();
}

Matrix mat_exp(const Matrix& M) {
  if (M.rows() != M.cols()) {
    throw InvalidInputError("mat_exp: matrix must be square");
  }
  if (!M.allFinite()) {
    throw InvalidInputError("mat_exp: matrix has non-finite entries");
  }
  return M.exp();
}

DiscreteTransition discretize(const Matrix& F, const Matrix& L, const Vector& qc,
                              double dt) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n) {
    throw InvalidInputError("discretize: F must be square");
  }
  if (L.rows() != n || L.cols() != qc.size()) {
    throw InvalidInputError("discretize: L/qc dimensions do not match F");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidInputError("discretize: dt must be positive and finite");
  }
  if ((qc.array() < 0.0).any()) {
    throw InvalidInputError("discretize: spectral densities must be nonnegative");
  }

  // Block-exponential trick: with B = [[F, L Qc L^T], [0, -F^T]],
  // exp(B dt) = [[A, G], [0, A^{-T}]] and Q = G A^T. One matrix exponential
  // yields both the transition and the exact process noise integral.
  const Matrix W = L * qc.asDiagonal() * L.transpose();
  Matrix B = Matrix::Zero(2 * n, 2 * n);
  B.topLeftCorner(n, n) = F;
  B.topRightCorner(n, n) = W;
  B.bottomRightCorner(n, n) = -F.transpose();

  const Matrix E = mat_exp(B * dt);
  DiscreteTransition out;
  out.A = E.topLeftCorner(n, n);
  out.Q = symmetrize(E.topRightCorner(n, n) * out.A.transpose());
  out.dt = dt;
  return out;
}

Matrix solve_lyapunov(const Matrix& F, const Matrix& W) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || W.rows() != n || W.cols() != n) {
    throw InvalidInputError("solve_lyapunov: F and W must be square and same size");
  }
  if (!is_hurwitz(F)) {
    throw NoStationarySolutionError(
        "solve_lyapunov: drift matrix is not Hurwitz, no stationary solution");
  }

  // Vectorize: (I (x) F + F (x) I) vec(P) = -vec(W), column-major vec.
  Matrix K = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        K(i + n * j, k + n * j) += F(i, k);  // (F P)_{ij} term
        K(i + n * j, i + n * k) += F(j, k);  // (P F^T)_{ij} term
      }
    }
  }
  Vector w(n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    w.segment(n * j, n) = W.col(j);
  }
  Eigen::PartialPivLU<Matrix> lu(K);
  const Vector p = lu.solve(-w);
  if (!p.allFinite()) {
    throw NumericalError("solve_lyapunov: linear solve produced non-finite values");
  }
  Matrix P(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    P.col(j) = p.segment(n * j, n);
  }
  return symmetrize(P);
}

Matrix solve_stationary(const Matrix& F, const Vector& L, double q) {
  if (L.size() != F.rows()) {
    throw InvalidInputError("solve_stationary: L length must match F");
  }
  if (!(q >= 0.0) || !std::isfinite(q)) {
    throw InvalidInputError("solve_stationary: spectral density must be nonnegative");
  }
  return solve_lyapunov(F, Matrix(q * L * L.transpose()));
}

Eigen::LLT<Matrix> llt_with_jitter(const Matrix& S) {
  if (S.rows() != S.cols()) {
    throw InvalidInputError("llt_with_jitter: matrix must be square");
  }
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() == Eigen::Success) return llt;

  const Eigen::Index n = S.rows();
  const double jitter = 1e-10 * S.trace() / static_cast<double>(n);
  Matrix Sj = S;
  Sj.diagonal().array() += jitter;
  llt.compute(Sj);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "llt_with_jitter: matrix not positive definite even after jitter");
  }
  return llt;
}

double gaussian_logpdf(const Vector& y, const Vector& m, const Matrix& S) {
  const Eigen::Index n = y.size();
  if (m.size() != n || S.rows() != n || S.cols() != n) {
    throw InvalidInputError("gaussian_logpdf: dimension mismatch");
  }
  if (n == 0) {
    throw InvalidInputError("gaussian_logpdf: empty vectors");
  }
  const Eigen::LLT<Matrix> llt = llt_with_jitter(S);
  const Vector z = llt.matrixL().solve(y - m);
  // The packed factor stores L on and below the diagonal.
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) * std::log(kTwoPi) + log_det +
                 z.squaredNorm());
}

Matrix psd_sqrt(const Matrix& P) {
  if (P.rows() != P.cols()) {
    throw InvalidInputError("psd_sqrt: matrix must be square");
  }
  const Eigen::Index n = P.rows();
  if (n == 0) return Matrix(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(P));
  if (es.info() != Eigen::Success) {
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  }
  Vector lam = es.eigenvalues();
  const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) < -1e-10 * scale) {
      throw NumericalError("psd_sqrt: matrix has a significantly negative eigenvalue");
    }
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace slfm
