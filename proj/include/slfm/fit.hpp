#pragma once

#include <functional>

#include "slfm/matrixnum.hpp"

namespace slfm {

struct SimplexOptions {
  int max_evals = 500;
  double rel_tol = 1e-6;
};

struct SimplexResult {
  Vector x;            // best point found
  double f_initial = 0.0;
  double f_final = 0.0;  // >= f_initial (the start point is a simplex vertex)
  int evals = 0;
  bool converged = false;  // tolerance met before the evaluation budget
};

// Derivative-free maximization with the Nelder-Mead simplex (reflection /
// expansion / contraction / shrink with the standard coefficients). The
// objective may return non-finite values away from the start; those
// candidates are treated as infinitely bad. A non-finite value at the start
// point itself throws NumericalError. Deterministic: no randomness enters the
// search.
SimplexResult nelder_mead_max(const std::function<double(const Vector&)>& f,
                              const Vector& x0, const SimplexOptions& opts = {});

}  // namespace slfm
