#include "slfm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "slfm/errors.hpp"

namespace slfm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SimplexResult nelder_mead_max(const std::function<double(const Vector&)>& f,
                              const Vector& x0, const SimplexOptions& opts) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw InvalidInputError("nelder_mead_max: need at least one variable");
  if (opts.max_evals < 1) {
    throw InvalidInputError("nelder_mead_max: evaluation budget must be positive");
  }

  SimplexResult result;
  // Internally minimize g = -f.
  auto eval = [&](const Vector& x) -> double {
    const double v = f(x);
    ++result.evals;
    return std::isfinite(v) ? -v : kInf;
  };

  std::vector<Vector> verts;
  std::vector<double> vals;
  verts.reserve(n + 1);
  vals.reserve(n + 1);
  verts.push_back(x0);
  vals.push_back(eval(x0));
  if (!std::isfinite(vals[0])) {
    throw NumericalError("nelder_mead_max: objective is not finite at the "
                         "initial point");
  }
  result.f_initial = -vals[0];
  for (int i = 0; i < n; ++i) {
    Vector v = x0;
    v(i) += (v(i) != 0.0) ? 0.05 * std::abs(v(i)) : 0.00025;
    verts.push_back(v);
    vals.push_back(eval(v));
  }

  std::vector<int> order(n + 1);
  auto sort_order = [&]() {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return vals[a] < vals[b]; });
  };

  while (result.evals < opts.max_evals) {
    sort_order();
    const int best = order[0];
    const int worst = order[n];
    const int second_worst = order[n - 1];

    // Convergence: relative spread of values and vertex coordinates.
    double fspread = 0.0;
    double xspread = 0.0;
    for (int i = 1; i <= n; ++i) {
      if (std::isfinite(vals[order[i]])) {
        fspread = std::max(fspread, std::abs(vals[order[i]] - vals[best]));
      } else {
        fspread = kInf;
      }
      xspread = std::max(
          xspread, (verts[order[i]] - verts[best]).cwiseAbs().maxCoeff());
    }
    const double fscale = std::max(1.0, std::abs(vals[best]));
    const double xscale = std::max(1.0, verts[best].cwiseAbs().maxCoeff());
    if (fspread <= opts.rel_tol * fscale && xspread <= opts.rel_tol * xscale) {
      result.converged = true;
      break;
    }

    Vector centroid = Vector::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += verts[i];
    }
    centroid /= n;

    const Vector reflected = centroid + (centroid - verts[worst]);
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      // Try to go further in the same direction.
      const Vector expanded = centroid + 2.0 * (centroid - verts[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        verts[worst] = expanded;
        vals[worst] = fe;
      } else {
        verts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second_worst]) {
      verts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    // Contract toward the better of (worst, reflected).
    if (fr < vals[worst]) {
      const Vector outside = centroid + 0.5 * (reflected - centroid);
      const double fo = eval(outside);
      if (fo <= fr) {
        verts[worst] = outside;
        vals[worst] = fo;
        continue;
      }
    } else {
      const Vector inside = centroid + 0.5 * (verts[worst] - centroid);
      const double fi = eval(inside);
      if (fi < vals[worst]) {
        verts[worst] = inside;
        vals[worst] = fi;
        continue;
      }
    }
    // Shrink every vertex except the best toward the best.
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      verts[i] = verts[best] + 0.5 * (verts[i] - verts[best]);
      vals[i] = eval(verts[i]);
      if (result.evals >= opts.max_evals) break;
    }
  }

  sort_order();
  result.x = verts[order[0]];
  result.f_final = -vals[order[0]];
  return result;
}

}  // namespace slfm
