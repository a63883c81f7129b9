#include "slfm/rng.hpp"

#include <cmath>

#include "slfm/errors.hpp"

namespace slfm {

double Rng::next_gauss() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double theta = kTwoPi * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Vector Rng::gauss_vector(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = next_gauss();
  return v;
}

int Rng::next_discrete(const Vector& weights) {
  if (weights.size() == 0) throw InvalidInputError("next_discrete: empty weights");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0)) {
      throw InvalidInputError("next_discrete: weights must be nonnegative");
    }
    total += weights(i);
  }
  if (!(total > 0.0)) throw InvalidInputError("next_discrete: all weights are zero");
  double u = next_unit() * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    u -= weights(i);
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

Rng substream(std::uint64_t seed, int stream_id) {
  // Run the master stream forward to a per-purpose state; distinct ids give
  // statistically independent start states under the SplitMix64 mixer.
  Rng master(seed);
  std::uint64_t s = 0;
  for (int i = 0; i <= stream_id; ++i) s = master.next_u64();
  return Rng(s);
}

}  // namespace slfm
