#pragma once

#include <cstdint>

#include "slfm/matrixnum.hpp"

namespace slfm {

// Small splittable PRNG (SplitMix64 mixing function). Chosen over the
// standard-library engines because independent substreams can be derived
// from one 64-bit seed: the simulators draw initial state, process noise,
// observation noise, and model switches from separate streams so that, for
// example, toggling switch sampling does not perturb the state trajectory.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal draws via Box-Muller (second value cached).
  double next_gauss();

  Vector gauss_vector(int n);

  // Sample an index from a discrete distribution given by nonnegative
  // weights (need not be normalized).
  int next_discrete(const Vector& weights);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Independent generator for the stream_id-th named purpose under one seed.
Rng substream(std::uint64_t seed, int stream_id);

// Stream ids used by the simulators.
inline constexpr int kStreamInit = 0;
inline constexpr int kStreamProcess = 1;
inline constexpr int kStreamObservation = 2;
inline constexpr int kStreamSwitch = 3;

}  // namespace slfm
