#pragma once

#include <cstdint>
#include <vector>

#include "slfm/kalman.hpp"
#include "slfm/lfm.hpp"
#include "slfm/matrixnum.hpp"
#include "slfm/slds.hpp"

namespace slfm {

// Ground truth produced by the simulators. model_sequence / switch_times are
// filled only by the switching simulator.
struct SimulationOutput {
  Vector times;
  std::vector<Vector> states;  // latent state per time
  std::vector<Vector> obs;     // noisy observation per time (fully observed)
  std::vector<int> model_sequence;
  std::vector<double> switch_times;
  std::uint64_t seed = 0;
};

// Exact discrete sampling of the linear model: the initial state from the
// prior, then x_k = A x_{k-1} + sqrt(Q) xi, y_k = H x_k + sqrt(R) eta.
// Initial state, process noise, and observation noise are drawn from
// independent substreams of the seed.
SimulationOutput simulate_lfm(const ContinuousModel& model,
                              const MeasurementModel& meas, const Vector& times,
                              std::uint64_t seed);

// Dense joint Gaussian over the stacked states (x_1, ..., x_T).
struct JointGaussian {
  Vector mean;  // size n*T
  Matrix cov;   // n*T x n*T
  int state_dim = 0;
  int horizon = 0;
};

// Brute-force construction of the joint law at the grid points via the
// Markov factorization: diagonal blocks by the covariance recursion,
// cross blocks Cov(x_j, x_k) = P_j * (A_{j->k})^T. Capped at n*T <= 600
// (ResourceError beyond) because the covariance is materialized densely.
JointGaussian batch_joint(const ContinuousModel& model, const Vector& times);

struct BatchPosterior {
  std::vector<Gaussian> marginals;  // per-time smoothed marginals
  double loglik = 0.0;              // log density of the observed data
};

// Conditions the stacked Gaussian on all observations at once (standard
// batch Gaussian conditioning; NaN = missing). The per-time marginals it
// returns are exact smoothing marginals.
BatchPosterior batch_condition(const JointGaussian& joint,
                               const std::vector<Vector>& y,
                               const MeasurementModel& meas);

// Means-only batch solver in observation space: returns the per-time
// smoothed state means without materializing the joint state covariance,
// so it scales to grids far beyond the batch_joint cap. Independent of the
// sequential filter/smoother code path.
std::vector<Vector> batch_condition_means(const ContinuousModel& model,
                                          const TimeGrid& grid,
                                          const MeasurementModel& meas);

// Samples a model sequence from the switch prior, then the state through the
// active model's transition per step (the reset model re-draws the force
// block from the bank's reset prior), then the observations. Model draws use
// their own substream, so with a switch prior that pins one regular model the
// trajectory is bit-identical to simulate_lfm on that model. Initial model
// probabilities default as in adf. Records the model sequence and the times
// where the reset model was active.
SimulationOutput simulate_slds(const ModelBank& bank, const Matrix& Pi,
                               const MeasurementModel& meas, const Vector& times,
                               std::uint64_t seed,
                               const Vector& initial_model_probs = Vector());

struct EnumerationResult {
  // Every model sequence of length T in lexicographic order, with its
  // normalized posterior weight.
  std::vector<std::vector<int>> sequences;
  Vector weights;
  Matrix filtered_model_probs;  // T x M, exact p(model at k | data up to k)
  Matrix smoothed_model_probs;  // T x M, exact p(model at k | all data)
  double loglik = 0.0;
};

// Exhaustive switching-sequence posterior: one conditional Kalman filter per
// model sequence (M^T of them, capped at 10^4 -> ResourceError), weighted by
// switch-prior probability times likelihood. Exact but exponential in T.
EnumerationResult enumerate_slds_posterior(const ModelBank& bank, const Matrix& Pi,
                                           const MeasurementModel& meas,
                                           const TimeGrid& grid,
                                           const Vector& initial_model_probs = Vector());

}  // namespace slfm
