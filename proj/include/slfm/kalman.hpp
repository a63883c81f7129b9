#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "slfm/lfm.hpp"
#include "slfm/matrixnum.hpp"

namespace slfm {

// Observation grid: strictly increasing times with one observation vector per
// time. NaN entries mark missing values; a fully-NaN vector is a latent grid
// point that only shapes the posterior.
struct TimeGrid {
  Vector times;
  std::vector<Vector> y;

  int size() const { return static_cast<int>(times.size()); }
};

// Throws InvalidInputError unless times are strictly increasing, finite, and
// each observation vector has obs_dim entries.
void validate_grid(const TimeGrid& grid, int obs_dim);

// Discretized transitions for one (F, L, Qc) triple, cached per step length.
// Keys are quantized to 12 significant digits, so bitwise-identical step
// lengths always share one entry; regular grids cost a single discretization.
class TransitionCache {
 public:
  TransitionCache(Matrix F, Matrix L, Vector Qc);

  std::shared_ptr<const DiscreteTransition> at(double dt);

 private:
  Matrix F_;
  Matrix L_;
  Vector Qc_;
  std::map<std::pair<std::int64_t, int>, std::shared_ptr<const DiscreteTransition>>
      cache_;
};

struct FilterResult {
  // predicted[k] is p(x_k | y_{1:k-1}) (the prior for k = 0);
  // filtered[k] is p(x_k | y_{1:k}).
  std::vector<Gaussian> predicted;
  std::vector<Gaussian> filtered;
  // transitions[k] carried the state from step k-1 to k (null for k = 0).
  std::vector<std::shared_ptr<const DiscreteTransition>> transitions;
  Vector loglik_increments;
  double loglik = 0.0;
};

struct SmootherResult {
  std::vector<Gaussian> smoothed;
};

// One prediction step: mean A m, covariance A P A^T + Q (symmetrized).
Gaussian kf_predict(const Gaussian& state, const DiscreteTransition& trans);

// One measurement update with per-entry missing-data masking (NaN entries of
// y drop the corresponding rows of H and R). Returns the posterior and the
// log-likelihood increment log N(y_obs; H m, H P H^T + R); a fully missing
// observation returns the state unchanged with increment 0. Uses the
// Joseph-stabilized covariance form.
std::pair<Gaussian, double> kf_update(const Gaussian& state, const Vector& y,
                                      const MeasurementModel& meas);

// Forward pass over the grid, starting from the model prior located at the
// first grid time (the first step is update-only).
FilterResult kalman_filter(const ContinuousModel& model, const MeasurementModel& meas,
                           const TimeGrid& grid);

// One backward smoothing combination: given the filtered state at k, the
// predicted state at k+1, the smoothed state at k+1 and the transition A
// used between them, returns the smoothed state at k.
Gaussian rts_step(const Gaussian& filtered, const Gaussian& predicted_next,
                  const Gaussian& smoothed_next, const Matrix& A);

// Backward pass reusing the filter's stored predictions and transitions.
SmootherResult rts_smoother(const ContinuousModel& model, const FilterResult& filt,
                            const TimeGrid& grid);

// Smoothed marginal at an arbitrary time, computed by inserting t_star into
// the grid as a fully-missing observation (or reusing the matching grid
// point when t_star coincides with one). t_star must not precede the grid.
Gaussian predict_at(const ContinuousModel& model, const MeasurementModel& meas,
                    const TimeGrid& grid, double t_star);

// Known switch times with optional per-switch reset covariance for the whole
// force block (empty matrix selects the model's stationary force prior).
struct SwitchSchedule {
  struct Entry {
    double time = 0.0;
    Matrix reset_prior;
  };
  std::vector<Entry> entries;
};

struct KnownSwitchResult {
  TimeGrid grid;  // input grid with switch times inserted
  FilterResult filter;
  SmootherResult smoother;
};

// Output-block submodel (F, L) of the augmented model: the top-left drift
// block and the force-coupling columns, i.e. the matrices the reset
// transition discretizes over a crossing step.
std::pair<Matrix, Matrix> output_submodel(const ContinuousModel& model);

// Reset transition over a step of length dt: the output block evolves by the
// discretized output submodel, the force block is zeroed and re-primed with
// reset_prior (the force-block covariance).
DiscreteTransition reset_transition(const ContinuousModel& model, double dt,
                                    const Matrix& reset_prior);

// Force-block covariance of the model's initial prior (the default reset
// covariance).
Matrix default_reset_prior(const ContinuousModel& model);

// Filtering/smoothing with known switch points: each switch time is inserted
// into the grid, and the prediction step arriving at it uses the reset
// transition instead of the regular one.
KnownSwitchResult known_switch_filter(const ContinuousModel& model,
                                      const MeasurementModel& meas,
                                      const TimeGrid& grid,
                                      const SwitchSchedule& schedule);

}  // namespace slfm
