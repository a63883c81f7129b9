#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "slfm/kalman.hpp"
#include "slfm/lfm.hpp"
#include "slfm/matrixnum.hpp"

namespace slfm {

// Bank of candidate models for switching inference: one model per
// length-scale assignment of the forces, plus a terminal reset model that
// re-draws the force block from a fixed prior while the outputs coast.
struct ModelBank {
  // Regular models first, the reset model last. All share the output
  // parameters and state layout; regular models differ only in force
  // length-scales.
  std::vector<ContinuousModel> models;
  // Per regular model: the index into `lengthscales` assigned to each force.
  std::vector<std::vector<int>> assignments;
  std::vector<double> lengthscales;
  // Covariance installed on the force block by a reset step.
  Matrix reset_prior;

  int model_count() const { return static_cast<int>(models.size()); }
  int regular_count() const { return model_count() - 1; }
  int reset_index() const { return model_count() - 1; }
};

// Enumerates all L^R length-scale assignments in lexicographic order (the
// first force varies slowest) and appends the reset model. The reset model's
// force prior defaults to the stationary prior under the first listed
// length-scale; pass `reset_prior` (p x p) to override.
ModelBank build_model_bank(const OutputModelSpec& output_spec,
                           const std::vector<double>& lengthscales, double nu,
                           double sigma2, const Matrix& reset_prior = Matrix());

// Markov switch prior: each regular model either stays (probability a_s) or
// enters the reset model (1 - a_s); the reset model exits to regular model s
// with probability c_s and never repeats.
struct SwitchTransitionSpec {
  Vector a;  // stay probability per regular model
  Vector c;  // reset-exit probability per regular model
};

// Row-stochastic M x M matrix with rows indexed by the source model.
Matrix transition_matrix(const SwitchTransitionSpec& spec, int M);

// Discretized reset transitions cached per step length, mirroring
// TransitionCache for the regular models. Holds a reference to the model, so
// the bank must outlive the cache.
class ResetTransitionCache {
 public:
  ResetTransitionCache(const ContinuousModel& model, Matrix reset_prior);

  std::shared_ptr<const DiscreteTransition> at(double dt);

 private:
  const ContinuousModel& model_;
  Matrix reset_prior_;
  std::map<std::pair<std::int64_t, int>,
           std::shared_ptr<const DiscreteTransition>>
      cache_;
};

// Validates a user-supplied initial model distribution (size M, nonnegative,
// summing to 1), or returns the default for an empty vector: uniform over the
// regular models with zero mass on the reset model, since the first sample
// has no preceding interval to switch in.
Vector resolve_initial_probs(const ModelBank& bank, const Vector& given);

struct MixtureComponent {
  double w = 0.0;  // linear weight
  Gaussian state;
};

// Per-model weighted Gaussian mixture for one time step. Component weights
// are globally normalized: summing over all models and components gives 1.
struct GaussianMixture {
  std::vector<std::vector<MixtureComponent>> by_model;
  Vector model_probs;  // per-model totals of the component weights
};

// Reduces a mixture to at most K components: the K-1 largest-weight
// components are kept verbatim (ties broken toward the lower index) and the
// remainder is merged into a single moment-matched Gaussian appended at the
// end. Total weight, overall mean, and overall covariance are preserved.
// N <= K returns the input unchanged.
std::vector<MixtureComponent> collapse(const std::vector<MixtureComponent>& comps,
                                       int K);

struct AdfResult {
  std::vector<GaussianMixture> steps;  // filtered mixture per time step
  Matrix model_probs;                  // T x M, row k = p(model | data up to k)
  Vector loglik_increments;            // per-step log normalizers
  double loglik = 0.0;
  // Instrumentation: predict+update branch evaluations per step.
  std::vector<long> step_filter_calls;
};

// Assumed-density (Gaussian-sum) forward pass over the model bank. Per step,
// every surviving component of every source model is pushed through every
// destination model's transition (the reset model uses the reset
// construction), reweighted by the switch prior and the observation
// likelihood, and each destination's mixture is collapsed back to at most I
// components. Weights are carried in log space. `initial_model_probs` (size
// M) defaults to uniform over the regular models with zero mass on the reset
// model, since the first sample has no preceding interval to switch in.
AdfResult adf(const ModelBank& bank, const Matrix& Pi,
              const MeasurementModel& meas, const TimeGrid& grid, int I,
              const Vector& initial_model_probs = Vector());

struct EcResult {
  std::vector<GaussianMixture> steps;  // smoothed mixture per time step
  Matrix model_probs;                  // T x M, row k = p(model | all data)
};

// Expectation-correction backward pass over an ADF result. Each smoothed
// component at step k+1 is combined with each filtered component at step k
// through one backward smoothing step under the destination model's
// dynamics; the per-pair mixing weight evaluates the transition density of
// the smoothed mean against the pair's predictive distribution. Per-model
// collapse keeps at most J components; the final step equals the filtered
// mixture.
EcResult ec(const ModelBank& bank, const Matrix& Pi,
            const MeasurementModel& meas, const TimeGrid& grid,
            const AdfResult& adf_result, int J);

// Turns per-step reset-model probabilities into switch times: each maximal
// run of consecutive steps with probability strictly above the threshold
// contributes the time of its highest-probability step (earliest on ties).
std::vector<double> extract_switch_points(const Vector& times,
                                          const Vector& reset_probs,
                                          double threshold);

}  // namespace slfm
