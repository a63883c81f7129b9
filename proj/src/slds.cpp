#include "slfm/slds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "slfm/errors.hpp"
#include "slfm/priors.hpp"

namespace slfm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Same 12-significant-digit step-length key as TransitionCache.
std::pair<std::int64_t, int> quantize_dt(double dt) {
  int exponent = 0;
  const double mantissa = std::frexp(dt, &exponent);
  return {std::llround(mantissa * 1e12), exponent};
}

void validate_switch_prior(const Matrix& Pi, int M) {
  if (Pi.rows() != M || Pi.cols() != M) {
    throw InvalidInputError("switch prior: matrix must be " +
                            std::to_string(M) + "x" + std::to_string(M));
  }
  for (int s = 0; s < M; ++s) {
    for (int j = 0; j < M; ++j) {
      if (!(Pi(s, j) >= 0.0)) {
        throw InvalidInputError("switch prior: negative transition probability");
      }
    }
    if (std::abs(Pi.row(s).sum() - 1.0) > 1e-9) {
      throw InvalidInputError("switch prior: row " + std::to_string(s) +
                              " does not sum to 1");
    }
  }
}

// Uniform over the regular models; the reset model gets zero initial mass
// because the first sample has no preceding interval to switch in.
Vector default_initial_probs(const ModelBank& bank) {
  Vector p = Vector::Zero(bank.model_count());
  p.head(bank.regular_count()).setConstant(1.0 / bank.regular_count());
  return p;
}

// Internal per-component bookkeeping with log weights.
struct LogComp {
  double lw = kNegInf;
  Gaussian state;
};

}  // namespace

ResetTransitionCache::ResetTransitionCache(const ContinuousModel& model,
                                           Matrix reset_prior)
    : model_(model), reset_prior_(std::move(reset_prior)) {}

std::shared_ptr<const DiscreteTransition> ResetTransitionCache::at(double dt) {
  const auto key = quantize_dt(dt);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto trans = std::make_shared<DiscreteTransition>(
      reset_transition(model_, dt, reset_prior_));
  cache_.emplace(key, trans);
  return trans;
}

Vector resolve_initial_probs(const ModelBank& bank, const Vector& given) {
  if (given.size() == 0) return default_initial_probs(bank);
  if (given.size() != bank.model_count()) {
    throw InvalidInputError("initial model distribution has wrong size");
  }
  double sum = 0.0;
  for (int s = 0; s < given.size(); ++s) {
    if (!(given(s) >= 0.0)) {
      throw InvalidInputError("initial model distribution must be nonnegative");
    }
    sum += given(s);
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInputError("initial model distribution must sum to 1");
  }
  return given;
}

ModelBank build_model_bank(const OutputModelSpec& output_spec,
                           const std::vector<double>& lengthscales, double nu,
                           double sigma2, const Matrix& reset_prior) {
  const int L = static_cast<int>(lengthscales.size());
  const int R = output_spec.R;
  if (L < 1) {
    throw InvalidInputError("build_model_bank: need at least one length-scale");
  }
  if (R < 1) {
    throw InvalidInputError("build_model_bank: need at least one force");
  }
  long long count = 1;
  for (int r = 0; r < R; ++r) {
    count *= L;
    if (count > 4096) {
      throw ResourceError("build_model_bank: too many length-scale assignments");
    }
  }

  const auto [F, L_mat] = build_output_ssm(output_spec);

  ModelBank bank;
  bank.lengthscales = lengthscales;
  bank.models.reserve(static_cast<size_t>(count) + 1);
  for (long long m = 0; m < count; ++m) {
    // Lexicographic assignment: the first force varies slowest.
    std::vector<int> assign(R);
    long long rem = m;
    for (int r = R - 1; r >= 0; --r) {
      assign[r] = static_cast<int>(rem % L);
      rem /= L;
    }
    std::vector<PriorSSM> priors;
    priors.reserve(R);
    for (int r = 0; r < R; ++r) {
      priors.push_back(matern_ssm({nu, lengthscales[assign[r]], sigma2}));
    }
    bank.models.push_back(augment(F, L_mat, priors, 1.0));
    bank.assignments.push_back(std::move(assign));
  }

  // The reset model coasts the outputs and re-primes the force block. Its
  // dynamics and default force prior are taken from the first listed
  // length-scale.
  ContinuousModel reset = bank.models.front();
  const int p = reset.layout.force_block_dim();
  Matrix prior = reset_prior.size() > 0 ? reset_prior : default_reset_prior(reset);
  if (prior.rows() != p || prior.cols() != p) {
    throw InvalidInputError("build_model_bank: reset covariance must be " +
                            std::to_string(p) + "x" + std::to_string(p));
  }
  if ((prior - prior.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * (1.0 + prior.cwiseAbs().maxCoeff())) {
    throw InvalidInputError("build_model_bank: reset covariance must be symmetric");
  }
  prior = symmetrize(prior);
  reset.prior.cov.bottomRightCorner(p, p) = prior;
  bank.models.push_back(std::move(reset));
  bank.reset_prior = std::move(prior);
  return bank;
}

Matrix transition_matrix(const SwitchTransitionSpec& spec, int M) {
  const int n_reg = static_cast<int>(spec.a.size());
  if (M != n_reg + 1) {
    throw InvalidInputError(
        "transition_matrix: need one stay probability per regular model");
  }
  if (spec.c.size() != n_reg) {
    throw InvalidInputError(
        "transition_matrix: need one reset-exit probability per regular model");
  }
  for (int s = 0; s < n_reg; ++s) {
    if (!(spec.a(s) >= 0.0 && spec.a(s) <= 1.0)) {
      throw InvalidInputError("transition_matrix: stay probabilities must lie in [0, 1]");
    }
    if (!(spec.c(s) >= 0.0 && spec.c(s) <= 1.0)) {
      throw InvalidInputError("transition_matrix: exit probabilities must lie in [0, 1]");
    }
  }

  Matrix Pi = Matrix::Zero(M, M);
  for (int s = 0; s < n_reg; ++s) {
    Pi(s, s) = spec.a(s);
    Pi(s, M - 1) = 1.0 - spec.a(s);
  }
  // The reset model never repeats: it hands control back to a regular model
  // after exactly one step.
  Pi.row(M - 1).head(n_reg) = spec.c.transpose();

  for (int s = 0; s < M; ++s) {
    if (std::abs(Pi.row(s).sum() - 1.0) > 1e-9) {
      throw InvalidInputError("transition_matrix: row " + std::to_string(s) +
                              " does not sum to 1");
    }
  }
  return Pi;
}

std::vector<MixtureComponent> collapse(const std::vector<MixtureComponent>& comps,
                                       int K) {
  if (K < 1) throw InvalidInputError("collapse: target count must be at least 1");
  const int N = static_cast<int>(comps.size());
  if (N <= K) return comps;
  for (const auto& c : comps) {
    if (!(c.w >= 0.0)) {
      throw InvalidInputError("collapse: weights must be nonnegative");
    }
  }

  // Retain the K-1 heaviest components verbatim; stable sort keeps the lower
  // index on ties.
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return comps[a].w > comps[b].w; });
  std::vector<char> keep(N, 0);
  for (int j = 0; j < K - 1; ++j) keep[order[j]] = 1;

  std::vector<MixtureComponent> out;
  out.reserve(K);
  for (int i = 0; i < N; ++i) {
    if (keep[i]) out.push_back(comps[i]);
  }

  // Merge the rest into one moment-matched Gaussian (appended last).
  double w_merged = 0.0;
  for (int i = 0; i < N; ++i) {
    if (!keep[i]) w_merged += comps[i].w;
  }
  MixtureComponent merged;
  merged.w = w_merged;
  if (w_merged > 0.0) {
    const int n = comps.front().state.dim();
    Vector mean = Vector::Zero(n);
    for (int i = 0; i < N; ++i) {
      if (!keep[i]) mean += comps[i].w * comps[i].state.mean;
    }
    mean /= w_merged;
    Matrix cov = Matrix::Zero(n, n);
    for (int i = 0; i < N; ++i) {
      if (keep[i]) continue;
      const Vector d = comps[i].state.mean - mean;
      cov += comps[i].w * (comps[i].state.cov + d * d.transpose());
    }
    merged.state.mean = std::move(mean);
    merged.state.cov = symmetrize(cov / w_merged);
  } else {
    // Zero-mass remainder: keep the heaviest dropped shape as a placeholder.
    merged.state = comps[order[K - 1]].state;
  }
  out.push_back(std::move(merged));
  return out;
}

AdfResult adf(const ModelBank& bank, const Matrix& Pi,
              const MeasurementModel& meas, const TimeGrid& grid, int I,
              const Vector& initial_model_probs) {
  if (I < 1) throw InvalidInputError("adf: component budget must be at least 1");
  const int M = bank.model_count();
  validate_switch_prior(Pi, M);
  validate_grid(grid, meas.obs_dim());
  const Vector init = resolve_initial_probs(bank, initial_model_probs);

  const int T = grid.size();
  AdfResult out;
  out.steps.resize(T);
  out.model_probs = Matrix::Zero(T, M);
  out.loglik_increments = Vector::Zero(T);
  out.step_filter_calls.assign(T, 0);

  std::vector<TransitionCache> caches;
  caches.reserve(M - 1);
  for (int s = 0; s + 1 < M; ++s) {
    caches.emplace_back(bank.models[s].F_a, bank.models[s].L_a, bank.models[s].Qc);
  }
  ResetTransitionCache reset_cache(bank.models[bank.reset_index()],
                                   bank.reset_prior);

  std::vector<std::vector<LogComp>> cur(M);
  for (int k = 0; k < T; ++k) {
    std::vector<std::vector<LogComp>> branches(M);
    if (k == 0) {
      for (int s = 0; s < M; ++s) {
        if (init(s) <= 0.0) continue;
        auto [updated, inc] = kf_update(bank.models[s].prior, grid.y[0], meas);
        branches[s].push_back({std::log(init(s)) + inc, std::move(updated)});
        ++out.step_filter_calls[0];
      }
    } else {
      const double dt = grid.times(k) - grid.times(k - 1);
      for (int s = 0; s < M; ++s) {
        const auto trans =
            (s == bank.reset_index()) ? reset_cache.at(dt) : caches[s].at(dt);
        for (int s0 = 0; s0 < M; ++s0) {
          const double pi = Pi(s0, s);
          if (pi <= 0.0) continue;  // pruned: spawns no branch
          const double log_pi = std::log(pi);
          for (const auto& comp : cur[s0]) {
            const Gaussian pred = kf_predict(comp.state, *trans);
            auto [updated, inc] = kf_update(pred, grid.y[k], meas);
            branches[s].push_back({comp.lw + log_pi + inc, std::move(updated)});
            ++out.step_filter_calls[k];
          }
        }
      }
    }

    // Max-shifted normalization across all branches of the step.
    double shift = kNegInf;
    for (const auto& per_model : branches) {
      for (const auto& c : per_model) shift = std::max(shift, c.lw);
    }
    if (!std::isfinite(shift)) {
      throw NumericalError("adf: every branch weight vanished at step " +
                           std::to_string(k));
    }
    double total = 0.0;
    for (const auto& per_model : branches) {
      for (const auto& c : per_model) total += std::exp(c.lw - shift);
    }
    out.loglik_increments(k) = shift + std::log(total);

    GaussianMixture& mix = out.steps[k];
    mix.by_model.assign(M, {});
    mix.model_probs = Vector::Zero(M);
    for (int s = 0; s < M; ++s) {
      double mass = 0.0;
      for (const auto& c : branches[s]) mass += std::exp(c.lw - shift);
      mass /= total;
      mix.model_probs(s) = mass;
      if (mass <= 0.0) continue;
      std::vector<MixtureComponent> comps;
      comps.reserve(branches[s].size());
      for (const auto& c : branches[s]) {
        const double w = std::exp(c.lw - shift) / (total * mass);
        if (w > 0.0) comps.push_back({w, c.state});
      }
      auto kept = collapse(comps, I);
      for (auto& c : kept) c.w *= mass;
      mix.by_model[s] = std::move(kept);
    }
    out.model_probs.row(k) = mix.model_probs.transpose();

    cur.assign(M, {});
    for (int s = 0; s < M; ++s) {
      for (const auto& c : mix.by_model[s]) {
        if (c.w > 0.0) cur[s].push_back({std::log(c.w), c.state});
      }
    }
  }
  out.loglik = out.loglik_increments.sum();
  return out;
}

EcResult ec(const ModelBank& bank, const Matrix& Pi,
            const MeasurementModel& meas, const TimeGrid& grid,
            const AdfResult& adf_result, int J) {
  if (J < 1) throw InvalidInputError("ec: component budget must be at least 1");
  const int M = bank.model_count();
  validate_switch_prior(Pi, M);
  validate_grid(grid, meas.obs_dim());
  const int T = grid.size();
  if (static_cast<int>(adf_result.steps.size()) != T) {
    throw InvalidInputError("ec: filter result does not match the grid");
  }

  EcResult out;
  out.steps.resize(T);
  out.model_probs = Matrix::Zero(T, M);
  out.steps[T - 1] = adf_result.steps[T - 1];
  out.model_probs.row(T - 1) = adf_result.steps[T - 1].model_probs.transpose();

  std::vector<TransitionCache> caches;
  caches.reserve(M - 1);
  for (int s = 0; s + 1 < M; ++s) {
    caches.emplace_back(bank.models[s].F_a, bank.models[s].L_a, bank.models[s].Qc);
  }
  ResetTransitionCache reset_cache(bank.models[bank.reset_index()],
                                   bank.reset_prior);

  for (int k = T - 2; k >= 0; --k) {
    const double dt = grid.times(k + 1) - grid.times(k);
    const GaussianMixture& filt = adf_result.steps[k];
    const GaussianMixture& next_mix = out.steps[k + 1];

    std::vector<std::vector<MixtureComponent>> acc(M);
    for (int s1 = 0; s1 < M; ++s1) {
      if (next_mix.by_model[s1].empty()) continue;
      const auto trans =
          (s1 == bank.reset_index()) ? reset_cache.at(dt) : caches[s1].at(dt);
      for (const auto& smoothed : next_mix.by_model[s1]) {
        if (smoothed.w <= 0.0) continue;
        // One backward combination per filtered component that can lead into
        // this smoothed component; the mixing weight evaluates the smoothed
        // mean under the pair's predictive density.
        struct Branch {
          int s0;
          double lw;
          Gaussian state;
        };
        std::vector<Branch> branches;
        for (int s0 = 0; s0 < M; ++s0) {
          const double pi = Pi(s0, s1);
          if (pi <= 0.0) continue;
          const double log_pi = std::log(pi);
          for (const auto& fc : filt.by_model[s0]) {
            if (fc.w <= 0.0) continue;
            const Gaussian pred = kf_predict(fc.state, *trans);
            const double lw =
                std::log(fc.w) + log_pi +
                gaussian_logpdf(smoothed.state.mean, pred.mean, pred.cov);
            branches.push_back(
                {s0, lw, rts_step(fc.state, pred, smoothed.state, trans->A)});
          }
        }
        double shift = kNegInf;
        for (const auto& b : branches) shift = std::max(shift, b.lw);
        if (!std::isfinite(shift)) {
          throw NumericalError("ec: no source branch for a smoothed component at step " +
                               std::to_string(k));
        }
        double group_total = 0.0;
        for (const auto& b : branches) group_total += std::exp(b.lw - shift);
        for (auto& b : branches) {
          const double w = smoothed.w * std::exp(b.lw - shift) / group_total;
          if (w > 0.0) acc[b.s0].push_back({w, std::move(b.state)});
        }
      }
    }

    double total = 0.0;
    for (const auto& per_model : acc) {
      for (const auto& c : per_model) total += c.w;
    }
    if (!(total > 0.0)) {
      throw NumericalError("ec: smoothed weights vanished at step " +
                           std::to_string(k));
    }

    GaussianMixture& mix = out.steps[k];
    mix.by_model.assign(M, {});
    mix.model_probs = Vector::Zero(M);
    for (int s = 0; s < M; ++s) {
      double mass = 0.0;
      for (const auto& c : acc[s]) mass += c.w;
      mass /= total;
      mix.model_probs(s) = mass;
      if (mass <= 0.0) continue;
      std::vector<MixtureComponent> comps;
      comps.reserve(acc[s].size());
      for (const auto& c : acc[s]) {
        const double w = c.w / (total * mass);
        if (w > 0.0) comps.push_back({w, c.state});
      }
      auto kept = collapse(comps, J);
      for (auto& c : kept) c.w *= mass;
      mix.by_model[s] = std::move(kept);
    }
    out.model_probs.row(k) = mix.model_probs.transpose();
  }
  return out;
}

std::vector<double> extract_switch_points(const Vector& times,
                                          const Vector& reset_probs,
                                          double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidInputError("extract_switch_points: threshold must lie in (0, 1)");
  }
  if (times.size() != reset_probs.size()) {
    throw InvalidInputError("extract_switch_points: times and probabilities must align");
  }
  std::vector<double> out;
  const int T = static_cast<int>(times.size());
  int k = 0;
  while (k < T) {
    if (reset_probs(k) > threshold) {
      // Merge the run into its highest-probability step (earliest on ties).
      int best = k;
      int j = k;
      while (j < T && reset_probs(j) > threshold) {
        if (reset_probs(j) > reset_probs(best)) best = j;
        ++j;
      }
      out.push_back(times(best));
      k = j;
    } else {
      ++k;
    }
  }
  return out;
}

}  // namespace slfm
