#include "slfm/sim.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "slfm/errors.hpp"
#include "slfm/rng.hpp"
#include "slfm/slds.hpp"

namespace slfm {

namespace {

void validate_times(const Vector& times) {
  if (times.size() < 1) throw InvalidInputError("simulate: need at least one time");
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times(k))) throw InvalidInputError("simulate: times must be finite");
    if (k > 0 && !(times(k) > times(k - 1))) {
      throw InvalidInputError("simulate: times must be strictly increasing");
    }
  }
}

// Square roots of transition noise, cached per transition object.
class NoiseSqrtCache {
 public:
  const Matrix& of(const std::shared_ptr<const DiscreteTransition>& trans) {
    auto it = cache_.find(trans.get());
    if (it == cache_.end()) {
      it = cache_.emplace(trans.get(), psd_sqrt(trans->Q)).first;
    }
    return it->second;
  }

 private:
  std::map<const DiscreteTransition*, Matrix> cache_;
};

}  // namespace

SimulationOutput simulate_lfm(const ContinuousModel& model,
                              const MeasurementModel& meas, const Vector& times,
                              std::uint64_t seed) {
  validate_times(times);
  if (meas.H.cols() != model.dim()) {
    throw InvalidInputError("simulate_lfm: measurement operator does not match state");
  }
  const int T = static_cast<int>(times.size());
  const int n = model.dim();
  const int D = meas.obs_dim();

  Rng init_rng = substream(seed, kStreamInit);
  Rng process_rng = substream(seed, kStreamProcess);
  Rng obs_rng = substream(seed, kStreamObservation);

  SimulationOutput out;
  out.times = times;
  out.seed = seed;
  out.states.reserve(T);
  out.obs.reserve(T);

  const Matrix prior_sqrt = psd_sqrt(model.prior.cov);
  const Matrix obs_sqrt = psd_sqrt(meas.R);
  TransitionCache cache(model.F_a, model.L_a, model.Qc);
  NoiseSqrtCache noise_sqrt;

  Vector x = model.prior.mean + prior_sqrt * init_rng.gauss_vector(n);
  for (int k = 0; k < T; ++k) {
    if (k > 0) {
      const auto trans = cache.at(times(k) - times(k - 1));
      x = trans->A * x + noise_sqrt.of(trans) * process_rng.gauss_vector(n);
    }
    out.states.push_back(x);
    out.obs.push_back(meas.H * x + obs_sqrt * obs_rng.gauss_vector(D));
  }
  return out;
}

JointGaussian batch_joint(const ContinuousModel& model, const Vector& times) {
  validate_times(times);
  const int T = static_cast<int>(times.size());
  const int n = model.dim();
  if (n * T > 600) {
    throw ResourceError("batch_joint: joint dimension exceeds the dense-oracle cap");
  }

  TransitionCache cache(model.F_a, model.L_a, model.Qc);
  JointGaussian joint;
  joint.state_dim = n;
  joint.horizon = T;
  joint.mean = Vector::Zero(n * T);
  joint.cov = Matrix::Zero(n * T, n * T);

  std::vector<Gaussian> marginal(T);
  marginal[0] = model.prior;
  joint.mean.segment(0, n) = model.prior.mean;
  joint.cov.topLeftCorner(n, n) = model.prior.cov;

  for (int k = 1; k < T; ++k) {
    const auto trans = cache.at(times(k) - times(k - 1));
    marginal[k] = kf_predict(marginal[k - 1], *trans);
    joint.mean.segment(n * k, n) = marginal[k].mean;
    joint.cov.block(n * k, n * k, n, n) = marginal[k].cov;
    // Cross blocks: Cov(x_j, x_k) = Cov(x_j, x_{k-1}) A^T, seeded by the
    // diagonal block at j = k-1.
    for (int j = 0; j < k; ++j) {
      const Matrix prev = (j == k - 1)
                              ? marginal[j].cov
                              : Matrix(joint.cov.block(n * j, n * (k - 1), n, n));
      const Matrix cross = prev * trans->A.transpose();
      joint.cov.block(n * j, n * k, n, n) = cross;
      joint.cov.block(n * k, n * j, n, n) = cross.transpose();
    }
  }
  return joint;
}

BatchPosterior batch_condition(const JointGaussian& joint,
                               const std::vector<Vector>& y,
                               const MeasurementModel& meas) {
  const int T = joint.horizon;
  const int n = joint.state_dim;
  if (static_cast<int>(y.size()) != T) {
    throw InvalidInputError("batch_condition: observation count mismatch");
  }
  // Stack the observed (non-NaN) entries over all times.
  struct ObsRow {
    int time;
    Eigen::Index component;
  };
  std::vector<ObsRow> rows;
  for (int k = 0; k < T; ++k) {
    if (y[k].size() != meas.obs_dim()) {
      throw InvalidInputError("batch_condition: observation dimension mismatch");
    }
    for (Eigen::Index i = 0; i < y[k].size(); ++i) {
      if (!std::isnan(y[k](i))) rows.push_back({k, i});
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());

  BatchPosterior post;
  post.marginals.resize(T);
  if (m == 0) {
    for (int k = 0; k < T; ++k) {
      post.marginals[k].mean = joint.mean.segment(n * k, n);
      post.marginals[k].cov = joint.cov.block(n * k, n * k, n, n);
    }
    post.loglik = 0.0;
    return post;
  }

  Matrix H_all = Matrix::Zero(m, n * T);
  Matrix R_all = Matrix::Zero(m, m);
  Vector y_all(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    H_all.row(a).segment(n * rows[a].time, n) = meas.H.row(rows[a].component);
    y_all(a) = y[rows[a].time](rows[a].component);
    for (Eigen::Index b = 0; b < m; ++b) {
      if (rows[a].time == rows[b].time) {
        R_all(a, b) = meas.R(rows[a].component, rows[b].component);
      }
    }
  }

  const Matrix cross = joint.cov * H_all.transpose();          // (nT) x m
  const Matrix S = symmetrize(H_all * cross + R_all);          // m x m
  const Vector mean_obs = H_all * joint.mean;
  const auto llt = llt_with_jitter(S);
  const Vector alpha = llt.solve(y_all - mean_obs);
  const Vector cond_mean = joint.mean + cross * alpha;
  const Matrix cond_cov = symmetrize(joint.cov - cross * llt.solve(cross.transpose()));

  for (int k = 0; k < T; ++k) {
    post.marginals[k].mean = cond_mean.segment(n * k, n);
    post.marginals[k].cov = cond_cov.block(n * k, n * k, n, n);
  }
  post.loglik = gaussian_logpdf(y_all, mean_obs, S);
  return post;
}

std::vector<Vector> batch_condition_means(const ContinuousModel& model,
                                          const TimeGrid& grid,
                                          const MeasurementModel& meas) {
  validate_grid(grid, meas.obs_dim());
  const int T = grid.size();
  const int n = model.dim();

  // Per-time masked measurement operators and prior moments.
  std::vector<Matrix> H(T);
  std::vector<Matrix> R(T);
  std::vector<Vector> yv(T);
  std::vector<Eigen::Index> offset(T + 1, 0);
  for (int k = 0; k < T; ++k) {
    std::vector<Eigen::Index> obs;
    for (Eigen::Index i = 0; i < grid.y[k].size(); ++i) {
      if (!std::isnan(grid.y[k](i))) obs.push_back(i);
    }
    const Eigen::Index mk = static_cast<Eigen::Index>(obs.size());
    H[k] = Matrix(mk, n);
    R[k] = Matrix(mk, mk);
    yv[k] = Vector(mk);
    for (Eigen::Index a = 0; a < mk; ++a) {
      H[k].row(a) = meas.H.row(obs[a]);
      yv[k](a) = grid.y[k](obs[a]);
      for (Eigen::Index b = 0; b < mk; ++b) R[k](a, b) = meas.R(obs[a], obs[b]);
    }
    offset[k + 1] = offset[k] + mk;
  }
  const Eigen::Index m = offset[T];

  TransitionCache cache(model.F_a, model.L_a, model.Qc);
  std::vector<std::shared_ptr<const DiscreteTransition>> trans(T);
  std::vector<Vector> prior_mean(T);
  std::vector<Matrix> prior_cov(T);
  prior_mean[0] = model.prior.mean;
  prior_cov[0] = model.prior.cov;
  for (int k = 1; k < T; ++k) {
    trans[k] = cache.at(grid.times(k) - grid.times(k - 1));
    prior_mean[k] = trans[k]->A * prior_mean[k - 1];
    prior_cov[k] =
        symmetrize(trans[k]->A * prior_cov[k - 1] * trans[k]->A.transpose() +
                   trans[k]->Q);
  }

  if (m == 0) return prior_mean;

  // Observation-space Gram matrix: block (j,k) = H_j Cov(x_j, x_k) H_k^T,
  // with Cov(x_j, x_k) = P_j Phi_{j->k}^T accumulated column by column.
  Matrix S = Matrix::Zero(m, m);
  Vector resid(m);
  for (int k = 0; k < T; ++k) {
    if (yv[k].size() == 0) continue;
    resid.segment(offset[k], yv[k].size()) = yv[k] - H[k] * prior_mean[k];
    // Diagonal block.
    S.block(offset[k], offset[k], yv[k].size(), yv[k].size()) =
        H[k] * prior_cov[k] * H[k].transpose() + R[k];
    // Off-diagonal blocks for j < k: w_j = Phi_{j->k}^T H_k^T by backward
    // accumulation.
    Matrix w = H[k].transpose();  // n x m_k
    for (int j = k - 1; j >= 0; --j) {
      w = trans[j + 1]->A.transpose() * w;
      if (yv[j].size() == 0) continue;
      const Matrix blk = H[j] * (prior_cov[j] * w);
      S.block(offset[j], offset[k], yv[j].size(), yv[k].size()) = blk;
      S.block(offset[k], offset[j], yv[k].size(), yv[j].size()) = blk.transpose();
    }
  }

  const auto llt = llt_with_jitter(symmetrize(S));
  const Vector alpha = llt.solve(resid);

  // Posterior mean_k = prior_mean_k + sum_j Cov(x_k, x_j) H_j^T alpha_j,
  // split into past (j <= k) and future (j > k) accumulations.
  std::vector<Vector> u(T);
  for (int k = 0; k < T; ++k) {
    u[k] = yv[k].size() > 0
               ? Vector(H[k].transpose() * alpha.segment(offset[k], yv[k].size()))
               : Vector(Vector::Zero(n));
  }
  std::vector<Vector> mean(T);
  Vector g = prior_cov[0] * u[0];  // sum_{j<=k} Phi_{j->k} P_j u_j
  mean[0] = g;
  for (int k = 1; k < T; ++k) {
    g = trans[k]->A * g + prior_cov[k] * u[k];
    mean[k] = g;
  }
  Vector h = Vector::Zero(n);  // sum_{j>k} Phi_{k->j}^T u_j
  for (int k = T - 2; k >= 0; --k) {
    h = trans[k + 1]->A.transpose() * (u[k + 1] + h);
    mean[k] += prior_cov[k] * h;
  }
  for (int k = 0; k < T; ++k) mean[k] += prior_mean[k];
  return mean;
}

SimulationOutput simulate_slds(const ModelBank& bank, const Matrix& Pi,
                               const MeasurementModel& meas, const Vector& times,
                               std::uint64_t seed,
                               const Vector& initial_model_probs) {
  validate_times(times);
  const int M = bank.model_count();
  if (Pi.rows() != M || Pi.cols() != M) {
    throw InvalidInputError("simulate_slds: switch prior does not match the bank");
  }
  const int n = bank.models.front().dim();
  if (meas.H.cols() != n) {
    throw InvalidInputError("simulate_slds: measurement operator does not match state");
  }
  const Vector init = resolve_initial_probs(bank, initial_model_probs);
  const int T = static_cast<int>(times.size());
  const int D = meas.obs_dim();

  // The model sequence draws come from their own substream, so the state and
  // observation draws line up with simulate_lfm step for step.
  Rng switch_rng = substream(seed, kStreamSwitch);
  std::vector<int> modes(T);
  modes[0] = switch_rng.next_discrete(init);
  for (int k = 1; k < T; ++k) {
    modes[k] = switch_rng.next_discrete(Pi.row(modes[k - 1]).transpose());
  }

  Rng init_rng = substream(seed, kStreamInit);
  Rng process_rng = substream(seed, kStreamProcess);
  Rng obs_rng = substream(seed, kStreamObservation);

  std::vector<std::unique_ptr<TransitionCache>> caches;
  for (int s = 0; s + 1 < M; ++s) {
    caches.push_back(std::make_unique<TransitionCache>(
        bank.models[s].F_a, bank.models[s].L_a, bank.models[s].Qc));
  }
  ResetTransitionCache reset_cache(bank.models[bank.reset_index()],
                                   bank.reset_prior);
  NoiseSqrtCache noise_sqrt;
  const Matrix obs_sqrt = psd_sqrt(meas.R);

  SimulationOutput out;
  out.times = times;
  out.seed = seed;
  out.states.reserve(T);
  out.obs.reserve(T);
  out.model_sequence = modes;

  const Matrix prior_sqrt = psd_sqrt(bank.models[modes[0]].prior.cov);
  Vector x = bank.models[modes[0]].prior.mean + prior_sqrt * init_rng.gauss_vector(n);
  for (int k = 0; k < T; ++k) {
    if (k > 0) {
      const double dt = times(k) - times(k - 1);
      const auto trans = (modes[k] == bank.reset_index())
                             ? reset_cache.at(dt)
                             : caches[modes[k]]->at(dt);
      x = trans->A * x + noise_sqrt.of(trans) * process_rng.gauss_vector(n);
    }
    if (modes[k] == bank.reset_index()) out.switch_times.push_back(times(k));
    out.states.push_back(x);
    out.obs.push_back(meas.H * x + obs_sqrt * obs_rng.gauss_vector(D));
  }
  return out;
}

EnumerationResult enumerate_slds_posterior(const ModelBank& bank, const Matrix& Pi,
                                           const MeasurementModel& meas,
                                           const TimeGrid& grid,
                                           const Vector& initial_model_probs) {
  const int M = bank.model_count();
  if (Pi.rows() != M || Pi.cols() != M) {
    throw InvalidInputError("enumerate_slds_posterior: switch prior does not match the bank");
  }
  validate_grid(grid, meas.obs_dim());
  const Vector init = resolve_initial_probs(bank, initial_model_probs);
  const int T = grid.size();

  long long n_seq = 1;
  for (int k = 0; k < T; ++k) {
    n_seq *= M;
    if (n_seq > 10000) {
      throw ResourceError("enumerate_slds_posterior: M^T exceeds the enumeration cap");
    }
  }

  std::vector<std::unique_ptr<TransitionCache>> caches;
  for (int s = 0; s + 1 < M; ++s) {
    caches.push_back(std::make_unique<TransitionCache>(
        bank.models[s].F_a, bank.models[s].L_a, bank.models[s].Qc));
  }
  ResetTransitionCache reset_cache(bank.models[bank.reset_index()],
                                   bank.reset_prior);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  EnumerationResult out;
  out.sequences.reserve(n_seq);
  // Cumulative log weight of each sequence prefix: switch-prior probability
  // of the prefix times the likelihood of the data seen so far.
  Matrix prefix_lw(n_seq, T);

  for (long long e = 0; e < n_seq; ++e) {
    // Lexicographic decoding: the first step is the most significant digit.
    std::vector<int> seq(T);
    long long rem = e;
    for (int k = T - 1; k >= 0; --k) {
      seq[k] = static_cast<int>(rem % M);
      rem /= M;
    }

    double lw = init(seq[0]) > 0.0 ? std::log(init(seq[0])) : neg_inf;
    Gaussian state = bank.models[seq[0]].prior;
    for (int k = 0; k < T; ++k) {
      if (k > 0 && lw != neg_inf) {
        const double pi = Pi(seq[k - 1], seq[k]);
        lw = pi > 0.0 ? lw + std::log(pi) : neg_inf;
      }
      if (lw == neg_inf) {
        prefix_lw(e, k) = neg_inf;  // zero prior mass from here on
        continue;
      }
      if (k > 0) {
        const double dt = grid.times(k) - grid.times(k - 1);
        const auto trans = (seq[k] == bank.reset_index())
                               ? reset_cache.at(dt)
                               : caches[seq[k]]->at(dt);
        state = kf_predict(state, *trans);
      }
      auto [updated, inc] = kf_update(state, grid.y[k], meas);
      state = std::move(updated);
      lw += inc;
      prefix_lw(e, k) = lw;
    }
    out.sequences.push_back(std::move(seq));
  }

  // Normalized per-step marginals. Every prefix of length k+1 appears in
  // M^(T-1-k) full sequences, so the shared multiplicity cancels.
  out.filtered_model_probs = Matrix::Zero(T, M);
  out.smoothed_model_probs = Matrix::Zero(T, M);
  for (int k = 0; k < T; ++k) {
    const double shift = prefix_lw.col(k).maxCoeff();
    if (!std::isfinite(shift)) {
      throw NumericalError("enumerate_slds_posterior: all sequence weights vanished");
    }
    Vector filtered = Vector::Zero(M);
    Vector smoothed = Vector::Zero(M);
    const double final_shift = prefix_lw.col(T - 1).maxCoeff();
    for (long long e = 0; e < n_seq; ++e) {
      const int s = out.sequences[e][k];
      if (prefix_lw(e, k) != neg_inf) {
        filtered(s) += std::exp(prefix_lw(e, k) - shift);
      }
      if (prefix_lw(e, T - 1) != neg_inf) {
        smoothed(s) += std::exp(prefix_lw(e, T - 1) - final_shift);
      }
    }
    out.filtered_model_probs.row(k) = (filtered / filtered.sum()).transpose();
    out.smoothed_model_probs.row(k) = (smoothed / smoothed.sum()).transpose();
  }

  // Normalized full-sequence weights and the data log density.
  const double final_shift = prefix_lw.col(T - 1).maxCoeff();
  out.weights = Vector::Zero(n_seq);
  double total = 0.0;
  for (long long e = 0; e < n_seq; ++e) {
    if (prefix_lw(e, T - 1) != neg_inf) {
      out.weights(e) = std::exp(prefix_lw(e, T - 1) - final_shift);
      total += out.weights(e);
    }
  }
  out.weights /= total;
  out.loglik = final_shift + std::log(total);
  return out;
}

}  // namespace slfm
