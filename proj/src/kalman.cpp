#include "slfm/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slfm/errors.hpp"

namespace slfm {

namespace {

bool is_missing(double v) { return std::isnan(v); }

bool all_missing(const Vector& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!is_missing(y(i))) return false;
  }
  return true;
}

}  // namespace

void validate_grid(const TimeGrid& grid, int obs_dim) {
  const int T = grid.size();
  if (T < 1) throw InvalidInputError("grid: need at least one time point");
  if (static_cast<int>(grid.y.size()) != T) {
    throw InvalidInputError("grid: need one observation vector per time point");
  }
  for (int k = 0; k < T; ++k) {
    if (!std::isfinite(grid.times(k))) {
      throw InvalidInputError("grid: times must be finite");
    }
    if (k > 0 && !(grid.times(k) > grid.times(k - 1))) {
      throw InvalidInputError("grid: times must be strictly increasing");
    }
    if (grid.y[k].size() != obs_dim) {
      throw InvalidInputError("grid: observation dimension mismatch");
    }
    for (Eigen::Index i = 0; i < grid.y[k].size(); ++i) {
      if (std::isinf(grid.y[k](i))) {
        throw InvalidInputError("grid: observations must be finite or NaN (missing)");
      }
    }
  }
}

TransitionCache::TransitionCache(Matrix F, Matrix L, Vector Qc)
    : F_(std::move(F)), L_(std::move(L)), Qc_(std::move(Qc)) {}

std::shared_ptr<const DiscreteTransition> TransitionCache::at(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidInputError("TransitionCache: dt must be positive and finite");
  }
  // Quantize to 12 significant digits of the mantissa: identical doubles map
  // to identical keys, near-identical steps share one discretization.
  int exponent = 0;
  const double mantissa = std::frexp(dt, &exponent);
  const auto key = std::make_pair(
      static_cast<std::int64_t>(std::llround(mantissa * 1e12)), exponent);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    auto trans = std::make_shared<DiscreteTransition>(discretize(F_, L_, Qc_, dt));
    it = cache_.emplace(key, std::move(trans)).first;
  }
  return it->second;
}

Gaussian kf_predict(const Gaussian& state, const DiscreteTransition& trans) {
  const Eigen::Index n = state.mean.size();
  if (trans.A.rows() != n || trans.A.cols() != n || trans.Q.rows() != n ||
      trans.Q.cols() != n || state.cov.rows() != n) {
    throw InvalidInputError("kf_predict: dimension mismatch");
  }
  Gaussian out;
  out.mean = trans.A * state.mean;
  out.cov = symmetrize(trans.A * state.cov * trans.A.transpose() + trans.Q);
  return out;
}

std::pair<Gaussian, double> kf_update(const Gaussian& state, const Vector& y,
                                      const MeasurementModel& meas) {
  const Eigen::Index n = state.mean.size();
  if (meas.H.cols() != n || meas.H.rows() != y.size() ||
      meas.R.rows() != meas.H.rows() || meas.R.cols() != meas.H.rows()) {
    throw InvalidInputError("kf_update: dimension mismatch");
  }
  if (all_missing(y)) return {state, 0.0};

  // Row-mask the measurement operator to the observed entries.
  std::vector<Eigen::Index> obs;
  obs.reserve(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!is_missing(y(i))) obs.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(obs.size());
  Matrix H(m, n);
  Matrix R(m, m);
  Vector ym(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    H.row(a) = meas.H.row(obs[a]);
    ym(a) = y(obs[a]);
    for (Eigen::Index b = 0; b < m; ++b) R(a, b) = meas.R(obs[a], obs[b]);
  }

  const Vector predicted_obs = H * state.mean;
  const Matrix S = symmetrize(H * state.cov * H.transpose() + R);
  const auto llt = llt_with_jitter(S);
  // Gain K = P H^T S^{-1}, via S^{-1} (H P) and one transpose.
  const Matrix K = llt.solve(H * state.cov).transpose();

  Gaussian out;
  out.mean = state.mean + K * (ym - predicted_obs);
  // Joseph form keeps the covariance PSD under roundoff.
  const Matrix IKH = Matrix::Identity(n, n) - K * H;
  out.cov = symmetrize(IKH * state.cov * IKH.transpose() + K * R * K.transpose());
  const double increment = gaussian_logpdf(ym, predicted_obs, S);
  return {out, increment};
}

FilterResult kalman_filter(const ContinuousModel& model, const MeasurementModel& meas,
                           const TimeGrid& grid) {
  validate_grid(grid, meas.obs_dim());
  if (meas.H.cols() != model.dim()) {
    throw InvalidInputError("kalman_filter: measurement operator does not match state");
  }
  const int T = grid.size();
  FilterResult out;
  out.predicted.resize(T);
  out.filtered.resize(T);
  out.transitions.assign(T, nullptr);
  out.loglik_increments = Vector::Zero(T);

  TransitionCache cache(model.F_a, model.L_a, model.Qc);
  Gaussian state = model.prior;
  for (int k = 0; k < T; ++k) {
    if (k > 0) {
      auto trans = cache.at(grid.times(k) - grid.times(k - 1));
      state = kf_predict(state, *trans);
      out.transitions[k] = std::move(trans);
    }
    out.predicted[k] = state;
    auto [updated, increment] = kf_update(state, grid.y[k], meas);
    state = std::move(updated);
    out.filtered[k] = state;
    out.loglik_increments(k) = increment;
  }
  out.loglik = out.loglik_increments.sum();
  return out;
}

Gaussian rts_step(const Gaussian& filtered, const Gaussian& predicted_next,
                  const Gaussian& smoothed_next, const Matrix& A) {
  // Gain G = P_k A^T (P_{k+1|k})^{-1} through a factorization of the
  // predicted covariance; no explicit inverse.
  const auto llt = llt_with_jitter(predicted_next.cov);
  const Matrix G = llt.solve(A * filtered.cov).transpose();
  Gaussian out;
  out.mean = filtered.mean + G * (smoothed_next.mean - predicted_next.mean);
  out.cov = symmetrize(filtered.cov +
                       G * (smoothed_next.cov - predicted_next.cov) * G.transpose());
  return out;
}

SmootherResult rts_smoother(const ContinuousModel& model, const FilterResult& filt,
                            const TimeGrid& grid) {
  const int T = grid.size();
  if (static_cast<int>(filt.filtered.size()) != T ||
      static_cast<int>(filt.predicted.size()) != T) {
    throw InvalidInputError("rts_smoother: filter result does not match the grid");
  }
  if (T > 0 && filt.filtered[0].dim() != model.dim()) {
    throw InvalidInputError("rts_smoother: filter result does not match the model");
  }
  SmootherResult out;
  out.smoothed.resize(T);
  out.smoothed[T - 1] = filt.filtered[T - 1];
  for (int k = T - 2; k >= 0; --k) {
    out.smoothed[k] = rts_step(filt.filtered[k], filt.predicted[k + 1],
                               out.smoothed[k + 1], filt.transitions[k + 1]->A);
  }
  return out;
}

Gaussian predict_at(const ContinuousModel& model, const MeasurementModel& meas,
                    const TimeGrid& grid, double t_star) {
  validate_grid(grid, meas.obs_dim());
  if (!std::isfinite(t_star)) {
    throw InvalidInputError("predict_at: time must be finite");
  }
  if (t_star < grid.times(0)) {
    throw InvalidInputError("predict_at: time precedes the grid");
  }
  const int T = grid.size();
  int insert_at = T;
  for (int k = 0; k < T; ++k) {
    if (grid.times(k) == t_star) {
      // Coincident with an existing point: no insertion needed.
      const auto filt = kalman_filter(model, meas, grid);
      return rts_smoother(model, filt, grid).smoothed[k];
    }
    if (grid.times(k) > t_star) {
      insert_at = k;
      break;
    }
  }

  TimeGrid expanded;
  expanded.times = Vector(T + 1);
  expanded.y.reserve(T + 1);
  const Vector missing = Vector::Constant(
      meas.obs_dim(), std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < insert_at; ++k) {
    expanded.times(k) = grid.times(k);
    expanded.y.push_back(grid.y[k]);
  }
  expanded.times(insert_at) = t_star;
  expanded.y.push_back(missing);
  for (int k = insert_at; k < T; ++k) {
    expanded.times(k + 1) = grid.times(k);
    expanded.y.push_back(grid.y[k]);
  }
  const auto filt = kalman_filter(model, meas, expanded);
  return rts_smoother(model, filt, expanded).smoothed[insert_at];
}

std::pair<Matrix, Matrix> output_submodel(const ContinuousModel& model) {
  const int two_D = model.layout.output_block_dim();
  const int R = model.layout.forces();
  Matrix F = model.F_a.topLeftCorner(two_D, two_D);
  Matrix L(two_D, R);
  for (int r = 0; r < R; ++r) {
    L.col(r) = model.F_a.block(0, model.layout.force_offset(r), two_D, 1);
  }
  return {F, L};
}

Matrix default_reset_prior(const ContinuousModel& model) {
  const int p = model.layout.force_block_dim();
  return model.prior.cov.bottomRightCorner(p, p);
}

DiscreteTransition reset_transition(const ContinuousModel& model, double dt,
                                    const Matrix& reset_prior) {
  const int two_D = model.layout.output_block_dim();
  const int p = model.layout.force_block_dim();
  if (reset_prior.rows() != p || reset_prior.cols() != p) {
    throw InvalidInputError("reset_transition: reset covariance has wrong size");
  }
  const auto [F_out, L_out] = output_submodel(model);
  const auto d = discretize(F_out, L_out, model.Qc, dt);

  DiscreteTransition out;
  out.dt = dt;
  out.A = Matrix::Zero(model.dim(), model.dim());
  out.A.topLeftCorner(two_D, two_D) = d.A;
  out.Q = Matrix::Zero(model.dim(), model.dim());
  out.Q.topLeftCorner(two_D, two_D) = d.Q;
  out.Q.bottomRightCorner(p, p) = symmetrize(reset_prior);
  return out;
}

KnownSwitchResult known_switch_filter(const ContinuousModel& model,
                                      const MeasurementModel& meas,
                                      const TimeGrid& grid,
                                      const SwitchSchedule& schedule) {
  validate_grid(grid, meas.obs_dim());
  const int T = grid.size();
  for (size_t q = 0; q < schedule.entries.size(); ++q) {
    const double tq = schedule.entries[q].time;
    if (!(tq > grid.times(0)) || !(tq <= grid.times(T - 1))) {
      throw InvalidInputError("known_switch_filter: switch time outside the grid span");
    }
    if (q > 0 && !(tq > schedule.entries[q - 1].time)) {
      throw InvalidInputError("known_switch_filter: switch times must be increasing");
    }
  }

  // Merge switch times into the grid; remember which step arrives at one.
  struct Point {
    double t;
    const Vector* y;        // null for inserted latent points
    const Matrix* reset;    // non-null if a switch lands here
  };
  std::vector<Point> points;
  points.reserve(T + schedule.entries.size());
  size_t q = 0;
  const Matrix default_prior = default_reset_prior(model);
  auto reset_for = [&](const SwitchSchedule::Entry& e) -> const Matrix* {
    return e.reset_prior.size() > 0 ? &e.reset_prior : &default_prior;
  };
  for (int k = 0; k < T; ++k) {
    while (q < schedule.entries.size() && schedule.entries[q].time < grid.times(k)) {
      points.push_back({schedule.entries[q].time, nullptr, reset_for(schedule.entries[q])});
      ++q;
    }
    const Matrix* reset = nullptr;
    if (q < schedule.entries.size() && schedule.entries[q].time == grid.times(k)) {
      reset = reset_for(schedule.entries[q]);
      ++q;
    }
    points.push_back({grid.times(k), &grid.y[k], reset});
  }

  KnownSwitchResult out;
  const int n_pts = static_cast<int>(points.size());
  out.grid.times = Vector(n_pts);
  out.grid.y.reserve(n_pts);
  const Vector missing = Vector::Constant(
      meas.obs_dim(), std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < n_pts; ++k) {
    out.grid.times(k) = points[k].t;
    out.grid.y.push_back(points[k].y ? *points[k].y : missing);
  }

  FilterResult& filt = out.filter;
  filt.predicted.resize(n_pts);
  filt.filtered.resize(n_pts);
  filt.transitions.assign(n_pts, nullptr);
  filt.loglik_increments = Vector::Zero(n_pts);

  TransitionCache cache(model.F_a, model.L_a, model.Qc);
  Gaussian state = model.prior;
  for (int k = 0; k < n_pts; ++k) {
    if (k > 0) {
      const double dt = out.grid.times(k) - out.grid.times(k - 1);
      std::shared_ptr<const DiscreteTransition> trans;
      if (points[k].reset != nullptr) {
        trans = std::make_shared<DiscreteTransition>(
            reset_transition(model, dt, *points[k].reset));
      } else {
        trans = cache.at(dt);
      }
      state = kf_predict(state, *trans);
      filt.transitions[k] = std::move(trans);
    }
    filt.predicted[k] = state;
    auto [updated, increment] = kf_update(state, out.grid.y[k], meas);
    state = std::move(updated);
    filt.filtered[k] = state;
    filt.loglik_increments(k) = increment;
  }
  filt.loglik = filt.loglik_increments.sum();
  out.smoother = rts_smoother(model, filt, out.grid);
  return out;
}

}  // namespace slfm
