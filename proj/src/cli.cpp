#include "slfm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "slfm/csv.hpp"
#include "slfm/errors.hpp"
#include "slfm/fit.hpp"
#include "slfm/kalman.hpp"
#include "slfm/sim.hpp"
#include "slfm/slds.hpp"

namespace slfm {

namespace {

std::string with_suffix(const std::string& out, const std::string& suffix) {
  const size_t dot = out.find_last_of('.');
  const size_t slash = out.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return out + suffix;
  }
  return out.substr(0, dot) + suffix + out.substr(dot);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> header_comments(const ExperimentConfig& cfg,
                                         const std::string& hash,
                                         const std::string& command) {
  return {std::string("tool: slfm ") + kToolVersion, "command: " + command,
          "seed: " + std::to_string(cfg.seed), "config: " + hash};
}

std::string slot_name(const StateSlot& s) {
  switch (s.kind) {
    case SlotKind::Output:
      return "x" + std::to_string(s.index + 1);
    case SlotKind::OutputDerivative:
      return "dx" + std::to_string(s.index + 1);
    case SlotKind::Force:
      return "u" + std::to_string(s.index + 1);
    case SlotKind::ForceDerivative:
      return (s.deriv == 1 ? "du" : "d" + std::to_string(s.deriv) + "u") +
             std::to_string(s.index + 1);
  }
  return "slot";
}

// The plot-facing slots: outputs, output derivatives, and force values
// (derivatives of the force representation stay internal).
std::vector<int> plot_slots(const StateLayout& layout) {
  std::vector<int> idx;
  for (int i = 0; i < layout.dim(); ++i) {
    if (layout.slot(i).kind != SlotKind::ForceDerivative) idx.push_back(i);
  }
  return idx;
}

void append_band_columns(std::vector<std::string>& columns,
                         const StateLayout& layout, const std::vector<int>& slots) {
  for (int idx : slots) {
    const std::string name = slot_name(layout.slot(idx));
    columns.push_back(name);
    columns.push_back(name + "_lo");
    columns.push_back(name + "_hi");
  }
}

void append_band_values(std::vector<double>& row, const Gaussian& state,
                        const std::vector<int>& slots) {
  for (int idx : slots) {
    const double mean = state.mean(idx);
    const double sd = std::sqrt(std::max(0.0, state.cov(idx, idx)));
    row.push_back(mean);
    row.push_back(mean - 1.96 * sd);
    row.push_back(mean + 1.96 * sd);
  }
}

// Moment-matched single Gaussian summarizing a whole mixture (all models).
Gaussian mixture_moments(const GaussianMixture& mix) {
  std::vector<MixtureComponent> all;
  for (const auto& per_model : mix.by_model) {
    all.insert(all.end(), per_model.begin(), per_model.end());
  }
  return collapse(all, 1).front().state;
}

double switching_loglik(const ExperimentConfig& cfg, const TimeGrid& grid) {
  const ModelBank bank = bank_from_config(cfg);
  const Matrix Pi = switch_prior_from_config(cfg);
  const MeasurementModel meas =
      measurement_from_config(cfg, bank.models.front().layout);
  return adf(bank, Pi, meas, grid, cfg.budget_I, cfg.slds.initial_probs).loglik;
}

double exact_loglik(const ExperimentConfig& cfg, const TimeGrid& grid) {
  const ContinuousModel model = model_from_config(cfg);
  const MeasurementModel meas = measurement_from_config(cfg, model.layout);
  return kalman_filter(model, meas, grid).loglik;
}

}  // namespace

std::string truth_path(const std::string& out) { return with_suffix(out, "_truth"); }

std::string switches_path(const std::string& out) {
  return with_suffix(out, "_switches");
}

void do_simulate(const ExperimentConfig& cfg, const std::string& hash,
                 const std::string& out, std::ostream& log) {
  const Vector times = grid_times_from_config(cfg);
  SimulationOutput sim;
  StateLayout layout;
  if (cfg.slds.present) {
    const ModelBank bank = bank_from_config(cfg);
    const Matrix Pi = switch_prior_from_config(cfg);
    layout = bank.models.front().layout;
    const MeasurementModel meas = measurement_from_config(cfg, layout);
    sim = simulate_slds(bank, Pi, meas, times, cfg.seed, cfg.slds.initial_probs);
  } else {
    const ContinuousModel model = model_from_config(cfg);
    layout = model.layout;
    const MeasurementModel meas = measurement_from_config(cfg, layout);
    sim = simulate_lfm(model, meas, times, cfg.seed);
  }

  const int T = static_cast<int>(times.size());
  const int D = cfg.output.D;
  const auto comments = header_comments(cfg, hash, "simulate");

  std::vector<std::string> data_cols = {"t"};
  for (int d = 0; d < D; ++d) data_cols.push_back("y_" + std::to_string(d + 1));
  std::vector<std::vector<double>> data_rows;
  data_rows.reserve(T);
  for (int k = 0; k < T; ++k) {
    std::vector<double> row = {times(k)};
    for (int d = 0; d < D; ++d) row.push_back(sim.obs[k](d));
    data_rows.push_back(std::move(row));
  }
  write_csv(out, comments, data_cols, data_rows);

  const auto slots = plot_slots(layout);
  std::vector<std::string> truth_cols = {"t"};
  for (int idx : slots) truth_cols.push_back(slot_name(layout.slot(idx)));
  if (cfg.slds.present) truth_cols.push_back("model");
  std::vector<std::vector<double>> truth_rows;
  truth_rows.reserve(T);
  for (int k = 0; k < T; ++k) {
    std::vector<double> row = {times(k)};
    for (int idx : slots) row.push_back(sim.states[k](idx));
    if (cfg.slds.present) row.push_back(static_cast<double>(sim.model_sequence[k]));
    truth_rows.push_back(std::move(row));
  }
  const std::string tpath = truth_path(out);
  write_csv(tpath, comments, truth_cols, truth_rows);

  log << "seed: " << sim.seed << "\n";
  log << "data: " << out << "\n";
  log << "truth: " << tpath << "\n";
  if (cfg.slds.present) {
    log << "switches: " << sim.switch_times.size();
    for (double t : sim.switch_times) log << " " << fmt17(t);
    log << "\n";
  }
}

void do_smooth(const ExperimentConfig& cfg, const std::string& hash,
               const std::string& data, const std::string& out, std::ostream& log) {
  if (cfg.slds.present) {
    throw ConfigError("slds",
                      "this command handles non-switching models; use segment");
  }
  const ContinuousModel model = model_from_config(cfg);
  const MeasurementModel meas = measurement_from_config(cfg, model.layout);
  const TimeGrid grid = grid_from_table(read_csv(data), cfg.output.D);
  const FilterResult filt = kalman_filter(model, meas, grid);
  const SmootherResult smo = rts_smoother(model, filt, grid);

  const auto slots = plot_slots(model.layout);
  std::vector<std::string> columns = {"t"};
  append_band_columns(columns, model.layout, slots);
  std::vector<std::vector<double>> rows;
  rows.reserve(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    std::vector<double> row = {grid.times(k)};
    append_band_values(row, smo.smoothed[k], slots);
    rows.push_back(std::move(row));
  }
  write_csv(out, header_comments(cfg, hash, "smooth"), columns, rows);

  log << "log marginal likelihood: " << fmt17(filt.loglik) << "\n";
  log << "posterior: " << out << "\n";
}

void do_segment(const ExperimentConfig& cfg, const std::string& hash,
                const std::string& data, const std::string& out, double threshold,
                std::ostream& log) {
  const ModelBank bank = bank_from_config(cfg);
  const Matrix Pi = switch_prior_from_config(cfg);
  const StateLayout& layout = bank.models.front().layout;
  const MeasurementModel meas = measurement_from_config(cfg, layout);
  const TimeGrid grid = grid_from_table(read_csv(data), cfg.output.D);

  const AdfResult filt =
      adf(bank, Pi, meas, grid, cfg.budget_I, cfg.slds.initial_probs);
  const EcResult smo = ec(bank, Pi, meas, grid, filt, cfg.budget_J);

  const int M = bank.model_count();
  const auto slots = plot_slots(layout);
  std::vector<std::string> columns = {"t"};
  for (int s = 0; s + 1 < M; ++s) {
    columns.push_back("p_model" + std::to_string(s + 1));
  }
  columns.push_back("p_reset");
  append_band_columns(columns, layout, slots);

  std::vector<std::vector<double>> rows;
  rows.reserve(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    std::vector<double> row = {grid.times(k)};
    for (int s = 0; s < M; ++s) row.push_back(smo.model_probs(k, s));
    append_band_values(row, mixture_moments(smo.steps[k]), slots);
    rows.push_back(std::move(row));
  }
  const auto comments = header_comments(cfg, hash, "segment");
  write_csv(out, comments, columns, rows);

  const Vector reset_probs = smo.model_probs.col(bank.reset_index());
  const auto switches = extract_switch_points(grid.times, reset_probs, threshold);
  std::vector<std::vector<double>> switch_rows;
  for (double t : switches) switch_rows.push_back({t});
  const std::string spath = switches_path(out);
  write_csv(spath, comments, {"t"}, switch_rows);

  log << "approximate log marginal likelihood: " << fmt17(filt.loglik) << "\n";
  log << "posterior: " << out << "\n";
  log << "switches: " << spath << "\n";
  if (switches.empty()) {
    log << "no switches detected at threshold " << threshold << "\n";
  } else {
    log << "detected " << switches.size() << " switch(es) at t =";
    for (double t : switches) log << " " << fmt17(t);
    log << "\n";
  }
}

void do_fit(const ExperimentConfig& cfg, const std::string& data, std::ostream& log) {
  const TimeGrid grid = grid_from_table(read_csv(data), cfg.output.D);
  const bool switching = cfg.slds.present;
  auto objective_for = [&](const ExperimentConfig& c) {
    return switching ? switching_loglik(c, grid) : exact_loglik(c, grid);
  };

  if (cfg.free_params.empty()) {
    const double ll = objective_for(cfg);
    log << "no free parameters\n";
    log << "initial log-likelihood: " << fmt17(ll) << "\n";
    log << "final log-likelihood: " << fmt17(ll) << "\n";
    return;
  }

  const int n = static_cast<int>(cfg.free_params.size());
  Vector x0(n);
  for (int i = 0; i < n; ++i) {
    const double v = get_param(cfg, cfg.free_params[i]);
    if (!(v > 0.0)) {
      throw ConfigError(cfg.free_params[i],
                        "free parameters must start positive (they are "
                        "optimized on a log scale)");
    }
    x0(i) = std::log(v);
  }

  auto objective = [&](const Vector& x) -> double {
    ExperimentConfig trial = cfg;
    for (int i = 0; i < n; ++i) {
      set_param(trial, cfg.free_params[i], std::exp(x(i)));
    }
    try {
      return objective_for(trial);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const InvalidInputError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  const SimplexResult res = nelder_mead_max(objective, x0);
  log << "initial log-likelihood: " << fmt17(res.f_initial) << "\n";
  log << "final log-likelihood: " << fmt17(res.f_final) << "\n";
  log << "evaluations: " << res.evals << (res.converged ? " (converged)" : "")
      << "\n";
  for (int i = 0; i < n; ++i) {
    log << "param " << cfg.free_params[i] << ": " << fmt17(std::exp(x0(i)))
        << " -> " << fmt17(std::exp(res.x(i))) << "\n";
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"state-space latent force models: simulate, smooth, segment, fit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  bool have_seed = false;
  bool have_threshold = false;

  auto add_common = [&](CLI::App* cmd, bool needs_data, bool needs_out) {
    cmd->add_option("--config", config_path, "JSON experiment config")
        ->required();
    if (needs_data) {
      cmd->add_option("--data", data_path, "input data CSV")->required();
    }
    if (needs_out) {
      cmd->add_option("--out", out_path, "output CSV path")->required();
    }
    cmd->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { have_seed = true; });
  };

  CLI::App* sim = app.add_subcommand("simulate", "draw data from the model");
  add_common(sim, false, true);
  CLI::App* smooth = app.add_subcommand("smooth", "exact posterior for a fixed model");
  add_common(smooth, true, true);
  CLI::App* segment =
      app.add_subcommand("segment", "switching posterior and switch detection");
  add_common(segment, true, true);
  segment->add_option("--threshold", threshold, "switch-probability threshold")
      ->each([&](const std::string&) { have_threshold = true; });
  CLI::App* fit = app.add_subcommand("fit", "maximize the marginal likelihood");
  add_common(fit, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto [text, cfg] = load_config(config_path);
    const std::string hash = config_hash(text);
    if (have_seed) cfg.seed = seed;
    if (have_threshold) cfg.switch_threshold = threshold;
    if (app.got_subcommand(sim)) {
      do_simulate(cfg, hash, out_path, std::cout);
    } else if (app.got_subcommand(smooth)) {
      do_smooth(cfg, hash, data_path, out_path, std::cout);
    } else if (app.got_subcommand(segment)) {
      do_segment(cfg, hash, data_path, out_path, cfg.switch_threshold, std::cout);
    } else {
      do_fit(cfg, data_path, std::cout);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    // NumericalError and anything unexpected land here.
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("slfm");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  argv.reserve(storage.size());
  for (auto& s : storage) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace slfm
