#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "slfm/config.hpp"

namespace slfm {

inline constexpr const char* kToolVersion = "0.1.0";

// Command bodies, exposed so tests can drive them directly. Each throws
// ConfigError / DataError / NumericalError on failure; `log` receives the
// human-readable summary lines the CLI prints. `hash` is the config-text
// hash embedded in output-file headers.

// Draws one trajectory (switching when the config has an slds section) and
// writes the data CSV at `out` plus a ground-truth CSV alongside it.
void do_simulate(const ExperimentConfig& cfg, const std::string& hash,
                 const std::string& out, std::ostream& log);

// Exact filter + smoother on a non-switching model; writes per-time smoothed
// means with 95% bands for every output, output-derivative, and force slot,
// and logs the total log marginal likelihood.
void do_smooth(const ExperimentConfig& cfg, const std::string& hash,
               const std::string& data, const std::string& out, std::ostream& log);

// Switching inference (forward mixture filter, backward mixture smoother);
// writes per-time smoothed model probabilities and state bands, plus a
// companion CSV listing detected switch times.
void do_segment(const ExperimentConfig& cfg, const std::string& hash,
                const std::string& data, const std::string& out, double threshold,
                std::ostream& log);

// Maximizes the (exact or mixture-filter) log marginal likelihood over the
// config's free parameters with a derivative-free simplex search, logging
// start/end objective and parameter values.
void do_fit(const ExperimentConfig& cfg, const std::string& data, std::ostream& log);

// Companion-file naming used by do_simulate / do_segment.
std::string truth_path(const std::string& out);
std::string switches_path(const std::string& out);

// Full argv-level entry point: parses arguments, loads the config, applies
// --seed / --threshold overrides, dispatches, and maps errors to exit codes
// (0 success, 2 config/data problems, 3 numerical failure).
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace slfm
