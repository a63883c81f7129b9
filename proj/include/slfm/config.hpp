#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slfm/lfm.hpp"
#include "slfm/slds.hpp"

namespace slfm {

// One latent force's GP prior for the non-switching model.
struct ForcePriorConfig {
  std::string kernel = "matern";  // "matern" or "se"
  double nu = 1.5;                // matern smoothness (half-integer)
  int order = 6;                  // se Taylor truncation order
  double lengthscale = 1.0;
  double variance = 1.0;
};

// The switching-model section: every force uses a Matern prior whose
// lengthscale switches among the listed values.
struct SldsConfig {
  bool present = false;
  std::vector<double> lengthscales;
  double nu = 1.5;
  double variance = 1.0;
  Vector a;  // per-regular-model stay probability (scalar broadcast in JSON)
  Vector c;  // reset-exit distribution over regular models
  double reset_prior_scale = 1.0;
  Vector initial_probs;  // empty selects the default initial distribution
};

// Complete experiment description parsed from one JSON document.
struct ExperimentConfig {
  OutputModelSpec output;
  std::vector<ForcePriorConfig> force_priors;  // size R when non-switching
  bool noise_scalar = true;
  double noise_variance = 1.0;  // when noise_scalar
  Matrix noise_cov;             // when !noise_scalar, D x D
  SldsConfig slds;
  int budget_I = 1;
  int budget_J = 1;
  bool grid_present = false;
  double grid_start = 0.0;
  double grid_step = 0.1;
  int grid_count = 0;
  std::uint64_t seed = 0;
  double switch_threshold = 0.2;
  std::vector<std::string> free_params;  // names optimized by the fit command
};

// Parses and validates a JSON config document. Unknown keys anywhere are
// errors; every ConfigError carries the dotted path of the offending field
// (e.g. "output_model.S" or "force_priors[1].kernel").
ExperimentConfig parse_config(const std::string& json_text);

// Reads the file and returns (raw text, parsed config). The raw text feeds
// config_hash so output files can embed the exact configuration identity.
std::pair<std::string, ExperimentConfig> load_config(const std::string& path);

// FNV-1a 64-bit hash of the raw config text, as 16 hex digits.
std::string config_hash(const std::string& text);

// Builders from a validated config. model_from_config / bank_from_config
// throw ConfigError when the required section is missing.
ContinuousModel model_from_config(const ExperimentConfig& cfg);
ModelBank bank_from_config(const ExperimentConfig& cfg);
Matrix switch_prior_from_config(const ExperimentConfig& cfg);
MeasurementModel measurement_from_config(const ExperimentConfig& cfg,
                                         const StateLayout& layout);
Vector grid_times_from_config(const ExperimentConfig& cfg);

// Named access to the positive scalars the fit command can optimize:
//   output.A.d / output.C.d / output.kappa.d / output.S.d.r   (1-based d, r)
//   force.r.lengthscale / force.r.variance                    (non-switching)
//   noise.variance                                            (scalar noise)
//   slds.lengthscale.j                                        (1-based j)
// Unknown names throw ConfigError carrying the name.
double get_param(const ExperimentConfig& cfg, const std::string& name);
void set_param(ExperimentConfig& cfg, const std::string& name, double value);

}  // namespace slfm
