#include "slfm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "slfm/errors.hpp"
#include "slfm/priors.hpp"

namespace slfm {

namespace {

using nlohmann::json;

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(join_path(path, item.key()), "unknown key");
  }
}

const json& require_object(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "must be an object");
  return obj;
}

double get_number(const json& obj, const std::string& path, const char* key,
                  bool required, double fallback) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(join_path(path, key), "missing required key");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join_path(path, key), "must be a number");
  return v.get<double>();
}

long long get_integer(const json& obj, const std::string& path, const char* key,
                      bool required, long long fallback) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(join_path(path, key), "missing required key");
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ConfigError(join_path(path, key), "must be an integer");
  }
  return v.get<long long>();
}

Vector get_vector(const json& obj, const std::string& path, const char* key,
                  int required_size) {
  const std::string p = join_path(path, key);
  if (!obj.contains(key)) throw ConfigError(p, "missing required key");
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(p, "must be an array of numbers");
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(p, "must be an array of numbers");
    out(static_cast<int>(i)) = v[i].get<double>();
  }
  if (required_size >= 0 && out.size() != required_size) {
    throw ConfigError(p, "expected " + std::to_string(required_size) +
                             " entries, found " + std::to_string(out.size()));
  }
  return out;
}

// Scalar broadcast or exact-size array, for the per-model switch constants.
Vector get_broadcast(const json& obj, const std::string& path, const char* key,
                     int size) {
  const std::string p = join_path(path, key);
  if (!obj.contains(key)) throw ConfigError(p, "missing required key");
  const json& v = obj.at(key);
  if (v.is_number()) return Vector::Constant(size, v.get<double>());
  return get_vector(obj, path, key, size);
}

int count_regular_models(int L, int R, const std::string& path) {
  long long n = 1;
  for (int r = 0; r < R; ++r) {
    n *= L;
    if (n > 4096) {
      throw ConfigError(join_path(path, "lengthscales"),
                        "lengthscale-assignment combinations exceed 4096");
    }
  }
  return static_cast<int>(n);
}

OutputModelSpec parse_output_model(const json& doc) {
  const std::string path = "output_model";
  if (!doc.contains("output_model")) throw ConfigError(path, "missing required key");
  const json& obj = require_object(doc.at("output_model"), path);
  check_keys(obj, path, {"D", "R", "A", "C", "kappa", "S"});
  OutputModelSpec spec;
  const long long D = get_integer(obj, path, "D", true, 0);
  const long long R = get_integer(obj, path, "R", true, 0);
  if (D < 1) throw ConfigError(join_path(path, "D"), "must be at least 1");
  if (R < 0) throw ConfigError(join_path(path, "R"), "must be nonnegative");
  spec.D = static_cast<int>(D);
  spec.R = static_cast<int>(R);
  spec.A = get_vector(obj, path, "A", spec.D);
  spec.C = get_vector(obj, path, "C", spec.D);
  spec.kappa = get_vector(obj, path, "kappa", spec.D);
  spec.S = Matrix::Zero(spec.D, spec.R);
  if (spec.R == 0) {
    if (obj.contains("S")) throw ConfigError(join_path(path, "S"), "not allowed when R is 0");
    return spec;
  }
  const std::string sp = join_path(path, "S");
  if (!obj.contains("S")) throw ConfigError(sp, "missing required key");
  const json& S = obj.at("S");
  if (!S.is_array() || static_cast<int>(S.size()) != spec.D) {
    throw ConfigError(sp, "expected " + std::to_string(spec.D) + " rows");
  }
  for (int d = 0; d < spec.D; ++d) {
    const json& row = S[d];
    if (!row.is_array() || static_cast<int>(row.size()) != spec.R) {
      throw ConfigError(sp, "row " + std::to_string(d + 1) + " must have " +
                                std::to_string(spec.R) + " entries");
    }
    for (int r = 0; r < spec.R; ++r) {
      if (!row[r].is_number()) throw ConfigError(sp, "entries must be numbers");
      spec.S(d, r) = row[r].get<double>();
    }
  }
  return spec;
}

std::vector<ForcePriorConfig> parse_force_priors(const json& doc, int R,
                                                 bool switching) {
  std::vector<ForcePriorConfig> out;
  if (!doc.contains("force_priors")) {
    if (R >= 1 && !switching) {
      throw ConfigError("force_priors", "missing required key");
    }
    return out;
  }
  if (switching) {
    throw ConfigError("force_priors",
                      "not allowed alongside the slds section, which defines "
                      "the switching force priors");
  }
  const json& arr = doc.at("force_priors");
  if (!arr.is_array() || static_cast<int>(arr.size()) != R) {
    throw ConfigError("force_priors",
                      "expected one entry per latent force (" + std::to_string(R) + ")");
  }
  for (int r = 0; r < R; ++r) {
    const std::string path = "force_priors[" + std::to_string(r) + "]";
    const json& obj = require_object(arr[r], path);
    check_keys(obj, path, {"kernel", "nu", "order", "lengthscale", "variance"});
    ForcePriorConfig fp;
    if (obj.contains("kernel")) {
      if (!obj.at("kernel").is_string()) {
        throw ConfigError(join_path(path, "kernel"), "must be a string");
      }
      fp.kernel = obj.at("kernel").get<std::string>();
    }
    if (fp.kernel != "matern" && fp.kernel != "se") {
      throw ConfigError(join_path(path, "kernel"), "must be 'matern' or 'se'");
    }
    fp.nu = get_number(obj, path, "nu", false, fp.nu);
    fp.order = static_cast<int>(get_integer(obj, path, "order", false, fp.order));
    fp.lengthscale = get_number(obj, path, "lengthscale", true, 0.0);
    fp.variance = get_number(obj, path, "variance", false, fp.variance);
    if (!(fp.lengthscale > 0.0)) {
      throw ConfigError(join_path(path, "lengthscale"), "must be positive");
    }
    if (!(fp.variance > 0.0)) {
      throw ConfigError(join_path(path, "variance"), "must be positive");
    }
    if (fp.kernel == "se" && fp.order < 2) {
      throw ConfigError(join_path(path, "order"), "must be at least 2");
    }
    out.push_back(fp);
  }
  return out;
}

void parse_noise(const json& doc, ExperimentConfig& cfg) {
  const std::string path = "observation_noise";
  if (!doc.contains("observation_noise")) throw ConfigError(path, "missing required key");
  const json& obj = require_object(doc.at("observation_noise"), path);
  check_keys(obj, path, {"variance", "covariance"});
  const bool has_var = obj.contains("variance");
  const bool has_cov = obj.contains("covariance");
  if (has_var == has_cov) {
    throw ConfigError(path, "provide exactly one of 'variance' or 'covariance'");
  }
  if (has_var) {
    cfg.noise_scalar = true;
    cfg.noise_variance = get_number(obj, path, "variance", true, 0.0);
    if (!(cfg.noise_variance > 0.0)) {
      throw ConfigError(join_path(path, "variance"), "must be positive");
    }
    return;
  }
  cfg.noise_scalar = false;
  const std::string cp = join_path(path, "covariance");
  const json& C = obj.at("covariance");
  const int D = cfg.output.D;
  if (!C.is_array() || static_cast<int>(C.size()) != D) {
    throw ConfigError(cp, "expected a " + std::to_string(D) + "x" +
                              std::to_string(D) + " matrix");
  }
  cfg.noise_cov = Matrix::Zero(D, D);
  for (int i = 0; i < D; ++i) {
    const json& row = C[i];
    if (!row.is_array() || static_cast<int>(row.size()) != D) {
      throw ConfigError(cp, "expected a " + std::to_string(D) + "x" +
                                std::to_string(D) + " matrix");
    }
    for (int j = 0; j < D; ++j) {
      if (!row[j].is_number()) throw ConfigError(cp, "entries must be numbers");
      cfg.noise_cov(i, j) = row[j].get<double>();
    }
  }
}

void parse_slds(const json& doc, ExperimentConfig& cfg) {
  if (!doc.contains("slds")) return;
  const std::string path = "slds";
  const json& obj = require_object(doc.at("slds"), path);
  check_keys(obj, path,
             {"lengthscales", "nu", "variance", "a", "c", "reset_prior_scale",
              "initial_probs"});
  SldsConfig& s = cfg.slds;
  s.present = true;
  if (cfg.output.R < 1) {
    throw ConfigError(path, "switching requires at least one latent force");
  }
  const Vector scales = get_vector(obj, path, "lengthscales", -1);
  if (scales.size() < 1) {
    throw ConfigError(join_path(path, "lengthscales"), "must list at least one value");
  }
  s.lengthscales.assign(scales.data(), scales.data() + scales.size());
  for (double l : s.lengthscales) {
    if (!(l > 0.0)) {
      throw ConfigError(join_path(path, "lengthscales"), "entries must be positive");
    }
  }
  s.nu = get_number(obj, path, "nu", false, s.nu);
  s.variance = get_number(obj, path, "variance", false, s.variance);
  if (!(s.variance > 0.0)) {
    throw ConfigError(join_path(path, "variance"), "must be positive");
  }
  const int regulars = count_regular_models(static_cast<int>(s.lengthscales.size()),
                                            cfg.output.R, path);
  s.a = get_broadcast(obj, path, "a", regulars);
  s.c = get_broadcast(obj, path, "c", regulars);
  for (int i = 0; i < regulars; ++i) {
    if (!(s.a(i) >= 0.0 && s.a(i) <= 1.0)) {
      throw ConfigError(join_path(path, "a"), "entries must lie in [0, 1]");
    }
    if (!(s.c(i) >= 0.0)) {
      throw ConfigError(join_path(path, "c"), "entries must be nonnegative");
    }
  }
  if (std::abs(s.c.sum() - 1.0) > 1e-9) {
    throw ConfigError(join_path(path, "c"), "entries must sum to 1");
  }
  s.reset_prior_scale = get_number(obj, path, "reset_prior_scale", false, 1.0);
  if (!(s.reset_prior_scale > 0.0)) {
    throw ConfigError(join_path(path, "reset_prior_scale"), "must be positive");
  }
  if (obj.contains("initial_probs")) {
    s.initial_probs = get_vector(obj, path, "initial_probs", regulars + 1);
  }
}

void parse_inference(const json& doc, ExperimentConfig& cfg) {
  if (!doc.contains("inference")) return;
  const std::string path = "inference";
  const json& obj = require_object(doc.at("inference"), path);
  check_keys(obj, path, {"I", "J"});
  cfg.budget_I = static_cast<int>(get_integer(obj, path, "I", false, cfg.budget_I));
  cfg.budget_J = static_cast<int>(get_integer(obj, path, "J", false, cfg.budget_J));
  if (cfg.budget_I < 1) throw ConfigError(join_path(path, "I"), "must be at least 1");
  if (cfg.budget_J < 1) throw ConfigError(join_path(path, "J"), "must be at least 1");
}

void parse_grid(const json& doc, ExperimentConfig& cfg) {
  if (!doc.contains("grid")) return;
  const std::string path = "grid";
  const json& obj = require_object(doc.at("grid"), path);
  check_keys(obj, path, {"start", "step", "count"});
  cfg.grid_present = true;
  cfg.grid_start = get_number(obj, path, "start", true, 0.0);
  cfg.grid_step = get_number(obj, path, "step", true, 0.0);
  cfg.grid_count = static_cast<int>(get_integer(obj, path, "count", true, 0));
  if (!std::isfinite(cfg.grid_start)) {
    throw ConfigError(join_path(path, "start"), "must be finite");
  }
  if (!(cfg.grid_step > 0.0) || !std::isfinite(cfg.grid_step)) {
    throw ConfigError(join_path(path, "step"), "must be positive");
  }
  if (cfg.grid_count < 2) throw ConfigError(join_path(path, "count"), "must be at least 2");
}

void parse_fit(const json& doc, ExperimentConfig& cfg) {
  if (!doc.contains("fit")) return;
  const std::string path = "fit";
  const json& obj = require_object(doc.at("fit"), path);
  check_keys(obj, path, {"free"});
  if (!obj.contains("free")) return;
  const json& arr = obj.at("free");
  const std::string fp = join_path(path, "free");
  if (!arr.is_array()) throw ConfigError(fp, "must be an array of parameter names");
  for (const auto& v : arr) {
    if (!v.is_string()) throw ConfigError(fp, "must be an array of parameter names");
    cfg.free_params.push_back(v.get<std::string>());
  }
}

std::vector<std::string> split_dots(const std::string& name) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = name.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(name.substr(start));
      return parts;
    }
    parts.push_back(name.substr(start, dot - start));
    start = dot + 1;
  }
}

// 1-based index token in [1, hi]; the full parameter name is the error field.
int parse_index(const std::string& tok, int hi, const std::string& name) {
  int v = 0;
  for (char ch : tok) {
    if (ch < '0' || ch > '9') throw ConfigError(name, "unknown parameter name");
    v = v * 10 + (ch - '0');
    if (v > hi) throw ConfigError(name, "parameter index out of range");
  }
  if (tok.empty() || v < 1) throw ConfigError(name, "parameter index out of range");
  return v;
}

double* param_ptr(ExperimentConfig& cfg, const std::string& name) {
  const auto parts = split_dots(name);
  if (parts[0] == "output" && (parts.size() == 3 || parts.size() == 4)) {
    if (parts.size() == 3) {
      const int d = parse_index(parts[2], cfg.output.D, name);
      if (parts[1] == "A") return &cfg.output.A(d - 1);
      if (parts[1] == "C") return &cfg.output.C(d - 1);
      if (parts[1] == "kappa") return &cfg.output.kappa(d - 1);
    } else if (parts[1] == "S") {
      const int d = parse_index(parts[2], cfg.output.D, name);
      const int r = parse_index(parts[3], cfg.output.R, name);
      return &cfg.output.S(d - 1, r - 1);
    }
  } else if (parts[0] == "force" && parts.size() == 3) {
    if (cfg.slds.present || cfg.force_priors.empty()) {
      throw ConfigError(name, "parameter not applicable to this config");
    }
    const int r = parse_index(parts[1], static_cast<int>(cfg.force_priors.size()), name);
    if (parts[2] == "lengthscale") return &cfg.force_priors[r - 1].lengthscale;
    if (parts[2] == "variance") return &cfg.force_priors[r - 1].variance;
  } else if (parts[0] == "noise" && parts.size() == 2 && parts[1] == "variance") {
    if (!cfg.noise_scalar) {
      throw ConfigError(name, "parameter not applicable to this config");
    }
    return &cfg.noise_variance;
  } else if (parts[0] == "slds" && parts.size() == 3 && parts[1] == "lengthscale") {
    if (!cfg.slds.present) {
      throw ConfigError(name, "parameter not applicable to this config");
    }
    const int j =
        parse_index(parts[2], static_cast<int>(cfg.slds.lengthscales.size()), name);
    return &cfg.slds.lengthscales[j - 1];
  }
  throw ConfigError(name, "unknown parameter name");
}

PriorSSM prior_from_config(const ForcePriorConfig& fp) {
  if (fp.kernel == "se") return se_taylor_ssm(fp.lengthscale, fp.variance, fp.order);
  return matern_ssm({fp.nu, fp.lengthscale, fp.variance});
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "top level must be an object");
  check_keys(doc, "",
             {"output_model", "force_priors", "observation_noise", "slds",
              "inference", "grid", "seed", "switch_threshold", "fit"});
  ExperimentConfig cfg;
  cfg.output = parse_output_model(doc);
  parse_slds(doc, cfg);
  cfg.force_priors = parse_force_priors(doc, cfg.output.R, cfg.slds.present);
  parse_noise(doc, cfg);
  parse_inference(doc, cfg);
  parse_grid(doc, cfg);
  parse_fit(doc, cfg);
  if (doc.contains("seed")) {
    const json& v = doc.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("seed", "must be a nonnegative integer");
    }
    cfg.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("switch_threshold")) {
    const json& v = doc.at("switch_threshold");
    if (!v.is_number()) throw ConfigError("switch_threshold", "must be a number");
    cfg.switch_threshold = v.get<double>();
    if (!(cfg.switch_threshold > 0.0 && cfg.switch_threshold < 1.0)) {
      throw ConfigError("switch_threshold", "must lie in (0, 1)");
    }
  }
  return cfg;
}

std::pair<std::string, ExperimentConfig> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  ExperimentConfig cfg = parse_config(text);
  return {std::move(text), std::move(cfg)};
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ContinuousModel model_from_config(const ExperimentConfig& cfg) {
  if (cfg.slds.present) {
    throw ConfigError("slds", "a switching config defines a model bank, not a "
                              "single model");
  }
  const auto [F, L] = build_output_ssm(cfg.output);
  std::vector<PriorSSM> priors;
  priors.reserve(cfg.force_priors.size());
  for (const auto& fp : cfg.force_priors) priors.push_back(prior_from_config(fp));
  return augment(F, L, priors, 1.0);
}

ModelBank bank_from_config(const ExperimentConfig& cfg) {
  if (!cfg.slds.present) {
    throw ConfigError("slds", "section required for switching commands");
  }
  ModelBank bank = build_model_bank(cfg.output, cfg.slds.lengthscales, cfg.slds.nu,
                                    cfg.slds.variance);
  if (cfg.slds.reset_prior_scale != 1.0) {
    bank = build_model_bank(cfg.output, cfg.slds.lengthscales, cfg.slds.nu,
                            cfg.slds.variance,
                            Matrix(cfg.slds.reset_prior_scale * bank.reset_prior));
  }
  return bank;
}

Matrix switch_prior_from_config(const ExperimentConfig& cfg) {
  if (!cfg.slds.present) {
    throw ConfigError("slds", "section required for switching commands");
  }
  SwitchTransitionSpec spec;
  spec.a = cfg.slds.a;
  spec.c = cfg.slds.c;
  return transition_matrix(spec, static_cast<int>(cfg.slds.a.size()) + 1);
}

MeasurementModel measurement_from_config(const ExperimentConfig& cfg,
                                         const StateLayout& layout) {
  const int D = cfg.output.D;
  const Matrix R =
      cfg.noise_scalar ? Matrix(cfg.noise_variance * Matrix::Identity(D, D))
                       : cfg.noise_cov;
  return observe_outputs(layout, R);
}

Vector grid_times_from_config(const ExperimentConfig& cfg) {
  if (!cfg.grid_present) {
    throw ConfigError("grid", "section required to simulate");
  }
  Vector times(cfg.grid_count);
  for (int k = 0; k < cfg.grid_count; ++k) {
    times(k) = cfg.grid_start + cfg.grid_step * k;
  }
  return times;
}

double get_param(const ExperimentConfig& cfg, const std::string& name) {
  return *param_ptr(const_cast<ExperimentConfig&>(cfg), name);
}

void set_param(ExperimentConfig& cfg, const std::string& name, double value) {
  *param_ptr(cfg, name) = value;
}

}  // namespace slfm
