// config.hpp
// JSON run configuration with sections model, detection, sweep, run, fit.
// Unknown keys are rejected; every error names the offending field.

#pragma once

#include "mopo/cycle_simulator.hpp"
#include "mopo/detection.hpp"
#include "mopo/mopo_model.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mopo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ExperimentConfig experiment;
  std::size_t bootstrap_resamples = 200;
  GainModel fit_model = GainModel::HalfCosh;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + "." + it.key() + ": unknown field");
  }
}

inline const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const json& s = root.at(name);
  if (!s.is_object()) throw ConfigError(std::string(name) + ": expected an object");
  return s;
}

inline double number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path + "." + key + ": must be finite");
  return x;
}

inline std::uint64_t count(const json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string text(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::string line_column(const std::string& src, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < src.size(); ++i) {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses and validates a configuration document.
inline RunConfig parse_config(const std::string& src) {
  using detail::json;
  json root;
  try {
    root = json::parse(src);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON syntax error at " + detail::line_column(src, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown(root, "config", {"model", "detection", "sweep", "run", "fit"});

  RunConfig rc;
  ExperimentConfig& cfg = rc.experiment;

  const json& model = detail::section(root, "model");
  detail::reject_unknown(model, "model",
                         {"type", "chi", "chi12", "chi13", "chi24", "chi34", "lambda1", "lambda2", "t1", "t2", "kappa", "tau"});
  const std::string type = detail::text(model, "model", "type", "balanced");
  if (type == "balanced") {
    cfg.model = CouplingMatrix::balanced(detail::number(model, "model", "chi", 1.0));
  } else if (type == "coupling") {
    cfg.model = CouplingMatrix{detail::number(model, "model", "chi12", 0.0), detail::number(model, "model", "chi13", 0.0),
                               detail::number(model, "model", "chi24", 0.0), detail::number(model, "model", "chi34", 0.0)};
  } else if (type == "bloch_messiah") {
    cfg.model = BlochMessiahFactors{detail::number(model, "model", "lambda1", 1.0),
                                    detail::number(model, "model", "lambda2", 0.0),
                                    detail::number(model, "model", "t1", 1.0), detail::number(model, "model", "t2", 1.0)};
  } else {
    throw ConfigError("model.type: expected one of balanced, coupling, bloch_messiah (got '" + type + "')");
  }
  const double kappa = detail::number(model, "model", "kappa", 0.375);
  const double tau = detail::number(model, "model", "tau", 1.0);
  if (kappa < 0.0) throw ConfigError("model.kappa: must be >= 0");
  if (tau < 0.0) throw ConfigError("model.tau: must be >= 0");

  const json& det = detail::section(root, "detection");
  detail::reject_unknown(det, "detection",
                         {"analysis_frequency", "lowpass_bandwidth", "optical_phase", "electronic_phase", "mode_mismatch",
                          "added_vacuum_eta"});
  DetectionConfig d;
  d.analysis_frequency = detail::number(det, "detection", "analysis_frequency", d.analysis_frequency);
  d.lowpass_bandwidth = detail::number(det, "detection", "lowpass_bandwidth", d.lowpass_bandwidth);
  d.optical_phase = detail::number(det, "detection", "optical_phase", d.optical_phase);
  d.electronic_phase = detail::number(det, "detection", "electronic_phase", d.electronic_phase);
  d.mode_mismatch = detail::number(det, "detection", "mode_mismatch", d.mode_mismatch);
  if (detail::number(det, "detection", "added_vacuum_eta", kHeterodyneEta) != kHeterodyneEta) {
    throw ConfigError("detection.added_vacuum_eta: heterodyne detection fixes this at 0.5");
  }
  cfg.detection = d;

  const json& sweep = detail::section(root, "sweep");
  detail::reject_unknown(sweep, "sweep", {"intensities", "start", "stop", "points"});
  std::vector<double> intensities;
  if (sweep.contains("intensities")) {
    if (sweep.contains("start") || sweep.contains("stop") || sweep.contains("points")) {
      throw ConfigError("sweep: give either intensities or start/stop/points, not both");
    }
    const json& list = sweep.at("intensities");
    if (!list.is_array()) throw ConfigError("sweep.intensities: expected an array of numbers");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_number()) throw ConfigError("sweep.intensities[" + std::to_string(i) + "]: expected a number");
      intensities.push_back(list[i].get<double>());
    }
  } else {
    const double start = detail::number(sweep, "sweep", "start", 0.0);
    const double stop = detail::number(sweep, "sweep", "stop", 1.6);
    const auto points = detail::count(sweep, "sweep", "points", 17);
    if (points < 2) throw ConfigError("sweep.points: must be >= 2");
    if (stop < start) throw ConfigError("sweep.stop: must be >= sweep.start");
    for (std::uint64_t k = 0; k < points; ++k) {
      intensities.push_back(start + (stop - start) * static_cast<double>(k) / static_cast<double>(points - 1));
    }
  }
  if (intensities.size() < 3) throw ConfigError("sweep: at least 3 intensities are required for the gain fit");
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    if (!(intensities[i] >= 0.0) || !std::isfinite(intensities[i])) {
      throw ConfigError("sweep.intensities[" + std::to_string(i) + "]: must be finite and >= 0");
    }
    cfg.sweep.push_back(InteractionSetting{tau, intensities[i], kappa});
  }

  const json& run = detail::section(root, "run");
  detail::reject_unknown(run, "run",
                         {"seed", "n_cycles", "samples_per_cycle", "vacuum_ratio", "dt_us", "window_ms", "phase_model",
                          "bootstrap_resamples", "threads"});
  cfg.seed = detail::count(run, "run", "seed", cfg.seed);
  cfg.n_cycles = detail::count(run, "run", "n_cycles", cfg.n_cycles);
  cfg.samples_per_cycle = detail::count(run, "run", "samples_per_cycle", cfg.samples_per_cycle);
  cfg.vacuum_ratio = detail::number(run, "run", "vacuum_ratio", cfg.vacuum_ratio);
  cfg.dt_us = detail::number(run, "run", "dt_us", cfg.dt_us);
  cfg.window_ms = detail::number(run, "run", "window_ms", cfg.window_ms);
  cfg.threads = detail::count(run, "run", "threads", cfg.threads);
  rc.bootstrap_resamples = detail::count(run, "run", "bootstrap_resamples", rc.bootstrap_resamples);
  const std::string phase = detail::text(run, "run", "phase_model", "independent");
  if (phase == "independent") {
    cfg.phase_model = PhaseModel::Independent;
  } else if (phase == "common_mode") {
    cfg.phase_model = PhaseModel::CommonMode;
  } else {
    throw ConfigError("run.phase_model: expected independent or common_mode (got '" + phase + "')");
  }
  if (cfg.vacuum_ratio <= 0.0) throw ConfigError("run.vacuum_ratio: must be > 0, vacuum cycles calibrate the SQL");

  const json& fit = detail::section(root, "fit");
  detail::reject_unknown(fit, "fit", {"model"});
  const std::string fm = detail::text(fit, "fit", "model", "half_cosh");
  if (fm == "half_cosh") {
    rc.fit_model = GainModel::HalfCosh;
  } else if (fm == "plain_cosh") {
    rc.fit_model = GainModel::PlainCosh;
  } else {
    throw ConfigError("fit.model: expected half_cosh or plain_cosh (got '" + fm + "')");
  }

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.n_vacuum_cycles() < 1) throw ConfigError("run.vacuum_ratio: yields no vacuum calibration cycles");
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace mopo
