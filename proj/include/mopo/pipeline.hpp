// pipeline.hpp
// Sweep driver: model -> detection -> cycles -> estimators, one sweep point
// at a time, plus the figure tables and the summary document.

#pragma once

#include "mopo/config.hpp"
#include "mopo/cycle_simulator.hpp"
#include "mopo/estimators.hpp"
#include "mopo/io.hpp"
#include "mopo/mopo_model.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mopo {

struct SweepRow {
  std::size_t sweep_index = 0;
  double intensity = 0.0;
  InvariantSummary measured;
  InvariantSummary model;  // noiseless values of the configured model at this point
};

struct SweepResult {
  std::vector<SweepRow> rows;  // completed points, canonical order
  std::optional<GainFit> fit_s1;
  std::optional<GainFit> fit_s2;
  GainModel fit_model = GainModel::HalfCosh;
  bool complete = true;
  std::string error;  // first failure when incomplete
};

using PointObserver = std::function<void(const SweepPointData&)>;

/// Runs the sweep. Stops at the first point that fails (model overflow,
/// estimator failure) and returns what was completed, marked incomplete.
inline SweepResult run_sweep(const RunConfig& rc, const PointObserver& observe = {}) {
  const ExperimentConfig& cfg = rc.experiment;
  cfg.validate();
  SweepResult out;
  out.fit_model = rc.fit_model;
  for (std::size_t k = 0; k < cfg.sweep.size(); ++k) {
    SweepRow row;
    row.sweep_index = k;
    row.intensity = cfg.sweep[k].pump_intensity;
    try {
      SweepPointData point = run_sweep_point(cfg, k);
      if (observe) observe(point);
      SummaryOptions opts;
      opts.bootstrap_resamples = rc.bootstrap_resamples;
      opts.seed = cfg.seed;
      opts.sweep_index = k;
      const auto sig = cycle_moments(std::span<const CycleRecord>(point.signal));
      const auto vac = cycle_moments(std::span<const CycleRecord>(point.vacuum));
      row.measured = summarize(std::span<const CycleMoments>(sig), std::span<const CycleMoments>(vac), opts);
      row.model = analytic_summary(point.model_state, cfg.detection.mode_mismatch);
    } catch (const std::exception& e) {
      out.complete = false;
      out.error = "sweep point " + std::to_string(k) + ": " + e.what();
      break;
    }
    out.rows.push_back(row);
  }
  if (out.rows.size() >= 3) {
    std::vector<GainPoint> p1;
    std::vector<GainPoint> p2;
    for (const auto& r : out.rows) {
      p1.push_back({r.intensity, r.measured.a1});
      p2.push_back({r.intensity, r.measured.a2});
    }
    out.fit_s1 = fit_gain_curve(p1, rc.fit_model);
    out.fit_s2 = fit_gain_curve(p2, rc.fit_model);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figure tables

inline constexpr std::string_view kFig2Header = "intensity_mw_cm2,var_s1,var_s2,se_var_s1,se_var_s2,fit_s1,fit_s2";
inline constexpr std::string_view kFig3Header =
    "gain,det_a1,det_a2,minus_det_c,se_det_a1,se_det_a2,se_det_c,model_det_a1,model_det_a2,model_minus_det_c";
inline constexpr std::string_view kFig4Header = "gain,w,w_ppt,se_w,se_w_ppt";
inline constexpr std::string_view kFig5Header = "gain,purity,se_purity";

namespace detail {

inline void csv_row(std::ostream& os, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) os << ',';
    os << format_double(v);
    first = false;
  }
  os << '\n';
}

}  // namespace detail

/// Fit columns are empty-free: with fewer than 3 rows there is no fit and the
/// measured variance is repeated.
inline void write_fig2(std::ostream& os, const SweepResult& r) {
  os << kFig2Header << '\n';
  for (const auto& row : r.rows) {
    const auto& m = row.measured;
    const double f1 = r.fit_s1 ? gain_model(r.fit_model, r.fit_s1->g, row.intensity) : m.a1;
    const double f2 = r.fit_s2 ? gain_model(r.fit_model, r.fit_s2->g, row.intensity) : m.a2;
    detail::csv_row(os, {row.intensity, m.a1, m.a2, m.se_a1, m.se_a2, f1, f2});
  }
}

inline void write_fig3(std::ostream& os, const SweepResult& r) {
  os << kFig3Header << '\n';
  for (const auto& row : r.rows) {
    const auto& m = row.measured;
    detail::csv_row(os, {m.gain, m.det_a1, m.det_a2, -m.det_c, m.se_det_a1, m.se_det_a2, m.se_det_c, row.model.det_a1,
                         row.model.det_a2, -row.model.det_c});
  }
}

inline void write_fig4(std::ostream& os, const SweepResult& r) {
  os << kFig4Header << '\n';
  for (const auto& row : r.rows) {
    const auto& m = row.measured;
    detail::csv_row(os, {m.gain, m.w, m.w_ppt, m.se_w, m.se_w_ppt});
  }
}

inline void write_fig5(std::ostream& os, const SweepResult& r) {
  os << kFig5Header << '\n';
  for (const auto& row : r.rows) {
    const auto& m = row.measured;
    detail::csv_row(os, {m.gain, m.purity, m.se_purity});
  }
}

inline std::string gain_model_name(GainModel m) { return m == GainModel::HalfCosh ? "half_cosh" : "plain_cosh"; }

inline json uncertainty_json(std::size_t resamples, std::uint64_t seed) {
  return json{{"method", "nonparametric bootstrap over cycles"}, {"resamples", resamples}, {"seed", seed}};
}

inline json fit_json(const GainFit& f) {
  return json{{"g", f.g}, {"residual", f.residual}, {"converged", f.converged}, {"iterations", f.iterations}};
}

inline json sweep_summary_json(const RunConfig& rc, const SweepResult& r) {
  json points = json::array();
  for (const auto& row : r.rows) {
    points.push_back(json{{"sweep_index", row.sweep_index},
                          {"intensity_mw_cm2", row.intensity},
                          {"measured", to_json(row.measured)},
                          {"model", to_json(row.model)}});
  }
  json fit = json{{"model", gain_model_name(r.fit_model)}};
  if (r.fit_s1) fit["s1"] = fit_json(*r.fit_s1);
  if (r.fit_s2) fit["s2"] = fit_json(*r.fit_s2);
  json doc{{"schema_version", kSchemaVersion},
           {"command", "sweep"},
           {"status", r.complete ? "complete" : "partial"},
           {"n_points_configured", rc.experiment.sweep.size()},
           {"n_points_completed", r.rows.size()},
           {"n_cycles", rc.experiment.n_cycles},
           {"n_vacuum_cycles", rc.experiment.n_vacuum_cycles()},
           {"samples_per_cycle", rc.experiment.samples_per_cycle},
           {"mode_mismatch", rc.experiment.detection.mode_mismatch},
           {"uncertainty", uncertainty_json(rc.bootstrap_resamples, rc.experiment.seed)},
           {"fit", std::move(fit)},
           {"points", std::move(points)}};
  if (!r.complete) doc["error"] = r.error;
  return doc;
}

}  // namespace mopo
