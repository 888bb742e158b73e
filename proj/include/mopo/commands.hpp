// commands.hpp
// The three CLI subcommands as functions returning process exit codes:
// 0 success, 2 bad input (config, dataset, table), 3 runtime failure.

#pragma once

#include "mopo/config.hpp"
#include "mopo/io.hpp"
#include "mopo/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mopo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

enum class RecordFormat { Json, Csv };

struct SweepOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  RecordFormat format = RecordFormat::Json;
  bool save_records = false;
};

struct AnalyzeOptions {
  std::string records_path;
  std::string vacuum_path;
  std::string out_dir = ".";
  std::uint64_t seed = 20240611;
  std::size_t bootstrap_resamples = 200;
};

struct FitOptions {
  std::string fig2_path;
  std::string out_dir = ".";
  GainModel model = GainModel::HalfCosh;
};

namespace detail {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError(dir + ": cannot create output directory (" + ec.message() + ")");
  return dir;
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw OutputError(path.string() + ": cannot open for writing");
  writer(os);
  os.flush();
  if (!os) throw OutputError(path.string() + ": write failed");
}

inline void write_json(const std::filesystem::path& path, const json& doc) {
  write_file(path, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

}  // namespace detail

inline int cmd_sweep(const SweepOptions& opt, std::ostream& err) {
  RunConfig rc;
  try {
    rc = load_config(opt.config_path);
    if (opt.seed) rc.experiment.seed = *opt.seed;
    if (opt.threads) {
      if (*opt.threads < 1) throw ConfigError("--threads: must be >= 1");
      rc.experiment.threads = *opt.threads;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInput;
  }

  try {
    const auto dir = detail::prepare_dir(opt.out_dir);
    std::ofstream rec_os;
    std::ofstream vac_os;
    const bool csv = opt.format == RecordFormat::Csv;
    if (opt.save_records) {
      const std::string ext = csv ? ".csv" : ".ndjson";
      rec_os.open(dir / ("records" + ext), std::ios::binary);
      vac_os.open(dir / ("vacuum" + ext), std::ios::binary);
      if (!rec_os || !vac_os) throw detail::OutputError("cannot open record files in " + opt.out_dir);
    }
    bool first = true;
    PointObserver observe;
    if (opt.save_records) {
      observe = [&](const SweepPointData& p) {
        if (csv) {
          write_records_csv(rec_os, p.signal, first);
          write_records_csv(vac_os, p.vacuum, first);
        } else {
          write_records_ndjson(rec_os, p.signal);
          write_records_ndjson(vac_os, p.vacuum);
        }
        first = false;
      };
    }

    const SweepResult result = run_sweep(rc, observe);
    if (opt.save_records) {
      rec_os.flush();
      vac_os.flush();
      if (!rec_os || !vac_os) throw detail::OutputError("writing record files failed");
    }
    detail::write_file(dir / "fig2.csv", [&](std::ostream& os) { write_fig2(os, result); });
    detail::write_file(dir / "fig3.csv", [&](std::ostream& os) { write_fig3(os, result); });
    detail::write_file(dir / "fig4.csv", [&](std::ostream& os) { write_fig4(os, result); });
    detail::write_file(dir / "fig5.csv", [&](std::ostream& os) { write_fig5(os, result); });
    detail::write_json(dir / "summary.json", sweep_summary_json(rc, result));
    if (!result.complete) {
      err << "estimator failure: " << result.error << " (partial outputs written, summary status \"partial\")\n";
      return kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int cmd_analyze(const AnalyzeOptions& opt, std::ostream& err) {
  std::vector<CycleRecord> records;
  std::vector<CycleRecord> vacuum;
  try {
    records = read_records_file(opt.records_path);
    vacuum = read_records_file(opt.vacuum_path);
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << '\n';
    return kExitInput;
  }

  std::map<std::uint64_t, std::vector<CycleRecord>> sig_by_point;
  std::map<std::uint64_t, std::vector<CycleRecord>> vac_by_point;
  for (auto& r : records) {
    if (r.is_vacuum) {
      err << "dataset error: " << opt.records_path << ": contains vacuum-flagged cycle " << r.cycle_index << '\n';
      return kExitInput;
    }
    sig_by_point[r.sweep_index].push_back(std::move(r));
  }
  for (auto& r : vacuum) vac_by_point[r.sweep_index].push_back(std::move(r));
  for (const auto& [k, v] : sig_by_point) {
    if (!vac_by_point.contains(k)) {
      err << "dataset error: no vacuum calibration cycles for sweep_index " << k << '\n';
      return kExitInput;
    }
  }

  try {
    json points = json::array();
    for (const auto& [k, sig] : sig_by_point) {
      SummaryOptions so;
      so.bootstrap_resamples = opt.bootstrap_resamples;
      so.seed = opt.seed;
      so.sweep_index = k;
      const auto s = summarize(std::span<const CycleRecord>(sig), std::span<const CycleRecord>(vac_by_point[k]), so);
      points.push_back(json{{"sweep_index", k}, {"summary", to_json(s)}});
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "analyze"},
             {"status", "complete"},
             {"uncertainty", uncertainty_json(opt.bootstrap_resamples, opt.seed)},
             {"points", std::move(points)}};
    detail::write_json(detail::prepare_dir(opt.out_dir) / "summary.json", doc);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct Fig2Table {
  std::vector<double> intensity, var_s1, var_s2, se_var_s1, se_var_s2;
};

inline Fig2Table read_fig2(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line) || line != kFig2Header) throw DatasetError(source + ": not a fig2 table (header mismatch)");
  Fig2Table t;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ": line " + std::to_string(line_no);
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw DatasetError(where + ": expected 7 columns");
    t.intensity.push_back(detail::parse_number<double>(f[0], where));
    t.var_s1.push_back(detail::parse_number<double>(f[1], where));
    t.var_s2.push_back(detail::parse_number<double>(f[2], where));
    t.se_var_s1.push_back(detail::parse_number<double>(f[3], where));
    t.se_var_s2.push_back(detail::parse_number<double>(f[4], where));
  }
  return t;
}

/// Fit of one channel with per-point deviations. A point's standardized
/// residual divides by its standard error, or by the rms residual when the
/// table carries none.
inline json fit_channel_json(const std::vector<double>& intensity, const std::vector<double>& var,
                             const std::vector<double>& se, GainModel model) {
  std::vector<GainPoint> pts;
  for (std::size_t i = 0; i < intensity.size(); ++i) pts.push_back({intensity[i], var[i]});
  const GainFit f = fit_gain_curve(pts, model);
  const double rms = std::sqrt(f.residual / static_cast<double>(pts.size()));
  json dev = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double fitted = gain_model(model, f.g, pts[i].intensity);
    const double r = pts[i].variance - fitted;
    const double scale = se[i] > 0.0 ? se[i] : rms;
    dev.push_back(json{{"intensity_mw_cm2", pts[i].intensity},
                       {"variance", pts[i].variance},
                       {"fit", fitted},
                       {"residual", r},
                       {"standardized_residual", scale > 0.0 ? r / scale : 0.0}});
  }
  json out = fit_json(f);
  out["deviations"] = std::move(dev);
  return out;
}

inline int cmd_fit(const FitOptions& opt, std::ostream& err) {
  Fig2Table t;
  try {
    std::ifstream is(opt.fig2_path);
    if (!is) throw DatasetError(opt.fig2_path + ": cannot open");
    t = read_fig2(is, opt.fig2_path);
    if (t.intensity.size() < 3) {
      throw DatasetError(opt.fig2_path + ": " + std::to_string(t.intensity.size()) +
                         " rows, the fit needs at least 3 points");
    }
    for (std::size_t i = 0; i < t.intensity.size(); ++i) {
      if (!(t.intensity[i] >= 0.0)) throw DatasetError(opt.fig2_path + ": negative intensity");
    }
  } catch (const DatasetError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  }
  try {
    json doc{{"schema_version", kSchemaVersion},
             {"command", "fit"},
             {"model", gain_model_name(opt.model)},
             {"s1", fit_channel_json(t.intensity, t.var_s1, t.se_var_s1, opt.model)},
             {"s2", fit_channel_json(t.intensity, t.var_s2, t.se_var_s2, opt.model)}};
    detail::write_json(detail::prepare_dir(opt.out_dir) / "fit.json", doc);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace mopo
