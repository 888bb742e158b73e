// io.hpp
// Persistence: cycle datasets (NDJSON or CSV), summaries (JSON), figure
// tables (CSV) and debug dumps of synthetic photocurrents.

#pragma once

#include "mopo/cycle_simulator.hpp"
#include "mopo/detection.hpp"
#include "mopo/estimators.hpp"
#include "mopo/gaussian.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mopo {

using nlohmann::json;

inline constexpr std::string_view kSchemaVersion = "1";

/// Malformed or truncated dataset file.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON

/// Row-major nested arrays.
inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const CovarianceMatrix& v) { return matrix_to_json(v.matrix()); }

inline json to_json(const CycleRecord& r) {
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back({s[0], s[1], s[2], s[3]});
  return json{{"sweep_index", r.sweep_index}, {"cycle_index", r.cycle_index}, {"is_vacuum", r.is_vacuum},
              {"theta1", r.theta1},           {"theta2", r.theta2},           {"dt_us", r.dt_us},
              {"window_ms", r.window_ms},     {"samples", std::move(samples)}};
}

inline CycleRecord cycle_record_from_json(const json& j) {
  CycleRecord r;
  r.sweep_index = j.at("sweep_index").get<std::uint64_t>();
  r.cycle_index = j.at("cycle_index").get<std::uint64_t>();
  r.is_vacuum = j.at("is_vacuum").get<bool>();
  r.theta1 = j.at("theta1").get<double>();
  r.theta2 = j.at("theta2").get<double>();
  r.dt_us = j.at("dt_us").get<double>();
  r.window_ms = j.at("window_ms").get<double>();
  for (const auto& s : j.at("samples")) {
    if (!s.is_array() || s.size() != 4) throw std::invalid_argument("sample must be an array of 4 numbers");
    r.samples.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>()});
  }
  return r;
}

inline json to_json(const InvariantSummary& s) {
  return json{
      {"gain", s.gain},
      {"a1", s.a1},
      {"a2", s.a2},
      {"c_pq1", s.c_pq1},
      {"c_pq2", s.c_pq2},
      {"det_a1", s.det_a1},
      {"det_a2", s.det_a2},
      {"det_c", s.det_c},
      {"det_v", s.det_v},
      {"w", s.w},
      {"w_ppt", s.w_ppt},
      {"purity", s.purity},
      {"se_gain", s.se_gain},
      {"se_a1", s.se_a1},
      {"se_a2", s.se_a2},
      {"se_det_a1", s.se_det_a1},
      {"se_det_a2", s.se_det_a2},
      {"se_det_c", s.se_det_c},
      {"se_det_v", s.se_det_v},
      {"se_w", s.se_w},
      {"se_w_ppt", s.se_w_ppt},
      {"se_purity", s.se_purity},
      {"n_cycles_used", s.n_cycles_used},
      {"n_cycles_dropped", s.n_cycles_dropped},
      {"n_vacuum_cycles", s.n_vacuum_cycles},
      {"sql_factor1", s.sql_factor1},
      {"sql_factor2", s.sql_factor2},
      {"det_c_positive", s.det_c_positive},
      {"bootstrap_resamples", s.bootstrap_resamples},
  };
}

// ---------------------------------------------------------------------------
// Cycle datasets
//
// NDJSON: one CycleRecord object per line (see to_json above).
// CSV: header kRecordCsvHeader, one row per sample.

inline constexpr std::string_view kRecordCsvHeader =
    "sweep_index,cycle_index,sample_index,i_cos1,i_sin1,i_cos2,i_sin2,is_vacuum,theta1,theta2";

inline void write_records_ndjson(std::ostream& os, std::span<const CycleRecord> records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline void write_records_csv(std::ostream& os, std::span<const CycleRecord> records, bool header = true) {
  if (header) os << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    for (std::size_t k = 0; k < r.samples.size(); ++k) {
      const auto& s = r.samples[k];
      os << r.sweep_index << ',' << r.cycle_index << ',' << k << ',' << format_double(s[0]) << ','
         << format_double(s[1]) << ',' << format_double(s[2]) << ',' << format_double(s[3]) << ','
         << (r.is_vacuum ? 1 : 0) << ',' << format_double(r.theta1) << ',' << format_double(r.theta2) << '\n';
    }
  }
}

namespace detail {

inline void check_uniform_length(const std::vector<CycleRecord>& records, const std::string& source) {
  if (records.empty()) throw DatasetError(source + ": no records");
  const std::size_t n = records.front().samples.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].samples.size() != n) {
      throw DatasetError(source + ": record " + std::to_string(i) + " has " +
                         std::to_string(records[i].samples.size()) + " samples, expected " + std::to_string(n) +
                         " (truncated after " + std::to_string(i) + " complete records)");
    }
  }
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) throw DatasetError(where + ": cannot parse '" + std::string(field) + "'");
  return value;
}

}  // namespace detail

inline std::vector<CycleRecord> read_records_ndjson(std::istream& is, const std::string& source = "records") {
  std::vector<CycleRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(cycle_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw DatasetError(source + ": line " + std::to_string(line_no) + ": malformed or truncated record after " +
                         std::to_string(out.size()) + " complete records (" + e.what() + ")");
    }
  }
  detail::check_uniform_length(out, source);
  return out;
}

inline std::vector<CycleRecord> read_records_csv(std::istream& is, const std::string& source = "records") {
  std::string line;
  if (!std::getline(is, line) || line != kRecordCsvHeader) {
    throw DatasetError(source + ": missing or unexpected CSV header");
  }
  std::vector<CycleRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ": line " + std::to_string(line_no);
    const auto f = detail::split_csv(line);
    if (f.size() != 10) {
      throw DatasetError(where + ": expected 10 columns, got " + std::to_string(f.size()) + " after " +
                         std::to_string(out.size()) + " records");
    }
    const auto sweep = detail::parse_number<std::uint64_t>(f[0], where);
    const auto cycle = detail::parse_number<std::uint64_t>(f[1], where);
    const auto sample = detail::parse_number<std::size_t>(f[2], where);
    if (out.empty() || out.back().cycle_index != cycle || out.back().sweep_index != sweep) {
      if (sample != 0) throw DatasetError(where + ": cycle does not start at sample 0");
      CycleRecord r;
      r.sweep_index = sweep;
      r.cycle_index = cycle;
      r.is_vacuum = detail::parse_number<int>(f[7], where) != 0;
      r.theta1 = detail::parse_number<double>(f[8], where);
      r.theta2 = detail::parse_number<double>(f[9], where);
      out.push_back(std::move(r));
    } else if (sample != out.back().samples.size()) {
      throw DatasetError(where + ": sample index out of sequence");
    }
    out.back().samples.push_back({detail::parse_number<double>(f[3], where), detail::parse_number<double>(f[4], where),
                                  detail::parse_number<double>(f[5], where), detail::parse_number<double>(f[6], where)});
  }
  detail::check_uniform_length(out, source);
  return out;
}

/// Dispatches on extension: ".csv" is CSV, anything else NDJSON.
inline std::vector<CycleRecord> read_records_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError(path + ": cannot open");
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return csv ? read_records_csv(is, path) : read_records_ndjson(is, path);
}

// ---------------------------------------------------------------------------
// Synthetic photocurrent dumps

inline void write_signal_csv(std::ostream& os, const SampledSignal& sig) {
  os << "time,value\n";
  for (std::size_t k = 0; k < sig.values.size(); ++k) {
    os << format_double(static_cast<double>(k) / sig.sample_rate) << ',' << format_double(sig.values[k]) << '\n';
  }
}

/// Little-endian: float64 sample rate, uint64 count, then float64 values.
inline void write_signal_binary(std::ostream& os, const SampledSignal& sig) {
  const std::uint64_t n = sig.values.size();
  os.write(reinterpret_cast<const char*>(&sig.sample_rate), sizeof(double));
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(reinterpret_cast<const char*>(sig.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

inline SampledSignal read_signal_binary(std::istream& is) {
  SampledSignal sig{};
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&sig.sample_rate), sizeof(double));
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is) throw DatasetError("signal: truncated header");
  sig.values.resize(n);
  is.read(reinterpret_cast<char*>(sig.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw DatasetError("signal: truncated payload");
  return sig;
}

}  // namespace mopo
