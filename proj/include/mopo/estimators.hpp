// estimators.hpp
// Rotation-invariant estimators over trap-cycle datasets.
//
// The cross block C cannot be averaged across cycles (random phases wash it
// out), so Det[C] is estimated per cycle and then averaged. Det[A_i] comes
// from variances pooled over all cycles with the p-q covariance set to zero;
// the per-cycle Det[A] is biased low at 64 samples and kept only as a
// diagnostic. Order of operations: vacuum (SQL) normalization, then the
// added-vacuum correction V = 2V' - I, then determinants.

#pragma once

#include "mopo/cycle_simulator.hpp"
#include "mopo/gaussian.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <stdexcept>
#include <vector>

namespace mopo {

/// Multiplicative variance factors that map each channel's raw vacuum
/// variance to 1.
struct SqlCalibration {
  double factor1 = 1.0;
  double factor2 = 1.0;

  static SqlCalibration unit() { return {}; }
};

/// Sufficient statistics of one cycle.
struct CycleMoments {
  std::size_t n = 0;
  std::array<double, 4> sum_sq{};  // cos1^2, sin1^2, cos2^2, sin2^2
  double sum_cs1 = 0.0;            // cos1 * sin1
  double sum_cs2 = 0.0;
  Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();  // sum of (cos1, sin1)^T (cos2, sin2)

  bool degenerate() const {
    return n < 2 || sum_sq[0] + sum_sq[1] == 0.0 || sum_sq[2] + sum_sq[3] == 0.0;
  }

  /// Det of the raw cross-covariance block, unbiased for zero-mean Gaussian
  /// data: E[det(S)] = (1 - 1/n) Det C for S = (1/n) sum x y^T.
  double raw_cross_determinant() const {
    const double nn = static_cast<double>(n);
    return (cross / nn).determinant() * nn / (nn - 1.0);
  }
};

inline CycleMoments cycle_moments(const CycleRecord& rec) {
  CycleMoments m;
  m.n = rec.samples.size();
  for (const auto& s : rec.samples) {
    for (int k = 0; k < 4; ++k) m.sum_sq[static_cast<std::size_t>(k)] += s[static_cast<std::size_t>(k)] * s[static_cast<std::size_t>(k)];
    m.sum_cs1 += s[0] * s[1];
    m.sum_cs2 += s[2] * s[3];
    m.cross(0, 0) += s[0] * s[2];
    m.cross(0, 1) += s[0] * s[3];
    m.cross(1, 0) += s[1] * s[2];
    m.cross(1, 1) += s[1] * s[3];
  }
  return m;
}

inline std::vector<CycleMoments> cycle_moments(std::span<const CycleRecord> records) {
  std::vector<CycleMoments> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(cycle_moments(r));
  return out;
}

/// Per-channel SQL factors from vacuum cycles, pooling cos and sin.
inline SqlCalibration sql_calibration(std::span<const CycleMoments> vacuum) {
  double s1 = 0.0;
  double s2 = 0.0;
  std::size_t n = 0;
  for (const auto& m : vacuum) {
    s1 += m.sum_sq[0] + m.sum_sq[1];
    s2 += m.sum_sq[2] + m.sum_sq[3];
    n += m.n;
  }
  if (n == 0) throw std::invalid_argument("missing vacuum calibration: no vacuum samples");
  if (s1 <= 0.0 || s2 <= 0.0) throw std::invalid_argument("vacuum calibration has zero variance");
  return {2.0 * static_cast<double>(n) / s1, 2.0 * static_cast<double>(n) / s2};
}

inline SqlCalibration sql_calibration(std::span<const CycleRecord> vacuum) {
  const auto m = cycle_moments(vacuum);
  return sql_calibration(std::span<const CycleMoments>(m));
}

struct CrossDeterminant {
  double value;     // 0 when degenerate
  bool degenerate;  // zero variance in a channel, or fewer than 2 samples
};

/// Det[C] of one cycle after SQL normalization and the added-vacuum
/// correction c = 2 c'.
inline CrossDeterminant cycle_cross_determinant(const CycleMoments& m, const SqlCalibration& sql = {}) {
  if (m.degenerate()) return {0.0, true};
  return {4.0 * sql.factor1 * sql.factor2 * m.raw_cross_determinant(), false};
}

inline CrossDeterminant cycle_cross_determinant(const CycleRecord& rec, const SqlCalibration& sql = {}) {
  return cycle_cross_determinant(cycle_moments(rec), sql);
}

struct PooledAutocovariance {
  double a1;
  double a2;
  double c_pq1;  // pooled p-q covariance, corrected; tends to 0
  double c_pq2;
};

namespace detail {

struct PooledSums {
  std::array<double, 4> sum_sq{};
  double cs1 = 0.0;
  double cs2 = 0.0;
  double n = 0.0;

  void add(const CycleMoments& m) {
    for (std::size_t k = 0; k < 4; ++k) sum_sq[k] += m.sum_sq[k];
    cs1 += m.sum_cs1;
    cs2 += m.sum_cs2;
    n += static_cast<double>(m.n);
  }

  PooledAutocovariance corrected(const SqlCalibration& sql) const {
    auto corr = [&](double raw, double f) { return 2.0 * f * raw / n - 1.0; };
    const double a1 = 0.5 * (corr(sum_sq[0], sql.factor1) + corr(sum_sq[1], sql.factor1));
    const double a2 = 0.5 * (corr(sum_sq[2], sql.factor2) + corr(sum_sq[3], sql.factor2));
    return {a1, a2, 2.0 * sql.factor1 * cs1 / n, 2.0 * sql.factor2 * cs2 / n};
  }
};

}  // namespace detail

inline PooledAutocovariance pooled_autocovariance(std::span<const CycleMoments> records, const SqlCalibration& sql) {
  if (records.size() < 2) throw std::invalid_argument("pooled_autocovariance needs at least 2 records");
  detail::PooledSums sums;
  for (const auto& m : records) sums.add(m);
  if (sums.n == 0.0) throw std::invalid_argument("pooled_autocovariance: records hold no samples");
  return sums.corrected(sql);
}

inline PooledAutocovariance pooled_autocovariance(std::span<const CycleRecord> records, const SqlCalibration& sql) {
  const auto m = cycle_moments(records);
  return pooled_autocovariance(std::span<const CycleMoments>(m), sql);
}

/// Normalizes against the given vacuum cycles; throws when there are none.
inline PooledAutocovariance pooled_autocovariance(std::span<const CycleRecord> records,
                                                  std::span<const CycleRecord> vacuum) {
  return pooled_autocovariance(records, sql_calibration(vacuum));
}

struct PerCycleDetA {
  double mean_det_a1;
  double mean_det_a2;
  double se_det_a1;
  double se_det_a2;
};

/// Mean of Det[A_i] evaluated cycle by cycle (p-q covariance included).
/// Biased low; see the pooled estimator.
inline PerCycleDetA per_cycle_det_a(std::span<const CycleMoments> records, const SqlCalibration& sql) {
  if (records.size() < 2) throw std::invalid_argument("per_cycle_det_a needs at least 2 records");
  std::vector<double> d1;
  std::vector<double> d2;
  for (const auto& m : records) {
    if (m.n == 0) continue;
    const double n = static_cast<double>(m.n);
    auto det = [&](double pp, double qq, double pq, double f) {
      const double a = 2.0 * f * pp / n - 1.0;
      const double b = 2.0 * f * qq / n - 1.0;
      const double c = 2.0 * f * pq / n;
      return a * b - c * c;
    };
    d1.push_back(det(m.sum_sq[0], m.sum_sq[1], m.sum_cs1, sql.factor1));
    d2.push_back(det(m.sum_sq[2], m.sum_sq[3], m.sum_cs2, sql.factor2));
  }
  auto mean_se = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
  };
  const auto [m1, s1] = mean_se(d1);
  const auto [m2, s2] = mean_se(d2);
  return {m1, m2, s1, s2};
}

// ---------------------------------------------------------------------------
// Summary

struct InvariantSummary {
  double gain = 1.0;
  double a1 = 1.0;
  double a2 = 1.0;
  double c_pq1 = 0.0;
  double c_pq2 = 0.0;
  double det_a1 = 1.0;
  double det_a2 = 1.0;
  double det_c = 0.0;
  double det_v = 1.0;
  double w = 0.0;
  double w_ppt = 0.0;
  double purity = 1.0;
  double se_gain = 0.0;
  double se_a1 = 0.0;
  double se_a2 = 0.0;
  double se_det_a1 = 0.0;
  double se_det_a2 = 0.0;
  double se_det_c = 0.0;
  double se_det_v = 0.0;
  double se_w = 0.0;
  double se_w_ppt = 0.0;
  double se_purity = 0.0;
  std::size_t n_cycles_used = 0;
  std::size_t n_cycles_dropped = 0;
  std::size_t n_vacuum_cycles = 0;
  double sql_factor1 = 1.0;
  double sql_factor2 = 1.0;
  bool det_c_positive = false;  // flag: Det[C] > 0 means no entanglement signature
  std::size_t bootstrap_resamples = 0;
};

struct SummaryOptions {
  std::size_t bootstrap_resamples = 200;
  std::uint64_t seed = 20240611;
  std::uint64_t sweep_index = 0;
  std::optional<double> model_gain;  // report this gain instead of (a1 + a2)/2
};

namespace detail {

struct PointEstimate {
  double gain, a1, a2, c_pq1, c_pq2, det_a1, det_a2, det_c, det_v, w, w_ppt, purity;
  double sql1, sql2;
  std::size_t used, dropped;
};

// Estimates from cycles selected by index (with repetition for the bootstrap).
inline PointEstimate estimate(std::span<const CycleMoments> sig, std::span<const std::size_t> sig_idx,
                              std::span<const CycleMoments> vac, std::span<const std::size_t> vac_idx,
                              const std::optional<double>& model_gain) {
  double v1 = 0.0;
  double v2 = 0.0;
  double nv = 0.0;
  for (std::size_t i : vac_idx) {
    v1 += vac[i].sum_sq[0] + vac[i].sum_sq[1];
    v2 += vac[i].sum_sq[2] + vac[i].sum_sq[3];
    nv += static_cast<double>(vac[i].n);
  }
  if (nv == 0.0 || v1 <= 0.0 || v2 <= 0.0) throw std::invalid_argument("missing vacuum calibration");
  const SqlCalibration sql{2.0 * nv / v1, 2.0 * nv / v2};

  PooledSums sums;
  double det_c_acc = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;
  for (std::size_t i : sig_idx) {
    sums.add(sig[i]);
    const auto d = cycle_cross_determinant(sig[i], sql);
    if (d.degenerate) {
      ++dropped;
      continue;
    }
    det_c_acc += d.value;
    ++used;
  }
  if (used == 0 || sums.n == 0.0) throw std::invalid_argument("no usable signal cycles");
  const auto pooled = sums.corrected(sql);

  PointEstimate e{};
  e.sql1 = sql.factor1;
  e.sql2 = sql.factor2;
  e.a1 = pooled.a1;
  e.a2 = pooled.a2;
  e.c_pq1 = pooled.c_pq1;
  e.c_pq2 = pooled.c_pq2;
  e.det_a1 = pooled.a1 * pooled.a1;
  e.det_a2 = pooled.a2 * pooled.a2;
  e.det_c = det_c_acc / static_cast<double>(used);
  e.det_v = det_v_symmetric(e.det_a1, e.det_a2, e.det_c);
  const auto wp = witness_from_determinants(e.det_a1, e.det_a2, e.det_c, e.det_v);
  e.w = wp.w;
  e.w_ppt = wp.w_ppt;
  e.purity = e.det_v > 0.0 ? 1.0 / std::sqrt(e.det_v) : std::numeric_limits<double>::quiet_NaN();
  e.gain = model_gain ? *model_gain : 0.5 * (pooled.a1 + pooled.a2);
  e.used = used;
  e.dropped = dropped;
  return e;
}

// Sample standard deviation over finite entries.
inline double finite_stddev(const std::vector<double>& v) {
  double mean = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      mean += x;
      ++n;
    }
  }
  if (n < 2) return 0.0;
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) acc += (x - mean) * (x - mean);
  }
  return std::sqrt(acc / static_cast<double>(n - 1));
}

}  // namespace detail

inline InvariantSummary summarize(std::span<const CycleMoments> records, std::span<const CycleMoments> vacuum,
                                  const SummaryOptions& opts = {}) {
  if (records.empty()) throw std::invalid_argument("summarize: no signal records");
  if (vacuum.empty()) throw std::invalid_argument("summarize: missing vacuum calibration records");

  std::vector<std::size_t> sig_idx(records.size());
  std::vector<std::size_t> vac_idx(vacuum.size());
  for (std::size_t i = 0; i < sig_idx.size(); ++i) sig_idx[i] = i;
  for (std::size_t i = 0; i < vac_idx.size(); ++i) vac_idx[i] = i;
  const auto e = detail::estimate(records, sig_idx, vacuum, vac_idx, opts.model_gain);
  if (!(e.det_v > 0.0)) throw std::runtime_error("summarize: estimated Det[V] is not positive, purity undefined");

  InvariantSummary s;
  s.gain = e.gain;
  s.a1 = e.a1;
  s.a2 = e.a2;
  s.c_pq1 = e.c_pq1;
  s.c_pq2 = e.c_pq2;
  s.det_a1 = e.det_a1;
  s.det_a2 = e.det_a2;
  s.det_c = e.det_c;
  s.det_v = e.det_v;
  s.w = e.w;
  s.w_ppt = e.w_ppt;
  s.purity = e.purity;
  s.n_cycles_used = e.used;
  s.n_cycles_dropped = e.dropped;
  s.n_vacuum_cycles = vacuum.size();
  s.sql_factor1 = e.sql1;
  s.sql_factor2 = e.sql2;
  s.det_c_positive = e.det_c > 0.0;
  s.bootstrap_resamples = opts.bootstrap_resamples;

  if (opts.bootstrap_resamples >= 2) {
    auto rng = make_stream(opts.seed, opts.sweep_index, 0, StreamTag::Bootstrap);
    std::uniform_int_distribution<std::size_t> pick_sig(0, records.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_vac(0, vacuum.size() - 1);
    const std::size_t b = opts.bootstrap_resamples;
    std::vector<double> gain(b), a1(b), a2(b), da1(b), da2(b), dc(b), dv(b), w(b), wp(b), mu(b);
    for (std::size_t k = 0; k < b; ++k) {
      for (auto& i : sig_idx) i = pick_sig(rng);
      for (auto& i : vac_idx) i = pick_vac(rng);
      try {
        const auto r = detail::estimate(records, sig_idx, vacuum, vac_idx, opts.model_gain);
        gain[k] = r.gain;
        a1[k] = r.a1;
        a2[k] = r.a2;
        da1[k] = r.det_a1;
        da2[k] = r.det_a2;
        dc[k] = r.det_c;
        dv[k] = r.det_v;
        w[k] = r.w;
        wp[k] = r.w_ppt;
        mu[k] = r.purity;
      } catch (const std::invalid_argument&) {
        // a resample made only of degenerate cycles; leave it out
        gain[k] = a1[k] = a2[k] = da1[k] = da2[k] = dc[k] = dv[k] = w[k] = wp[k] = mu[k] =
            std::numeric_limits<double>::quiet_NaN();
      }
    }
    s.se_gain = detail::finite_stddev(gain);
    s.se_a1 = detail::finite_stddev(a1);
    s.se_a2 = detail::finite_stddev(a2);
    s.se_det_a1 = detail::finite_stddev(da1);
    s.se_det_a2 = detail::finite_stddev(da2);
    s.se_det_c = detail::finite_stddev(dc);
    s.se_det_v = detail::finite_stddev(dv);
    s.se_w = detail::finite_stddev(w);
    s.se_w_ppt = detail::finite_stddev(wp);
    s.se_purity = detail::finite_stddev(mu);
  }
  return s;
}

inline InvariantSummary summarize(std::span<const CycleRecord> records, std::span<const CycleRecord> vacuum,
                                  const SummaryOptions& opts = {}) {
  const auto sig = cycle_moments(records);
  const auto vac = cycle_moments(vacuum);
  return summarize(std::span<const CycleMoments>(sig), std::span<const CycleMoments>(vac), opts);
}

/// Noiseless counterpart of summarize for a model state: Det[A_i] from the
/// true variances, Det[C] after mode mismatch, Det[V] through the symmetric form.
inline InvariantSummary analytic_summary(const CovarianceMatrix& model_state, double mode_mismatch) {
  detail::require_two_mode(model_state);
  const auto mismatched = apply_mode_mismatch(model_state, mode_mismatch).state;
  const auto d = block_determinants(mismatched);
  InvariantSummary s;
  s.a1 = 0.5 * (model_state(0, 0) + model_state(1, 1));
  s.a2 = 0.5 * (model_state(2, 2) + model_state(3, 3));
  s.gain = 0.5 * (s.a1 + s.a2);
  s.det_a1 = d.det_a1;
  s.det_a2 = d.det_a2;
  s.det_c = d.det_c;
  s.det_v = det_v_symmetric(d.det_a1, d.det_a2, d.det_c);
  const auto wp = witness_from_determinants(s.det_a1, s.det_a2, s.det_c, s.det_v);
  s.w = wp.w;
  s.w_ppt = wp.w_ppt;
  s.purity = purity(s.det_v);
  s.det_c_positive = s.det_c > 0.0;
  return s;
}

}  // namespace mopo
