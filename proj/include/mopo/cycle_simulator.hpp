// cycle_simulator.hpp
// Monte Carlo emulation of the pulsed acquisition: every trap cycle draws
// fresh local phases and a short burst of heterodyne samples from the
// detected two-mode Gaussian state. Vacuum calibration cycles are interleaved.

#pragma once

#include "mopo/detection.hpp"
#include "mopo/gaussian.hpp"
#include "mopo/mopo_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace mopo {

/// One heterodyne sample of both channels: (i_cos1, i_sin1, i_cos2, i_sin2).
using QuadratureSample = std::array<double, 4>;

struct CycleRecord {
  std::uint64_t sweep_index = 0;
  std::uint64_t cycle_index = 0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  bool is_vacuum = false;
  double dt_us = 25.0;
  double window_ms = 1.6;
  std::vector<QuadratureSample> samples;

  friend bool operator==(const CycleRecord&, const CycleRecord&) = default;
};

enum class PhaseModel {
  Independent,  // theta1, theta2 independent and uniform
  CommonMode,   // one phase phi per cycle, theta1 = theta2 = phi / 2
};

using ModelSpec = std::variant<CouplingMatrix, BlochMessiahFactors>;

struct ExperimentConfig {
  std::uint64_t seed = 20240611;
  std::size_t n_cycles = 5000;
  std::size_t samples_per_cycle = 64;
  double vacuum_ratio = 1.0;  // vacuum calibration cycles per signal cycle
  double dt_us = 25.0;
  double window_ms = 1.6;
  PhaseModel phase_model = PhaseModel::Independent;
  std::size_t threads = 1;
  std::vector<InteractionSetting> sweep;
  DetectionConfig detection;
  // Unit coupling pattern; each sweep point scales it by kappa * sqrt(I).
  ModelSpec model = CouplingMatrix::balanced(1.0);

  std::size_t n_vacuum_cycles() const {
    return static_cast<std::size_t>(std::llround(vacuum_ratio * static_cast<double>(n_cycles)));
  }

  void validate() const {
    if (n_cycles < 1) throw std::invalid_argument("run.n_cycles must be >= 1");
    if (samples_per_cycle < 2) throw std::invalid_argument("run.samples_per_cycle must be >= 2");
    if (!(vacuum_ratio >= 0.0)) throw std::invalid_argument("run.vacuum_ratio must be >= 0");
    if (!(dt_us > 0.0)) throw std::invalid_argument("run.dt_us must be > 0");
    if (!(window_ms > 0.0)) throw std::invalid_argument("run.window_ms must be > 0");
    if (threads < 1) throw std::invalid_argument("run.threads must be >= 1");
    if (sweep.empty()) throw std::invalid_argument("sweep: at least one point is required");
    for (const auto& s : sweep) {
      if (!(s.tau >= 0.0)) throw std::invalid_argument("model.tau must be >= 0");
      if (!(s.pump_intensity >= 0.0)) throw std::invalid_argument("sweep: pump intensities must be >= 0");
    }
    detection.validate();
    if (const auto* f = std::get_if<BlochMessiahFactors>(&model)) {
      if (!(f->lambda1 >= f->lambda2 && f->lambda2 >= 0.0)) {
        throw std::invalid_argument("model: Bloch-Messiah factors need lambda1 >= lambda2 >= 0");
      }
      if (!(f->t1 >= 0.0 && f->t1 <= 1.0 && f->t2 >= 0.0 && f->t2 <= 1.0)) {
        throw std::invalid_argument("model: Bloch-Messiah transmissions must lie in [0, 1]");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Random streams

enum class StreamTag : std::uint32_t { Signal = 1, Vacuum = 2, Bootstrap = 3 };

/// Generator for the stream keyed by (seed, sweep_index, index, tag). The key
/// is mixed through std::seed_seq, whose output is fixed by the standard.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t sweep_index, std::uint64_t index, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),        static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sweep_index), static_cast<std::uint32_t>(sweep_index >> 32),
                    static_cast<std::uint32_t>(index),       static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Model pipeline

/// Unit coupling pattern of the configured model.
inline CouplingMatrix unit_couplings(const ModelSpec& model) {
  if (const auto* c = std::get_if<CouplingMatrix>(&model)) return *c;
  return chis_from_bloch_messiah(std::get<BlochMessiahFactors>(model));
}

/// Modes 1 and 2 of the four-mode output at one sweep point.
inline CovarianceMatrix model_reduced_state(const ModelSpec& model, const InteractionSetting& setting) {
  const CouplingMatrix chis = unit_couplings(model).scaled(setting.coupling_scale());
  const CovarianceMatrix full = output_covariance(assemble_coupling(chis), setting.tau);
  return reduce_to_modes(full, {0, 1});
}

/// Mode mismatch followed by the added-vacuum heterodyne channel.
inline CovarianceMatrix detected_state(const CovarianceMatrix& v2, const DetectionConfig& det) {
  return heterodyne_channel(apply_mode_mismatch(v2, det.mode_mismatch).state);
}

namespace detail {

// L with L L^T = V, from the spectral decomposition so that singular
// (pure-state) covariances are handled.
inline Eigen::Matrix4d sampling_factor(const Eigen::Matrix4d& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(v);
  const Eigen::Vector4d ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument("sample_cycle: covariance is not positive semidefinite");
  }
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// One acquisition cycle drawn from the post-channel covariance V_detected
/// (before phase rotation). Deterministic in (seed, sweep_index, cycle_index, is_vacuum).
inline CycleRecord sample_cycle(const CovarianceMatrix& v_detected, const ExperimentConfig& cfg,
                                std::uint64_t sweep_index, std::uint64_t cycle_index, bool is_vacuum = false) {
  detail::require_two_mode(v_detected);
  auto rng = make_stream(cfg.seed, sweep_index, cycle_index, is_vacuum ? StreamTag::Vacuum : StreamTag::Signal);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  // generate_canonical may round up to the open end
  auto phase = [&](auto& g) {
    const double t = uniform(g);
    return t < 2.0 * std::numbers::pi ? t : 0.0;
  };
  std::normal_distribution<double> normal(0.0, 1.0);

  CycleRecord rec;
  rec.sweep_index = sweep_index;
  rec.cycle_index = cycle_index;
  rec.is_vacuum = is_vacuum;
  rec.dt_us = cfg.dt_us;
  rec.window_ms = cfg.window_ms;
  if (cfg.phase_model == PhaseModel::Independent) {
    rec.theta1 = phase(rng);
    rec.theta2 = phase(rng);
  } else {
    const double phi = phase(rng);
    rec.theta1 = rec.theta2 = 0.5 * phi;
  }

  const CovarianceMatrix rotated = random_phase_rotation(v_detected, rec.theta1, rec.theta2);
  const Eigen::Matrix4d factor = detail::sampling_factor(rotated.matrix());
  rec.samples.resize(cfg.samples_per_cycle);
  for (auto& s : rec.samples) {
    Eigen::Vector4d z;
    for (int k = 0; k < 4; ++k) z(k) = normal(rng);
    const Eigen::Vector4d x = factor * z;
    s = {x(0), x(1), x(2), x(3)};
  }
  return rec;
}

struct SweepPointData {
  std::size_t sweep_index = 0;
  InteractionSetting setting;
  CovarianceMatrix model_state = vacuum_state(2);     // modes 1, 2 before detection
  CovarianceMatrix detected = vacuum_state(2);        // after mismatch and added vacuum
  std::vector<CycleRecord> signal;
  std::vector<CycleRecord> vacuum;
};

namespace detail {

// Runs body(i) for i in [0, n) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n && !failed; i = next++) body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// All cycles of one sweep point in canonical cycle order.
inline SweepPointData run_sweep_point(const ExperimentConfig& cfg, std::size_t sweep_index) {
  if (sweep_index >= cfg.sweep.size()) throw std::invalid_argument("sweep index out of range");
  SweepPointData point;
  point.sweep_index = sweep_index;
  point.setting = cfg.sweep[sweep_index];
  point.model_state = model_reduced_state(cfg.model, point.setting);
  point.detected = detected_state(point.model_state, cfg.detection);

  const std::size_t n_sig = cfg.n_cycles;
  const std::size_t n_vac = cfg.n_vacuum_cycles();
  point.signal.resize(n_sig);
  point.vacuum.resize(n_vac);
  const CovarianceMatrix vac = vacuum_state(2);
  detail::parallel_for(n_sig + n_vac, cfg.threads, [&](std::size_t i) {
    if (i < n_sig) {
      point.signal[i] = sample_cycle(point.detected, cfg, sweep_index, i, false);
    } else {
      point.vacuum[i - n_sig] = sample_cycle(vac, cfg, sweep_index, i - n_sig, true);
    }
  });
  return point;
}

/// Every sweep point. Holds all samples in memory; the CLI streams points
/// through run_sweep_point instead.
inline std::vector<SweepPointData> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SweepPointData> out;
  out.reserve(cfg.sweep.size());
  for (std::size_t k = 0; k < cfg.sweep.size(); ++k) out.push_back(run_sweep_point(cfg, k));
  return out;
}

}  // namespace mopo
