// detection.hpp
// Heterodyne detection: added-vacuum channel and its inversion, mode
// mismatch, per-run phase rotations, and a sample-level demodulation chain
// used to validate the covariance-level model on synthetic photocurrents.

#pragma once

#include "mopo/gaussian.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace mopo {

/// Simultaneous detection of both quadratures mixes in one vacuum mode, the
/// same as a detector of efficiency 1/2.
inline constexpr double kHeterodyneEta = 0.5;

struct DetectionConfig {
  double analysis_frequency = 5e6;  // Hz
  double lowpass_bandwidth = 2e4;   // Hz
  double optical_phase = 0.0;       // rad
  double electronic_phase = 0.0;    // rad
  double mode_mismatch = 0.65;      // amplitude overlap applied to the cross block

  void validate() const {
    if (!(analysis_frequency > 0.0)) throw std::invalid_argument("detection.analysis_frequency must be > 0");
    if (!(lowpass_bandwidth > 0.0)) throw std::invalid_argument("detection.lowpass_bandwidth must be > 0");
    if (!(mode_mismatch >= 0.0 && mode_mismatch <= 1.0)) {
      throw std::invalid_argument("detection.mode_mismatch must lie in [0, 1]");
    }
  }
};

/// V' = eta (V - I) + I on every mode, i.e. V' = (V + I)/2 on diagonal
/// blocks and 1/2 on cross blocks between detected modes.
inline CovarianceMatrix heterodyne_channel(const CovarianceMatrix& v) {
  const auto n = static_cast<Eigen::Index>(v.dim());
  Matrix out = kHeterodyneEta * (v.matrix() - Matrix::Identity(n, n)) + Matrix::Identity(n, n);
  return CovarianceMatrix(std::move(out));
}

/// V = 2 V' - I. Accepts non-physical raw estimates.
inline CovarianceMatrix correct_added_vacuum(const CovarianceMatrix& v_meas) {
  const auto n = static_cast<Eigen::Index>(v_meas.dim());
  Matrix out = (v_meas.matrix() - Matrix::Identity(n, n)) / kHeterodyneEta + Matrix::Identity(n, n);
  return CovarianceMatrix(std::move(out));
}

struct MismatchedState {
  CovarianceMatrix state;
  bool physical;
};

/// Scales the cross block C by the amplitude overlap m; A1 and A2 are kept.
inline MismatchedState apply_mode_mismatch(const CovarianceMatrix& v2, double m) {
  detail::require_two_mode(v2);
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("mode mismatch must lie in [0, 1]");
  Matrix out = v2.matrix();
  out.block<2, 2>(0, 2) *= m;
  out.block<2, 2>(2, 0) *= m;
  CovarianceMatrix state(std::move(out));
  const bool physical = state.is_physical();
  return {std::move(state), physical};
}

/// (R_theta1 (+) R_theta2) V (R_theta1 (+) R_theta2)^T
inline CovarianceMatrix random_phase_rotation(const CovarianceMatrix& v2, double theta1, double theta2) {
  detail::require_two_mode(v2);
  Matrix r = Matrix::Zero(4, 4);
  r.block<2, 2>(0, 0) = phase_rotation(theta1);
  r.block<2, 2>(2, 2) = phase_rotation(theta2);
  Matrix out = r * v2.matrix() * r.transpose();
  out = 0.5 * (out + out.transpose()).eval();
  return CovarianceMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// Sample-level demodulation

struct DemodSamplePair {
  double i_cos;
  double i_sin;
};

struct SampledSignal {
  double sample_rate;  // Hz
  std::vector<double> values;
};

/// Samples averaged into one demodulated output: one acquisition slot of
/// length 1/(2 * bandwidth).
inline std::size_t demod_window_length(double sample_rate, const DetectionConfig& cfg) {
  return static_cast<std::size_t>(std::llround(sample_rate / (2.0 * cfg.lowpass_bandwidth)));
}

/// Per-sample variance of white noise that reads as one vacuum unit at the
/// output: both sidebands of vacuum, (1 + 1)/2. Half of it is the image
/// sideband alone, the added vacuum of heterodyne detection.
inline double vacuum_noise_variance(double sample_rate, const DetectionConfig& cfg) {
  return static_cast<double>(demod_window_length(sample_rate, cfg));
}

/// Mix with in-quadrature references at the analysis frequency, low-pass with
/// a moving average over one acquisition slot and decimate to one output per slot.
///
///   i_cos =  sqrt(2) <x cos(Omega t + theta)>
///   i_sin = -sqrt(2) <x sin(Omega t + theta)>
///
/// For x = p cos(Omega t) + q sin(Omega t) the outputs read (p/sqrt2, -q/sqrt2).
inline std::vector<DemodSamplePair> demodulation_chain(const SampledSignal& signal, const DetectionConfig& cfg) {
  cfg.validate();
  if (!(signal.sample_rate >= 10.0 * cfg.analysis_frequency)) {
    throw std::invalid_argument("demodulation_chain: sample rate must be at least 10x the analysis frequency");
  }
  const std::size_t window = demod_window_length(signal.sample_rate, cfg);
  if (window == 0 || signal.values.size() < window) {
    throw std::invalid_argument("demodulation_chain: signal shorter than one low-pass window");
  }
  const std::size_t n_out = signal.values.size() / window;
  const double omega = 2.0 * std::numbers::pi * cfg.analysis_frequency / signal.sample_rate;
  std::vector<DemodSamplePair> out;
  out.reserve(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc_c = 0.0;
    double acc_s = 0.0;
    for (std::size_t j = 0; j < window; ++j) {
      const std::size_t idx = k * window + j;
      const double phase = omega * static_cast<double>(idx) + cfg.electronic_phase;
      acc_c += signal.values[idx] * std::cos(phase);
      acc_s += signal.values[idx] * std::sin(phase);
    }
    out.push_back({std::numbers::sqrt2 * acc_c / static_cast<double>(window),
                   -std::numbers::sqrt2 * acc_s / static_cast<double>(window)});
  }
  return out;
}

struct QuadraturePair {
  double p;
  double q;
};

/// Synthetic photocurrent: one (p, q) pair per acquisition slot on the signal
/// sideband, rotated by the optical phase, plus white noise of the given
/// per-sample variance.
template <class Rng>
SampledSignal synthesize_signal(std::span<const QuadraturePair> slots, double sample_rate, const DetectionConfig& cfg,
                                double noise_variance, Rng& rng) {
  const std::size_t window = demod_window_length(sample_rate, cfg);
  const double omega = 2.0 * std::numbers::pi * cfg.analysis_frequency / sample_rate;
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
  SampledSignal out{sample_rate, std::vector<double>(slots.size() * window)};
  for (std::size_t k = 0; k < slots.size(); ++k) {
    for (std::size_t j = 0; j < window; ++j) {
      const std::size_t idx = k * window + j;
      const double phase = omega * static_cast<double>(idx) + cfg.optical_phase;
      double x = slots[k].p * std::cos(phase) + slots[k].q * std::sin(phase);
      if (noise_variance > 0.0) x += noise(rng);
      out.values[idx] = x;
    }
  }
  return out;
}

}  // namespace mopo
