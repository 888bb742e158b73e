#include "mopo/cycle_simulator.hpp"
#include "mopo/detection.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace mopo;
using mopo::testing::max_abs;

namespace {

const double kC15 = std::sqrt(0.75);  // c of the balanced state with a = 1.5

DetectionConfig fast_config() {
  DetectionConfig cfg;
  cfg.analysis_frequency = 5e6;
  cfg.lowpass_bandwidth = 2e4;
  return cfg;
}

constexpr double kSampleRate = 50e6;

struct ChannelStats {
  double mean_cos, mean_sin, var_cos, var_sin;
};

ChannelStats stats(const std::vector<DemodSamplePair>& out) {
  double mc = 0.0, ms = 0.0;
  for (const auto& o : out) {
    mc += o.i_cos;
    ms += o.i_sin;
  }
  const double n = static_cast<double>(out.size());
  mc /= n;
  ms /= n;
  double vc = 0.0, vs = 0.0;
  for (const auto& o : out) {
    vc += (o.i_cos - mc) * (o.i_cos - mc);
    vs += (o.i_sin - ms) * (o.i_sin - ms);
  }
  return {mc, ms, vc / (n - 1.0), vs / (n - 1.0)};
}

}  // namespace

TEST(HeterodyneChannel, Examples) {
  EXPECT_LT(max_abs(heterodyne_channel(vacuum_state(2)).matrix() - Matrix::Identity(4, 4)), 1e-15);
  const auto one = heterodyne_channel(CovarianceMatrix(Matrix::Identity(2, 2) * 3.0));
  EXPECT_NEAR(one(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(one(1, 1), 2.0, 1e-15);
  const auto two = heterodyne_channel(symmetric_two_mode(1.5, 1.5, kC15));
  EXPECT_NEAR(two(0, 0), 1.25, 1e-15);
  EXPECT_NEAR(two(0, 2), kC15 / 2.0, 1e-15);
  EXPECT_NEAR(two(0, 2), 0.433, 1e-3);
  EXPECT_NEAR(two(1, 3), -kC15 / 2.0, 1e-15);
}

TEST(CorrectAddedVacuum, Examples) {
  EXPECT_LT(max_abs(correct_added_vacuum(vacuum_state(2)).matrix() - Matrix::Identity(4, 4)), 1e-15);
  const auto v = correct_added_vacuum(symmetric_two_mode(1.25, 1.25, kC15 / 2.0));
  EXPECT_NEAR(v(0, 0), 1.5, 1e-15);
  EXPECT_NEAR(v(0, 2), kC15, 1e-15);
}

TEST(CorrectAddedVacuum, AcceptsNonPhysicalEstimates) {
  const CovarianceMatrix raw(Matrix::Identity(4, 4) * 0.4);
  EXPECT_NO_THROW(correct_added_vacuum(raw));
}

TEST(CorrectAddedVacuum, InverseOfChannelOnRandomStates) {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 100; ++k) {
    const auto v = mopo::testing::random_physical_state(rng);
    const double scale = std::max(1.0, max_abs(v.matrix()));
    EXPECT_LT(max_abs(correct_added_vacuum(heterodyne_channel(v)).matrix() - v.matrix()), 1e-12 * scale);
    EXPECT_LT(max_abs(heterodyne_channel(correct_added_vacuum(v)).matrix() - v.matrix()), 1e-12 * scale);
  }
}

TEST(ApplyModeMismatch, Examples) {
  const auto v = symmetric_two_mode(1.5, 1.5, kC15);
  EXPECT_EQ(apply_mode_mismatch(v, 1.0).state, v);
  const auto zero = apply_mode_mismatch(v, 0.0);
  EXPECT_EQ(block_determinants(zero.state).det_c, 0.0);
  EXPECT_EQ(zero.state(0, 0), 1.5);
  const auto m = apply_mode_mismatch(v, 0.65);
  EXPECT_NEAR(m.state(0, 2), 0.5629, 1e-4);
  EXPECT_NEAR(block_determinants(m.state).det_c, -0.3169, 1e-4);
  EXPECT_TRUE(m.physical);
}

TEST(ApplyModeMismatch, OutOfRangeRejected) {
  EXPECT_THROW(apply_mode_mismatch(vacuum_state(2), 1.1), std::invalid_argument);
  EXPECT_THROW(apply_mode_mismatch(vacuum_state(2), -0.1), std::invalid_argument);
  EXPECT_THROW(apply_mode_mismatch(vacuum_state(3), 0.5), std::invalid_argument);
}

TEST(ApplyModeMismatch, CrossDeterminantScalesWithSquare) {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const auto v = mopo::testing::random_physical_state(rng);
    const double m = u(rng);
    const auto a = block_determinants(v);
    const auto b = block_determinants(apply_mode_mismatch(v, m).state);
    EXPECT_NEAR(std::abs(b.det_c), m * m * std::abs(a.det_c), 1e-12 * std::max(1.0, std::abs(a.det_c)));
    EXPECT_EQ(a.det_a1, b.det_a1);
    EXPECT_EQ(a.det_a2, b.det_a2);
  }
}

TEST(RandomPhaseRotation, ZeroAnglesLeaveStateUnchanged) {
  const auto v = symmetric_two_mode(1.5, 1.5, kC15);
  EXPECT_LT(max_abs(random_phase_rotation(v, 0.0, 0.0).matrix() - v.matrix()), 1e-15);
}

TEST(RandomPhaseRotation, DeterminantsInvariant) {
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < 100; ++k) {
    const auto v = mopo::testing::random_physical_state(rng);
    const auto a = block_determinants(v);
    const auto b = block_determinants(random_phase_rotation(v, ang(rng), ang(rng)));
    const double scale = std::max(1.0, a.det_v);
    EXPECT_NEAR(a.det_a1, b.det_a1, 1e-12 * scale);
    EXPECT_NEAR(a.det_a2, b.det_a2, 1e-12 * scale);
    EXPECT_NEAR(a.det_c, b.det_c, 1e-12 * scale);
  }
}

TEST(RandomPhaseRotation, CrossBlockDependsOnPhaseSum) {
  const auto v = random_phase_rotation(symmetric_two_mode(1.5, 1.5, kC15), 0.4, std::numbers::pi / 2 - 0.4);
  EXPECT_NEAR(v(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(v(0, 3), kC15, 1e-12);
  EXPECT_NEAR(v(1, 2), kC15, 1e-12);
  EXPECT_NEAR(v(1, 3), 0.0, 1e-12);
  EXPECT_NEAR(block_determinants(v).det_c, -0.75, 1e-12);
  const double phi = 1.3;
  const auto w = random_phase_rotation(symmetric_two_mode(1.5, 1.5, kC15), 0.9, phi - 0.9);
  EXPECT_NEAR(w(0, 2), kC15 * std::cos(phi), 1e-12);
  EXPECT_NEAR(w(0, 3), kC15 * std::sin(phi), 1e-12);
  EXPECT_NEAR(w(1, 3), -kC15 * std::cos(phi), 1e-12);
}

TEST(PhysicalityWatchdog, ModelPipelineStatesHaveNonNegativeW) {
  std::mt19937_64 rng(8080);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    double l1 = 1.5 * unit(rng);
    double l2 = 1.5 * unit(rng);
    if (l2 > l1) std::swap(l1, l2);
    const ModelSpec model = BlochMessiahFactors{l1, l2, unit(rng), unit(rng)};
    const InteractionSetting setting{unit(rng), 1.6 * unit(rng), 0.5};
    const auto v = model_reduced_state(model, setting);
    const auto mism = apply_mode_mismatch(v, unit(rng));
    EXPECT_TRUE(mism.physical);
    EXPECT_GE(witness_pair(mism.state).w, -1e-9);
    EXPECT_GE(witness_pair(heterodyne_channel(mism.state)).w, -1e-9);
  }
}

TEST(DemodulationChain, VacuumNoiseReadsUnitVariance) {
  const auto cfg = fast_config();
  std::mt19937_64 rng(1);
  const std::size_t n_out = 10000;
  std::vector<QuadraturePair> zeros(n_out, {0.0, 0.0});
  const auto sig = synthesize_signal(std::span<const QuadraturePair>(zeros), kSampleRate, cfg,
                                     vacuum_noise_variance(kSampleRate, cfg), rng);
  const auto out = demodulation_chain(sig, cfg);
  ASSERT_EQ(out.size(), n_out);
  const auto s = stats(out);
  EXPECT_NEAR(s.var_cos, 1.0, 0.05);
  EXPECT_NEAR(s.var_sin, 1.0, 0.05);
}

TEST(DemodulationChain, DeterministicQuadratureMapsToScaledOutputs) {
  const auto cfg = fast_config();
  std::mt19937_64 rng(2);
  std::vector<QuadraturePair> p_only(20, {2.0, 0.0});
  auto out = demodulation_chain(synthesize_signal(std::span<const QuadraturePair>(p_only), kSampleRate, cfg, 0.0, rng), cfg);
  auto s = stats(out);
  EXPECT_NEAR(s.mean_cos, 2.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(s.mean_cos, 1.4142, 1e-4);
  EXPECT_NEAR(s.mean_sin, 0.0, 1e-9);
  std::vector<QuadraturePair> q_only(20, {0.0, 2.0});
  out = demodulation_chain(synthesize_signal(std::span<const QuadraturePair>(q_only), kSampleRate, cfg, 0.0, rng), cfg);
  s = stats(out);
  EXPECT_NEAR(s.mean_cos, 0.0, 1e-9);
  EXPECT_NEAR(s.mean_sin, -2.0 / std::sqrt(2.0), 1e-9);
}

TEST(DemodulationChain, OpticalPhaseMatchesElectronicPhase) {
  auto cfg = fast_config();
  cfg.optical_phase = 0.7;
  cfg.electronic_phase = 0.7;
  std::mt19937_64 rng(3);
  std::vector<QuadraturePair> p_only(10, {1.0, 0.0});
  const auto s =
      stats(demodulation_chain(synthesize_signal(std::span<const QuadraturePair>(p_only), kSampleRate, cfg, 0.0, rng), cfg));
  EXPECT_NEAR(s.mean_cos, 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(s.mean_sin, 0.0, 1e-9);
}

TEST(DemodulationChain, OutOfBandToneRejected) {
  auto tone_cfg = fast_config();
  tone_cfg.analysis_frequency = 5.1e6;
  std::mt19937_64 rng(4);
  std::vector<QuadraturePair> p_only(400, {1.0, 0.0});
  const auto sig = synthesize_signal(std::span<const QuadraturePair>(p_only), kSampleRate, tone_cfg, 0.0, rng);
  const auto out = demodulation_chain(sig, fast_config());
  const auto s = stats(out);
  EXPECT_NEAR(s.mean_cos, 0.0, 0.01);
  EXPECT_NEAR(s.mean_sin, 0.0, 0.01);
  for (const auto& o : out) {
    EXPECT_LT(std::abs(o.i_cos), 0.15);
    EXPECT_LT(std::abs(o.i_sin), 0.15);
  }
}

TEST(DemodulationChain, GaussianQuadraturesGiveHalfPlusHalfVariance) {
  const auto cfg = fast_config();
  std::mt19937_64 rng(5);
  const double v = 3.0;
  std::normal_distribution<double> quad(0.0, std::sqrt(v));
  std::vector<QuadraturePair> slots(10000);
  for (auto& s : slots) s = {quad(rng), quad(rng)};
  // one vacuum sideband of added noise
  const auto sig = synthesize_signal(std::span<const QuadraturePair>(slots), kSampleRate, cfg,
                                     0.5 * vacuum_noise_variance(kSampleRate, cfg), rng);
  const auto s = stats(demodulation_chain(sig, cfg));
  const double expected = (v + 1.0) / 2.0;
  // standard error of a sample variance: expected * sqrt(2 / (n - 1))
  const double se = expected * std::sqrt(2.0 / 9999.0);
  EXPECT_NEAR(s.var_cos, expected, 3.0 * se);
  EXPECT_NEAR(s.var_sin, expected, 3.0 * se);
  // same number as the covariance-level channel
  EXPECT_NEAR(heterodyne_channel(CovarianceMatrix(Matrix::Identity(2, 2) * v))(0, 0), expected, 1e-15);
}

TEST(DemodulationChain, InvalidInputRejected) {
  const auto cfg = fast_config();
  EXPECT_THROW(demodulation_chain(SampledSignal{40e6, std::vector<double>(100000, 0.0)}, cfg), std::invalid_argument);
  EXPECT_THROW(demodulation_chain(SampledSignal{kSampleRate, std::vector<double>(100, 0.0)}, cfg), std::invalid_argument);
  auto bad = cfg;
  bad.lowpass_bandwidth = 0.0;
  EXPECT_THROW(demodulation_chain(SampledSignal{kSampleRate, std::vector<double>(10000, 0.0)}, bad),
               std::invalid_argument);
}

TEST(DetectionConfigType, DefaultsAndValidation) {
  const DetectionConfig cfg;
  EXPECT_EQ(cfg.analysis_frequency, 5e6);
  EXPECT_EQ(cfg.lowpass_bandwidth, 2e4);
  EXPECT_EQ(cfg.mode_mismatch, 0.65);
  EXPECT_EQ(kHeterodyneEta, 0.5);
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.mode_mismatch = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.analysis_frequency = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
