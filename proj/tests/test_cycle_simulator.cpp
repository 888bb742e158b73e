#include "mopo/cycle_simulator.hpp"
#include "mopo/estimators.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace mopo;

namespace {

ExperimentConfig small_config(std::size_t n_cycles) {
  ExperimentConfig cfg;
  cfg.n_cycles = n_cycles;
  cfg.sweep = {InteractionSetting{1.0, 0.0, 0.375}};
  return cfg;
}

// kappa placing the balanced model at s = arccosh 2 (a = 1.5) for I = 1, tau = 1
const double kKappa15 = std::acosh(2.0) / 4.0;

}  // namespace

TEST(MakeStream, DeterministicAndKeyed) {
  auto a = make_stream(1, 2, 3, StreamTag::Signal);
  auto b = make_stream(1, 2, 3, StreamTag::Signal);
  EXPECT_EQ(a(), b());
  EXPECT_NE(make_stream(1, 2, 3, StreamTag::Signal)(), make_stream(1, 2, 3, StreamTag::Vacuum)());
  EXPECT_NE(make_stream(1, 2, 3, StreamTag::Signal)(), make_stream(1, 2, 4, StreamTag::Signal)());
  EXPECT_NE(make_stream(1, 2, 3, StreamTag::Signal)(), make_stream(1, 3, 3, StreamTag::Signal)());
  EXPECT_NE(make_stream(1, 2, 3, StreamTag::Signal)(), make_stream(1ull << 32 | 1, 2, 3, StreamTag::Signal)());
}

TEST(ExperimentConfigType, DefaultsMatchAcquisitionWindow) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.samples_per_cycle, 64u);
  EXPECT_NEAR(cfg.dt_us * static_cast<double>(cfg.samples_per_cycle), cfg.window_ms * 1000.0, 1e-9);
  EXPECT_EQ(cfg.n_vacuum_cycles(), cfg.n_cycles);
}

TEST(ExperimentConfigType, InvalidFieldsRejected) {
  auto cfg = small_config(10);
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.n_cycles = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.samples_per_cycle = 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sweep.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sweep[0].pump_intensity = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.model = BlochMessiahFactors{0.1, 0.5, 1.0, 1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.threads = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SampleCycle, ShapeMetadataAndPhaseRange) {
  const auto cfg = small_config(1);
  for (std::uint64_t i = 0; i < 500; ++i) {
    const auto rec = sample_cycle(vacuum_state(2), cfg, 0, i);
    EXPECT_EQ(rec.samples.size(), 64u);
    EXPECT_EQ(rec.cycle_index, i);
    EXPECT_EQ(rec.dt_us, 25.0);
    EXPECT_EQ(rec.window_ms, 1.6);
    EXPECT_FALSE(rec.is_vacuum);
    EXPECT_GE(rec.theta1, 0.0);
    EXPECT_LT(rec.theta1, 2.0 * std::numbers::pi);
    EXPECT_GE(rec.theta2, 0.0);
    EXPECT_LT(rec.theta2, 2.0 * std::numbers::pi);
  }
}

TEST(SampleCycle, FixedSeedIsBitIdentical) {
  const auto cfg = small_config(1);
  const auto v = heterodyne_channel(symmetric_two_mode(1.5, 1.5, std::sqrt(0.75)));
  EXPECT_EQ(sample_cycle(v, cfg, 3, 17), sample_cycle(v, cfg, 3, 17));
  EXPECT_NE(sample_cycle(v, cfg, 3, 17), sample_cycle(v, cfg, 3, 18));
  EXPECT_NE(sample_cycle(v, cfg, 3, 17, false), sample_cycle(v, cfg, 3, 17, true));
}

TEST(SampleCycle, CommonModePhaseSplitsEvenly) {
  auto cfg = small_config(1);
  cfg.phase_model = PhaseModel::CommonMode;
  const auto rec = sample_cycle(vacuum_state(2), cfg, 0, 5);
  EXPECT_EQ(rec.theta1, rec.theta2);
  EXPECT_LT(rec.theta1, std::numbers::pi);
}

TEST(SampleCycle, NonPositiveSemidefiniteRejected) {
  const auto cfg = small_config(1);
  Matrix m = Matrix::Identity(4, 4);
  m(0, 0) = -1.0;
  EXPECT_THROW(sample_cycle(CovarianceMatrix(m), cfg, 0, 0), std::invalid_argument);
  EXPECT_THROW(sample_cycle(vacuum_state(1), cfg, 0, 0), std::invalid_argument);
}

TEST(SampleCycle, VacuumPooledVarianceIsOne) {
  const auto cfg = small_config(1);
  std::vector<double> per_cycle;
  double sum = 0.0;
  double n = 0.0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto rec = sample_cycle(vacuum_state(2), cfg, 0, i, true);
    for (const auto& s : rec.samples) {
      for (double x : s) {
        sum += x * x;
        n += 1.0;
      }
    }
  }
  const double var = sum / n;
  // variance of x^2 for a unit normal is 2
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(SampleCycle, SampleCovarianceConvergesToRotatedState) {
  const auto cfg = small_config(1);
  const auto v = heterodyne_channel(symmetric_two_mode(1.5, 1.5, std::sqrt(0.75)));
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  double n = 0.0;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    const auto rec = sample_cycle(v, cfg, 0, i);
    const auto r = random_phase_rotation(v, rec.theta1, rec.theta2).matrix();
    for (const auto& s : rec.samples) {
      const Eigen::Vector4d x(s[0], s[1], s[2], s[3]);
      acc += x * x.transpose() - r;
      n += 1.0;
    }
  }
  EXPECT_LT((acc / n).cwiseAbs().maxCoeff(), 0.01);
}

TEST(PhaseErasure, CrossCovarianceAveragesOutButDeterminantSurvives) {
  const auto cfg = small_config(1);
  const auto v = heterodyne_channel(symmetric_two_mode(1.5, 1.5, std::sqrt(0.75)));
  std::vector<double> c00, c01, det;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const auto m = cycle_moments(sample_cycle(v, cfg, 0, i));
    c00.push_back(m.cross(0, 0) / static_cast<double>(m.n));
    c01.push_back(m.cross(0, 1) / static_cast<double>(m.n));
    det.push_back(cycle_cross_determinant(m).value);
  }
  const auto a = mopo::testing::mean_se(c00);
  const auto b = mopo::testing::mean_se(c01);
  const auto d = mopo::testing::mean_se(det);
  EXPECT_LT(std::abs(a.mean), 3.0 * a.se);
  EXPECT_LT(std::abs(b.mean), 3.0 * b.se);
  EXPECT_NEAR(d.mean, -0.75, 3.0 * d.se);
  EXPECT_GT(-d.mean, 10.0 * d.se);
}

TEST(RunSweepPoint, ZeroCouplingIsIndistinguishableFromVacuum) {
  auto cfg = small_config(3000);
  const auto point = run_sweep_point(cfg, 0);
  ASSERT_EQ(point.signal.size(), 3000u);
  ASSERT_EQ(point.vacuum.size(), 3000u);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    auto pooled = [&](const std::vector<CycleRecord>& recs) {
      double s = 0.0, s2 = 0.0, n = 0.0;
      for (const auto& r : recs) {
        for (const auto& x : r.samples) {
          s += x[ch] * x[ch];
          s2 += x[ch] * x[ch] * x[ch] * x[ch];
          n += 1.0;
        }
      }
      const double var = s / n;
      return std::pair{var, std::sqrt((s2 / n - var * var) / n)};
    };
    const auto [vs, ss] = pooled(point.signal);
    const auto [vv, sv] = pooled(point.vacuum);
    EXPECT_LT(std::abs(vs - vv), 3.0 * std::hypot(ss, sv)) << "channel " << ch;
  }
  EXPECT_TRUE(point.signal.front().is_vacuum == false);
  EXPECT_TRUE(point.vacuum.front().is_vacuum);
}

TEST(RunSweepPoint, ThreadCountDoesNotChangeDataset) {
  auto cfg = small_config(300);
  cfg.sweep = {InteractionSetting{1.0, 1.0, kKappa15}};
  const auto a = run_sweep_point(cfg, 0);
  cfg.threads = 3;
  const auto b = run_sweep_point(cfg, 0);
  EXPECT_EQ(a.signal, b.signal);
  EXPECT_EQ(a.vacuum, b.vacuum);
  for (std::size_t i = 0; i < a.signal.size(); ++i) EXPECT_EQ(a.signal[i].cycle_index, i);
}

TEST(RunSweepPoint, VacuumRatioSetsCalibrationCount) {
  auto cfg = small_config(100);
  cfg.vacuum_ratio = 0.5;
  EXPECT_EQ(run_sweep_point(cfg, 0).vacuum.size(), 50u);
  EXPECT_THROW(run_sweep_point(cfg, 1), std::invalid_argument);
}

TEST(RunSweepPoint, BalancedGainRecoveredByEstimators) {
  auto cfg = small_config(5000);
  cfg.sweep = {InteractionSetting{1.0, 1.0, kKappa15}};
  cfg.detection.mode_mismatch = 1.0;
  const auto point = run_sweep_point(cfg, 0);
  EXPECT_NEAR(point.model_state(0, 0), 1.5, 1e-12);
  EXPECT_NEAR(point.model_state(0, 2), std::sqrt(0.75), 1e-12);
  const auto s = summarize(std::span<const CycleRecord>(point.signal), std::span<const CycleRecord>(point.vacuum));
  EXPECT_NEAR(s.a1, 1.5, 3.0 * s.se_a1);
  EXPECT_NEAR(s.a2, 1.5, 3.0 * s.se_a2);
  EXPECT_NEAR(s.det_c, -0.75, 3.0 * s.se_det_c);
}

TEST(RunExperiment, DeterministicAndOrdered) {
  auto cfg = small_config(50);
  cfg.sweep = {InteractionSetting{1.0, 0.0, 0.375}, InteractionSetting{1.0, 0.5, 0.375}};
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a[k].sweep_index, k);
    EXPECT_EQ(a[k].signal, b[k].signal);
    EXPECT_EQ(a[k].signal.front().sweep_index, k);
  }
  cfg.n_cycles = 0;
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(ModelPipeline, BlochMessiahModelMatchesItsCouplings) {
  const BlochMessiahFactors f{1.0, 0.2, 0.8, 0.7};
  const InteractionSetting s{1.0, 0.64, 0.5};
  const auto a = model_reduced_state(f, s);
  const auto b = model_reduced_state(chis_from_bloch_messiah(f), s);
  EXPECT_LT(mopo::testing::max_abs(a.matrix() - b.matrix()), 1e-15);
  const auto d = detected_state(a, DetectionConfig{});
  EXPECT_NEAR(d(0, 0), 0.5 * (a(0, 0) + 1.0), 1e-15);
  EXPECT_NEAR(d(0, 2), 0.5 * 0.65 * a(0, 2), 1e-15);
}
