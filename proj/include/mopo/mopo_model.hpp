// mopo_model.hpp
// Four-mode parametric model of the mirrorless OPO below threshold:
// coupling matrix, Heisenberg evolution in phase space, the two-squeezer
// plus beam-splitter factorization, and the pump-intensity gain curve fit.

#pragma once

#include "mopo/gaussian.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace mopo {

/// Pairwise couplings of H = i hbar [chi12 a1 a2 + chi34 a3 a4 + chi24 a2 a4 + chi13 a1 a3 - h.c.].
/// Units of inverse interaction time.
struct CouplingMatrix {
  double chi12 = 0.0;
  double chi13 = 0.0;
  double chi24 = 0.0;
  double chi34 = 0.0;

  CouplingMatrix scaled(double factor) const {
    return {chi12 * factor, chi13 * factor, chi24 * factor, chi34 * factor};
  }

  static CouplingMatrix balanced(double chi) { return {chi, chi, chi, chi}; }
};

/// X with the fixed zero pattern; modes ordered 1..4 as rows/columns 0..3.
inline Eigen::Matrix4d assemble_coupling(const CouplingMatrix& c) {
  Eigen::Matrix4d x;
  // clang-format off
  x << 0.0,     c.chi12, c.chi13, 0.0,
       c.chi12, 0.0,     0.0,     c.chi24,
       c.chi13, 0.0,     0.0,     c.chi34,
       0.0,     c.chi24, c.chi34, 0.0;
  // clang-format on
  return x;
}

struct BlochMessiahFactors {
  double lambda1 = 0.0;  // squeeze rates, lambda1 >= lambda2 >= 0
  double lambda2 = 0.0;
  double t1 = 1.0;  // amplitude transmissions in [0, 1]
  double t2 = 1.0;
};

/// Factors plus the local sign flips (pi phase shifts) that map the
/// factorized couplings onto the input: X = D X(factors) D, D = diag(mode_signs).
struct BlochMessiahDecomposition {
  BlochMessiahFactors factors;
  std::array<int, 4> mode_signs{1, 1, 1, 1};
};

inline CouplingMatrix chis_from_bloch_messiah(const BlochMessiahFactors& f) {
  if (!(f.t1 >= 0.0 && f.t1 <= 1.0) || !(f.t2 >= 0.0 && f.t2 <= 1.0)) {
    throw std::invalid_argument("Bloch-Messiah transmissions must lie in [0, 1]");
  }
  const double s1 = std::sqrt(1.0 - f.t1 * f.t1);
  const double s2 = std::sqrt(1.0 - f.t2 * f.t2);
  const double l1 = f.lambda1;
  const double l2 = f.lambda2;
  return {
      -f.t1 * l1 * f.t2 - s1 * l2 * s2,
      f.t1 * l1 * s2 - s1 * l2 * f.t2,
      s1 * l1 * f.t2 - f.t1 * l2 * s2,
      -s1 * l1 * s2 - f.t1 * l2 * f.t2,
  };
}

/// D X D for D = diag(signs).
inline CouplingMatrix apply_mode_signs(const CouplingMatrix& c, const std::array<int, 4>& signs) {
  return {c.chi12 * signs[0] * signs[1], c.chi13 * signs[0] * signs[2], c.chi24 * signs[1] * signs[3],
          c.chi34 * signs[2] * signs[3]};
}

namespace detail {

inline constexpr double kSpectrumTolerance = 1e-10;
inline constexpr double kRoundTripTolerance = 1e-9;

// Off-diagonal block between the two sublattices {1,4} (rows) and {2,3} (columns).
inline Eigen::Matrix2d sublattice_block(const CouplingMatrix& c) {
  return (Eigen::Matrix2d() << c.chi12, c.chi13, c.chi24, c.chi34).finished();
}

inline double max_abs_difference(const CouplingMatrix& a, const CouplingMatrix& b) {
  return std::max({std::abs(a.chi12 - b.chi12), std::abs(a.chi13 - b.chi13), std::abs(a.chi24 - b.chi24),
                   std::abs(a.chi34 - b.chi34)});
}

inline double clamp_unit(double t) { return std::min(1.0, std::max(0.0, t)); }

// Factors for a block already brought to the canonical sign gauge, or false
// when this gauge cannot represent it.
inline bool factors_from_block(const Eigen::Matrix2d& k, BlochMessiahFactors& out) {
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double l1 = svd.singularValues()(0);
  const double l2 = svd.singularValues()(1);
  const double tol = kRoundTripTolerance * std::max(1.0, l1);

  Eigen::Vector2d u1;
  Eigen::Vector2d v1;
  if (l1 - l2 <= 1e-12 * std::max(1.0, l1)) {
    // Degenerate pair: the first arm's transmission is undetermined, fix t1 = 1.
    u1 = Eigen::Vector2d(1.0, 0.0);
    v1 = k.transpose() * u1 / l1;
  } else {
    u1 = svd.matrixU().col(0);
    v1 = svd.matrixV().col(0);
    if (u1(0) < 0.0 || (u1(0) == 0.0 && u1(1) > 0.0)) {
      u1 = -u1;
      v1 = -v1;
    }
  }
  // u1 = (t1, -s1), v1 = (-t2, s2)
  if (u1(0) < -tol || u1(1) > tol || v1(0) > tol || v1(1) < -tol) return false;
  out = {l1, l2, clamp_unit(u1(0)), clamp_unit(-v1(0))};
  return true;
}

}  // namespace detail

/// Inverse of chis_from_bloch_messiah up to local sign flips.
///
/// lambda1 >= lambda2 are the magnitudes of the +-lambda eigenvalue pairs of X.
/// When lambda1 == lambda2 the split between t1 and t2 is not unique and t1 = 1
/// is chosen; when X == 0 both transmissions are set to 1.
inline BlochMessiahDecomposition bloch_messiah(const Eigen::Matrix4d& x) {
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if ((x - x.transpose()).cwiseAbs().maxCoeff() > detail::kSpectrumTolerance * scale) {
    throw std::invalid_argument("bloch_messiah: coupling matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(x, Eigen::EigenvaluesOnly);
  const Eigen::Vector4d ev = eig.eigenvalues();  // ascending
  if (std::abs(ev(0) + ev(3)) > detail::kSpectrumTolerance * scale ||
      std::abs(ev(1) + ev(2)) > detail::kSpectrumTolerance * scale) {
    throw std::invalid_argument("bloch_messiah: eigenvalue spectrum is not symmetric (+-r1, +-r2)");
  }
  const double pattern = std::max({std::abs(x(0, 0)), std::abs(x(1, 1)), std::abs(x(2, 2)), std::abs(x(3, 3)),
                                   std::abs(x(0, 3)), std::abs(x(1, 2))});
  if (pattern > detail::kSpectrumTolerance * scale) {
    throw std::invalid_argument("bloch_messiah: coupling matrix violates the zero pattern of X");
  }

  const CouplingMatrix input{x(0, 1), x(0, 2), x(1, 3), x(2, 3)};
  if (detail::sublattice_block(input).cwiseAbs().maxCoeff() == 0.0) {
    return {};
  }

  // Gauges with the first mode's sign fixed; the identity gauge is tried first.
  for (int bits = 0; bits < 8; ++bits) {
    const std::array<int, 4> signs{1, (bits & 1) ? -1 : 1, (bits & 2) ? -1 : 1, (bits & 4) ? -1 : 1};
    const CouplingMatrix gauged = apply_mode_signs(input, signs);
    BlochMessiahFactors f;
    if (!detail::factors_from_block(detail::sublattice_block(gauged), f)) continue;
    const double err = detail::max_abs_difference(chis_from_bloch_messiah(f), gauged);
    if (err <= detail::kRoundTripTolerance * std::max(1.0, f.lambda1)) {
      return {f, signs};
    }
  }
  throw std::invalid_argument(
      "bloch_messiah: couplings are not reachable by real beam splitters with t in [0, 1] under any local sign "
      "gauge");
}

inline BlochMessiahDecomposition bloch_messiah(const CouplingMatrix& c) { return bloch_messiah(assemble_coupling(c)); }

/// Phase-space image of the evolution da/dt = X a^dagger over time tau:
/// p -> exp(X tau) p, q -> exp(-X tau) q. The exponentials come from the
/// spectral decomposition of the symmetric X.
inline SymplecticTransform evolution_symplectic(const Eigen::Matrix4d& x, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("interaction time must be non-negative");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(x);
  const Eigen::Matrix4d& q = eig.eigenvectors();
  const Eigen::Vector4d lam = eig.eigenvalues() * tau;
  const Eigen::Matrix4d grow = q * lam.array().exp().matrix().asDiagonal() * q.transpose();
  const Eigen::Matrix4d shrink = q * (-lam.array()).exp().matrix().asDiagonal() * q.transpose();

  Matrix s = Matrix::Zero(8, 8);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      s(2 * i, 2 * j) = grow(i, j);
      s(2 * i + 1, 2 * j + 1) = shrink(i, j);
    }
  }
  return SymplecticTransform(std::move(s));
}

/// Four-mode output covariance for vacuum input.
inline CovarianceMatrix output_covariance(const Eigen::Matrix4d& x, double tau) {
  return apply_symplectic(evolution_symplectic(x, tau), vacuum_state(4));
}

struct BalancedMoments {
  double a;  // single-mode variance
  double c;  // p-p correlation between modes 1 and 2 (q-q is -c)
};

/// Balanced couplings chi_ij = chi: with s = 4 chi tau, a = (cosh s + 1)/2, c = sinh(s)/2.
inline BalancedMoments balanced_closed_form(double chi, double tau) {
  if (chi < 0.0 || tau < 0.0) throw std::invalid_argument("balanced_closed_form expects chi, tau >= 0");
  const double s = 4.0 * chi * tau;
  return {(std::cosh(s) + 1.0) / 2.0, std::sinh(s) / 2.0};
}

struct InteractionSetting {
  double tau = 1.0;             // dimensionless interaction time
  double pump_intensity = 0.0;  // mW/cm^2, single beam
  double kappa = 0.0;           // coupling per sqrt(intensity)

  /// Factor multiplying the unit coupling pattern: kappa * sqrt(I).
  double coupling_scale() const { return kappa * std::sqrt(pump_intensity); }
};

struct GainEstimate {
  double gain;
  bool symmetric;  // false when any mode's p and q variances differ by more than 5%
};

/// Mean of the two modes' variances (a1 + a2) / 2.
inline GainEstimate average_gain(const CovarianceMatrix& v2) {
  detail::require_two_mode(v2);
  bool symmetric = true;
  double sum = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const double vp = v2(p_index(k), p_index(k));
    const double vq = v2(q_index(k), q_index(k));
    const double mean = 0.5 * (vp + vq);
    if (std::abs(vp - vq) > 0.05 * std::abs(mean)) symmetric = false;
    sum += mean;
  }
  return {0.5 * sum, symmetric};
}

// ---------------------------------------------------------------------------
// Gain curve fit

enum class GainModel {
  HalfCosh,   // (cosh(g sqrt I) + 1) / 2, single-mode variance of the balanced model
  PlainCosh,  // cosh(g sqrt I)
};

inline double gain_model(GainModel model, double g, double intensity) {
  const double ch = std::cosh(g * std::sqrt(intensity));
  return model == GainModel::HalfCosh ? 0.5 * (ch + 1.0) : ch;
}

struct GainPoint {
  double intensity;
  double variance;
};

struct GainFit {
  double g = 0.0;
  double residual = 0.0;  // sum of squared residuals
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline double fit_objective(std::span<const GainPoint> pts, GainModel model, double g) {
  double acc = 0.0;
  for (const auto& p : pts) {
    const double r = p.variance - gain_model(model, g, p.intensity);
    acc += r * r;
  }
  return acc;
}

// d/dg of the objective.
inline double fit_slope(std::span<const GainPoint> pts, GainModel model, double g) {
  double acc = 0.0;
  for (const auto& p : pts) {
    const double x = std::sqrt(p.intensity);
    const double r = p.variance - gain_model(model, g, p.intensity);
    const double dm = (model == GainModel::HalfCosh ? 0.5 : 1.0) * x * std::sinh(g * x);
    acc += -2.0 * r * dm;
  }
  return acc;
}

}  // namespace detail

/// Least-squares fit of g >= 0. A coarse scan brackets the minimum, then the
/// zero of the objective's slope is refined by bisection.
inline GainFit fit_gain_curve(std::span<const GainPoint> points, GainModel model = GainModel::HalfCosh,
                              int max_iterations = 200) {
  if (points.size() < 3) throw std::invalid_argument("fit_gain_curve needs at least 3 points");
  double max_i = 0.0;
  double max_v = 1.0;
  for (const auto& p : points) {
    if (!(p.intensity >= 0.0) || !std::isfinite(p.variance)) {
      throw std::invalid_argument("fit_gain_curve: intensities must be >= 0 and variances finite");
    }
    max_i = std::max(max_i, p.intensity);
    max_v = std::max(max_v, p.variance);
  }
  GainFit fit;
  if (max_i == 0.0) {
    fit.residual = detail::fit_objective(points, model, 0.0);
    fit.converged = true;
    return fit;
  }

  // Upper end of the scan: model reaches well above the largest observed value.
  const double cap = 10.0 * max_v + 10.0;
  const double g_max = std::acosh(model == GainModel::HalfCosh ? 2.0 * cap - 1.0 : cap) / std::sqrt(max_i);
  constexpr int kGrid = 2000;
  int best = 0;
  double best_f = detail::fit_objective(points, model, 0.0);
  for (int k = 1; k <= kGrid; ++k) {
    const double f = detail::fit_objective(points, model, g_max * k / kGrid);
    if (f < best_f) {
      best_f = f;
      best = k;
    }
  }
  double lo = g_max * std::max(0, best - 1) / kGrid;
  double hi = g_max * std::min(kGrid, best + 1) / kGrid;
  double g = g_max * best / kGrid;

  if (detail::fit_slope(points, model, lo) < 0.0 && detail::fit_slope(points, model, hi) > 0.0) {
    for (int it = 0; it < max_iterations; ++it) {
      fit.iterations = it + 1;
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) {
        fit.converged = true;
        break;
      }
      (detail::fit_slope(points, model, mid) < 0.0 ? lo : hi) = mid;
      if (hi - lo <= 1e-15 * std::max(1.0, hi)) {
        fit.converged = true;
        break;
      }
    }
    g = 0.5 * (lo + hi);
  } else {
    // Minimum sits on a grid point at the boundary (typically g = 0).
    fit.converged = true;
  }
  if (detail::fit_objective(points, model, 0.0) <= detail::fit_objective(points, model, g)) g = 0.0;
  fit.g = g;
  fit.residual = detail::fit_objective(points, model, g);
  return fit;
}

}  // namespace mopo
