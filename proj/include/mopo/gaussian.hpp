// gaussian.hpp
// Covariance matrices, symplectic maps and the determinant-based
// physicality / entanglement / purity functionals for Gaussian states.
//
// Conventions used everywhere in this library:
//   * quadratures are interleaved (p1, q1, p2, q2, ...)
//   * vacuum has unit variance in every quadrature, so vacuum == identity
//   * Omega = (+) [[0, 1], [-1, 0]]

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mopo {

using Matrix = Eigen::MatrixXd;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPhysicalityTolerance = 1e-10;
inline constexpr double kSymplecticTolerance = 1e-10;

inline std::size_t p_index(std::size_t mode) { return 2 * mode; }
inline std::size_t q_index(std::size_t mode) { return 2 * mode + 1; }

/// Omega for n_modes modes.
inline Matrix symplectic_form(std::size_t n_modes) {
  Matrix omega = Matrix::Zero(2 * n_modes, 2 * n_modes);
  for (std::size_t k = 0; k < n_modes; ++k) {
    omega(p_index(k), q_index(k)) = 1.0;
    omega(q_index(k), p_index(k)) = -1.0;
  }
  return omega;
}

/// Second-moment matrix of an N-mode zero-mean Gaussian state.
///
/// Non-physical matrices are representable on purpose: raw estimates from
/// finite data can violate V + i*Omega >= 0, and the witness functions below
/// report on them instead of refusing them. Use is_physical() to check.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0 || m_.rows() % 2 != 0) {
      throw std::invalid_argument("covariance matrix must be square with even, non-zero dimension");
    }
    if (!m_.allFinite()) {
      throw std::invalid_argument("covariance matrix has non-finite entries");
    }
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
      throw std::invalid_argument("covariance matrix is not symmetric");
    }
    m_ = 0.5 * (m_ + m_.transpose());
  }

  static CovarianceMatrix vacuum(std::size_t n_modes) {
    if (n_modes == 0) throw std::invalid_argument("vacuum state needs at least one mode");
    return CovarianceMatrix(Matrix::Identity(2 * n_modes, 2 * n_modes));
  }

  std::size_t n_modes() const { return static_cast<std::size_t>(m_.rows()) / 2; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// 2x2 block coupling mode i (rows) to mode j (columns).
  Eigen::Matrix2d block(std::size_t i, std::size_t j) const {
    check_mode(i);
    check_mode(j);
    return m_.block<2, 2>(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(2 * j));
  }

  /// Smallest eigenvalue of the Hermitian matrix V + i*Omega.
  double min_uncertainty_eigenvalue() const {
    const Eigen::MatrixXcd h =
        m_.cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * symplectic_form(n_modes()).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }

  bool is_physical(double tol = kPhysicalityTolerance) const { return min_uncertainty_eigenvalue() >= -tol; }

  friend bool operator==(const CovarianceMatrix& a, const CovarianceMatrix& b) { return a.m_ == b.m_; }

 private:
  void check_mode(std::size_t k) const {
    if (k >= n_modes()) throw std::invalid_argument("mode index out of range");
  }

  Matrix m_;
};

inline CovarianceMatrix vacuum_state(std::size_t n_modes) { return CovarianceMatrix::vacuum(n_modes); }

/// A real linear map S with S Omega S^T = Omega.
class SymplecticTransform {
 public:
  explicit SymplecticTransform(Matrix entries) : s_(std::move(entries)) {
    if (s_.rows() != s_.cols() || s_.rows() == 0 || s_.rows() % 2 != 0) {
      throw std::invalid_argument("symplectic transform must be square with even dimension");
    }
    // Absolute tolerance for O(1) entries; grows with |S|^2 for strongly squeezing maps.
    const double scale = std::max(1.0, s_.cwiseAbs().maxCoeff());
    if (symplectic_defect() > kSymplecticTolerance * scale * scale) {
      throw std::invalid_argument("matrix is not symplectic");
    }
  }

  static SymplecticTransform identity(std::size_t n_modes) {
    return SymplecticTransform(Matrix::Identity(2 * n_modes, 2 * n_modes));
  }

  std::size_t n_modes() const { return static_cast<std::size_t>(s_.rows()) / 2; }
  const Matrix& matrix() const { return s_; }

  /// max |S Omega S^T - Omega|
  double symplectic_defect() const {
    const Matrix omega = symplectic_form(n_modes());
    return (s_ * omega * s_.transpose() - omega).cwiseAbs().maxCoeff();
  }

  friend SymplecticTransform operator*(const SymplecticTransform& a, const SymplecticTransform& b) {
    if (a.s_.rows() != b.s_.rows()) throw std::invalid_argument("symplectic dimension mismatch");
    return SymplecticTransform(a.s_ * b.s_);
  }

 private:
  Matrix s_;
};

// Generator kinds. Mode indices are zero based.
struct Rotation {
  std::size_t mode;
  double angle;
};
struct BeamSplitter {
  std::size_t i;
  std::size_t j;
  double transmission;  // amplitude transmission t in [0, 1]
};
struct TwoModeSqueezer {
  std::size_t i;
  std::size_t j;
  double r;
  double quadrature_angle = 0.0;
};
using Generator = std::variant<Rotation, BeamSplitter, TwoModeSqueezer>;

namespace detail {

inline void check_pair(std::size_t i, std::size_t j, std::size_t n_modes) {
  if (i >= n_modes || j >= n_modes) throw std::invalid_argument("generator mode index out of range");
  if (i == j) throw std::invalid_argument("generator needs two distinct modes");
}

inline Eigen::Matrix2d rotation_block(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline void set_block(Matrix& m, std::size_t i, std::size_t j, const Eigen::Matrix2d& b) {
  m.block<2, 2>(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(2 * j)) = b;
}

}  // namespace detail

/// Phase-space rotation R = [[cos, -sin], [sin, cos]] acting on (p, q).
inline Eigen::Matrix2d phase_rotation(double angle) { return detail::rotation_block(angle); }

inline SymplecticTransform symplectic_generator(const Generator& g, std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("n_modes must be positive");
  Matrix s = Matrix::Identity(2 * n_modes, 2 * n_modes);

  if (const auto* rot = std::get_if<Rotation>(&g)) {
    if (rot->mode >= n_modes) throw std::invalid_argument("rotation mode index out of range");
    detail::set_block(s, rot->mode, rot->mode, detail::rotation_block(rot->angle));
  } else if (const auto* bs = std::get_if<BeamSplitter>(&g)) {
    detail::check_pair(bs->i, bs->j, n_modes);
    const double t = bs->transmission;
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("beam splitter transmission must lie in [0, 1]");
    const double r = std::sqrt(1.0 - t * t);
    // a_i' = t a_i + r a_j, a_j' = -r a_i + t a_j; identical action on p and q.
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    detail::set_block(s, bs->i, bs->i, t * id);
    detail::set_block(s, bs->i, bs->j, r * id);
    detail::set_block(s, bs->j, bs->i, -r * id);
    detail::set_block(s, bs->j, bs->j, t * id);
  } else {
    const auto& tms = std::get<TwoModeSqueezer>(g);
    detail::check_pair(tms.i, tms.j, n_modes);
    const double ch = std::cosh(tms.r);
    const double sh = std::sinh(tms.r);
    // p-quadratures mix with +sinh, q-quadratures with -sinh, then mode i is
    // conjugated by a rotation to select the squeezed quadrature pair.
    const Eigen::Matrix2d z = (Eigen::Matrix2d() << 1.0, 0.0, 0.0, -1.0).finished();
    const Eigen::Matrix2d rot = detail::rotation_block(tms.quadrature_angle);
    detail::set_block(s, tms.i, tms.i, ch * Eigen::Matrix2d::Identity());
    detail::set_block(s, tms.i, tms.j, sh * rot * z);
    detail::set_block(s, tms.j, tms.i, sh * z * rot.transpose());
    detail::set_block(s, tms.j, tms.j, ch * Eigen::Matrix2d::Identity());
  }
  return SymplecticTransform(std::move(s));
}

/// S V S^T, symmetrized.
inline CovarianceMatrix apply_symplectic(const SymplecticTransform& s, const CovarianceMatrix& v) {
  if (s.matrix().rows() != v.matrix().rows()) {
    throw std::invalid_argument("symplectic transform and covariance have different dimensions");
  }
  Matrix out = s.matrix() * v.matrix() * s.matrix().transpose();
  out = 0.5 * (out + out.transpose()).eval();
  return CovarianceMatrix(std::move(out));
}

/// Gaussian partial trace: keep the listed modes, in the listed order.
inline CovarianceMatrix reduce_to_modes(const CovarianceMatrix& v, std::span<const std::size_t> modes) {
  if (modes.empty()) throw std::invalid_argument("reduce_to_modes needs at least one mode");
  std::vector<bool> seen(v.n_modes(), false);
  for (std::size_t m : modes) {
    if (m >= v.n_modes()) throw std::invalid_argument("reduce_to_modes: mode index out of range");
    if (seen[m]) throw std::invalid_argument("reduce_to_modes: duplicate mode index");
    seen[m] = true;
  }
  const auto k = static_cast<Eigen::Index>(modes.size());
  Matrix out(2 * k, 2 * k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      out.block<2, 2>(2 * a, 2 * b) = v.block(modes[static_cast<std::size_t>(a)], modes[static_cast<std::size_t>(b)]);
    }
  }
  return CovarianceMatrix(std::move(out));
}

inline CovarianceMatrix reduce_to_modes(const CovarianceMatrix& v, std::initializer_list<std::size_t> modes) {
  return reduce_to_modes(v, std::span<const std::size_t>(modes.begin(), modes.size()));
}

// ---------------------------------------------------------------------------
// Two-mode functionals

struct BlockDeterminants {
  double det_a1;
  double det_a2;
  double det_c;
  double det_v;
};

namespace detail {
inline void require_two_mode(const CovarianceMatrix& v) {
  if (v.n_modes() != 2) throw std::invalid_argument("expected a two-mode (4x4) covariance matrix");
}
}  // namespace detail

inline BlockDeterminants block_determinants(const CovarianceMatrix& v2) {
  detail::require_two_mode(v2);
  return {v2.block(0, 0).determinant(), v2.block(1, 1).determinant(), v2.block(0, 1).determinant(),
          v2.matrix().determinant()};
}

struct WitnessPair {
  double w;      // >= 0 for physical states
  double w_ppt;  // < 0 iff entangled
};

inline WitnessPair witness_from_determinants(double det_a1, double det_a2, double det_c, double det_v) {
  return {1.0 + det_v - 2.0 * det_c - det_a1 - det_a2, 1.0 + det_v + 2.0 * det_c - det_a1 - det_a2};
}

inline WitnessPair witness_pair(const CovarianceMatrix& v2) {
  const auto d = block_determinants(v2);
  return witness_from_determinants(d.det_a1, d.det_a2, d.det_c, d.det_v);
}

/// Flip q of the second mode.
inline CovarianceMatrix partial_transpose(const CovarianceMatrix& v2) {
  detail::require_two_mode(v2);
  Eigen::Vector4d flip(1.0, 1.0, 1.0, -1.0);
  Matrix out = flip.asDiagonal() * v2.matrix() * flip.asDiagonal();
  return CovarianceMatrix(std::move(out));
}

struct SymplecticEigenvalue {
  double value;
  bool physical;  // false when the input itself violates V + i*Omega >= 0
};

/// Smallest symplectic eigenvalue of the partially transposed state, from the
/// spectrum of Omega * V_pt (eigenvalues +-i*nu).
inline SymplecticEigenvalue ppt_symplectic_eigenvalue(const CovarianceMatrix& v2) {
  detail::require_two_mode(v2);
  const Matrix vt = partial_transpose(v2).matrix();
  Eigen::EigenSolver<Matrix> solver(symplectic_form(2) * vt, /*computeEigenvectors=*/false);
  double nu = std::abs(solver.eigenvalues()(0));
  for (Eigen::Index k = 1; k < solver.eigenvalues().size(); ++k) nu = std::min(nu, std::abs(solver.eigenvalues()(k)));
  return {nu, v2.is_physical()};
}

/// Det V for states of the symmetric form [[a1 I, C], [C^T, a2 I]] with
/// C = diag(c, -c) up to local rotations.
inline double det_v_symmetric(double det_a1, double det_a2, double det_c) {
  if (det_a1 < 0.0 || det_a2 < 0.0) throw std::invalid_argument("det_v_symmetric: negative Det[A]");
  const double root = std::sqrt(det_a1 * det_a2) - std::abs(det_c);
  return root * root;
}

inline double purity(double det_v) {
  if (!(det_v > 0.0)) throw std::invalid_argument("purity: Det[V] must be positive");
  return 1.0 / std::sqrt(det_v);
}

/// <n> = (V_pp + V_qq - 2) / 4.
inline double mean_photon_number(const CovarianceMatrix& v, std::size_t mode) {
  if (mode >= v.n_modes()) throw std::invalid_argument("mean_photon_number: mode index out of range");
  return (v(p_index(mode), p_index(mode)) + v(q_index(mode), q_index(mode)) - 2.0) / 4.0;
}

struct WitnessReport {
  double det_a1;
  double det_a2;
  double det_c;
  double det_v;
  double w;
  double w_ppt;
  double nu_tilde_minus;
  double purity;  // NaN when Det V <= 0
  bool physical;
};

inline WitnessReport witness_report(const CovarianceMatrix& v2) {
  const auto d = block_determinants(v2);
  const auto w = witness_from_determinants(d.det_a1, d.det_a2, d.det_c, d.det_v);
  const auto nu = ppt_symplectic_eigenvalue(v2);
  const double mu = d.det_v > 0.0 ? purity(d.det_v) : std::numeric_limits<double>::quiet_NaN();
  return {d.det_a1, d.det_a2, d.det_c, d.det_v, w.w, w.w_ppt, nu.value, mu, nu.physical};
}

/// Two-mode matrix of the symmetric form [[a1 I, diag(c,-c)], [., a2 I]].
inline CovarianceMatrix symmetric_two_mode(double a1, double a2, double c) {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = a1;
  m(2, 2) = m(3, 3) = a2;
  m(0, 2) = m(2, 0) = c;
  m(1, 3) = m(3, 1) = -c;
  return CovarianceMatrix(std::move(m));
}

}  // namespace mopo
