// Shared oracles and random generators for the test binaries.

#pragma once

#include "mopo/gaussian.hpp"
#include "mopo/mopo_model.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

namespace mopo::testing {

// Quadrature generator of da/dt = X a^dagger: dp/dt = X p, dq/dt = -X q.
inline Matrix evolution_generator(const Eigen::Matrix4d& x) {
  Matrix g = Matrix::Zero(8, 8);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      g(2 * i, 2 * j) = x(i, j);
      g(2 * i + 1, 2 * j + 1) = -x(i, j);
    }
  }
  return g;
}

// Evolution map by general-purpose matrix exponential (Pade scaling and squaring).
inline Matrix oracle_evolution(const Eigen::Matrix4d& x, double tau) {
  const Matrix g = evolution_generator(x) * tau;
  return g.exp();
}

inline Matrix oracle_output_covariance(const Eigen::Matrix4d& x, double tau) {
  const Matrix s = oracle_evolution(x, tau);
  return s * s.transpose();
}

// Two-mode squeezer on modes (0, 1) of a two-mode system from its generator.
inline Matrix oracle_two_mode_squeezer(double r) {
  Matrix k = Matrix::Zero(4, 4);
  k(0, 2) = k(2, 0) = 1.0;
  k(1, 3) = k(3, 1) = -1.0;
  return (r * k).exp();
}

inline Matrix single_mode_squeezer(std::size_t mode, double r, std::size_t n_modes) {
  Matrix s = Matrix::Identity(static_cast<Eigen::Index>(2 * n_modes), static_cast<Eigen::Index>(2 * n_modes));
  s(static_cast<Eigen::Index>(2 * mode), static_cast<Eigen::Index>(2 * mode)) = std::exp(r);
  s(static_cast<Eigen::Index>(2 * mode + 1), static_cast<Eigen::Index>(2 * mode + 1)) = std::exp(-r);
  return s;
}

// Random two-mode symplectic built from rotations, beam splitters,
// single- and two-mode squeezers.
inline Matrix random_symplectic(std::mt19937_64& rng, double max_squeeze = 0.8) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.141592653589793);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sq(-max_squeeze, max_squeeze);
  Matrix s = Matrix::Identity(4, 4);
  for (int layer = 0; layer < 3; ++layer) {
    s = symplectic_generator(Rotation{0, angle(rng)}, 2).matrix() * s;
    s = symplectic_generator(Rotation{1, angle(rng)}, 2).matrix() * s;
    s = single_mode_squeezer(0, sq(rng), 2) * s;
    s = single_mode_squeezer(1, sq(rng), 2) * s;
    s = symplectic_generator(BeamSplitter{0, 1, unit(rng)}, 2).matrix() * s;
    s = symplectic_generator(TwoModeSqueezer{0, 1, sq(rng), angle(rng)}, 2).matrix() * s;
  }
  return s;
}

// Random physical two-mode state: random symplectic on a thermal state.
inline CovarianceMatrix random_physical_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> thermal(1.0, 2.5);
  const double n1 = thermal(rng);
  const double n2 = thermal(rng);
  const Eigen::Vector4d d(n1, n1, n2, n2);
  const Matrix s = random_symplectic(rng);
  Matrix v = s * d.asDiagonal() * s.transpose();
  v = 0.5 * (v + v.transpose()).eval();
  return CovarianceMatrix(std::move(v));
}

inline CouplingMatrix random_couplings(std::mt19937_64& rng, double max_abs = 1.0) {
  std::uniform_real_distribution<double> u(-max_abs, max_abs);
  return {u(rng), u(rng), u(rng), u(rng)};
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Mean and standard error of a sample.
struct MeanSe {
  double mean;
  double se;
};

template <class Range>
MeanSe mean_se(const Range& v) {
  double mean = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    mean += x;
    ++n;
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace mopo::testing
