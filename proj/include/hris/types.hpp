#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace hris {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kJ{0.0, 1.0};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameter extraction failed for a particular observation.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllPosedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Circularly symmetric complex Gaussian sample with E|z|^2 = variance.
Complex complex_normal(Rng& rng, double variance = 1.0);

CMatrix complex_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                              double variance = 1.0);

/// Unit-modulus sample with phase uniform on [0, 2pi).
Complex random_phase(Rng& rng);

/// Deterministic seed derivation. Each word is folded through splitmix64 so
/// that nearby inputs (trial 0, trial 1, ...) give unrelated streams.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words);

}  // namespace hris
