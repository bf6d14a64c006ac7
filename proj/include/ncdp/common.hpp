#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncdp {

using Real = double;
using Complex = std::complex<double>;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Hard bits, one per byte, values 0 or 1.
using BitVector = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SpecMismatchError : public Error {
 public:
  using Error::Error;
};

class DivisionByZeroError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline BitVector xor_bits(const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) throw DimensionError("xor_bits: length mismatch");
  BitVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

/// Per-component noise variance for a symbol energy and a linear Es/N0.
inline double noise_var_from_esn0(double symbol_energy, double esn0_db) {
  return symbol_energy / (2.0 * std::pow(10.0, esn0_db / 10.0));
}

/// Per-component noise variance at unit symbol energy for Eb/N0 and code rate.
inline double noise_var_from_ebn0(double ebn0_db, double rate) {
  return 1.0 / (2.0 * rate * std::pow(10.0, ebn0_db / 10.0));
}

}  // namespace ncdp
