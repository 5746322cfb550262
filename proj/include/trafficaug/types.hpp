#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trafficaug {

/// Dense matrix/vector aliases used throughout. Everything numeric runs on
/// 64-bit doubles; the templated aliases exist for code that wants another
/// scalar (tests, experiments).
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

using Bytes = std::vector<std::uint8_t>;

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes or text (pcap streams, CSV rows, config files).
/// `offset` is a byte or line position when one is known, -1 otherwise.
struct ParseError : Error {
  explicit ParseError(const std::string& what, long long offset = -1)
      : Error(what), offset(offset) {}
  long long offset;
};

/// Inputs that parse but violate a precondition (missing file, class with
/// too few rows, dimension mismatch, ...).
struct DataError : Error {
  using Error::Error;
};

/// Non-finite values produced during training or evaluation.
struct NumericError : Error {
  explicit NumericError(const std::string& what, long long step = -1)
      : Error(what), step(step) {}
  long long step;
};

/// Horizontal concatenation [a | b]; rows must match.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw DataError("hcat: row counts differ (" + std::to_string(a.rows()) +
                    " vs " + std::to_string(b.rows()) + ")");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// Vertical concatenation [a ; b]; columns must match.
inline Matrix vcat(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw DataError("vcat: column counts differ (" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.cols()) + ")");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace trafficaug
