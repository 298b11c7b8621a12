#pragma once

#include <Eigen/Core>

#include <array>
#include <sstream>
#include <stdexcept>
#include <string>

namespace excl {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense real tensor. Every quantity in the model is at most rank 2, so the
/// row-major "shape list" collapses to (rows, cols); vectors are Tx1.
template <typename Scalar>
using NDArray = Matrix<Scalar>;

/// Per-frame validity; true entries form a prefix for batched sequences.
using FrameMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

using Shape = std::array<Eigen::Index, 2>;

template <typename Derived>
Shape shape_of(const Eigen::DenseBase<Derived>& m) {
  return {m.rows(), m.cols()};
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "[" << s[0] << "x" << s[1] << "]";
  return os.str();
}

/// Shape or argument violation in a tensor op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf produced or consumed by a numeric routine.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (files, annotations, configs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline FrameMask full_mask(Eigen::Index length) {
  FrameMask m(length);
  for (Eigen::Index i = 0; i < length; ++i) m(i) = true;
  return m;
}

inline FrameMask prefix_mask(Eigen::Index total, Eigen::Index valid) {
  FrameMask m(total);
  for (Eigen::Index i = 0; i < total; ++i) m(i) = i < valid;
  return m;
}

}  // namespace excl
