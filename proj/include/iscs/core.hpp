#pragma once

// Shared error taxonomy and scalar aliases for the iscs library.
//
// Everything in this library throws a subclass of iscs::Error so callers can
// catch one type at the top level; the subclasses make the failure mode
// explicit in tests.

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace iscs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/size mismatch between volumes, operators, or slices.
struct DimensionError : Error {
  using Error::Error;
};

// Malformed or truncated volume file, bad magic, unknown dtype flag.
struct FormatError : Error {
  using Error::Error;
};

// Out-of-domain scalar parameter (negative sigma, eta outside [0,1], ...).
struct ParameterError : Error {
  using Error::Error;
};

// Anchor pair too close to (anti)parallel for a stable slerp, even after
// the retry budget.
struct DegenerateAnchorError : Error {
  using Error::Error;
};

// Diffusion schedule violates a validity constraint.
struct ScheduleError : Error {
  using Error::Error;
};

// Geometry description that cannot be realized (no views, bad detector).
struct GeometryError : Error {
  using Error::Error;
};

// Numerical breakdown inside an iterative solver (NaN/Inf, zero curvature).
struct NumericalError : Error {
  using Error::Error;
};

// Invalid experiment configuration (unknown keys, missing fields, bad enum).
struct ConfigError : Error {
  using Error::Error;
};

using Index = Eigen::Index;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Row-major 2-D array: matches the slice-major, row-major memory layout of
// Volume so slices can be viewed without copying.
template <typename Scalar>
using ArrayXXr = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ArrayXd = ArrayX<double>;
using ImageXd = ArrayXXr<double>;

}  // namespace iscs
