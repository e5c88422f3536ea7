#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omegaflow {

using Complex = std::complex<double>;

// Base class for failures of a numerical contract (positivity, convergence,
// conditioning). The CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A density or induced metric lost pointwise positivity.
struct PositivityError : NumericError {
  PositivityError(const std::string& what, Eigen::Index node_, double value_)
      : NumericError(what), node(node_), value(value_) {}
  Eigen::Index node;
  double value;
};

// A Gram-type matrix that must be positive definite is not (or is too
// ill-conditioned to factor).
struct NotPositiveDefiniteError : NumericError {
  NotPositiveDefiniteError(const std::string& what, double min_eigenvalue_)
      : NumericError(what), min_eigenvalue(min_eigenvalue_) {}
  double min_eigenvalue;
};

struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

// Operation requested on a backend that cannot support it.
struct UnsupportedError : NumericError {
  using NumericError::NumericError;
};

// Malformed experiment configuration. The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FieldRole { Potential, VolumeDensity, Generic };

// A scalar field sampled at the quadrature nodes of a GeometryBackend,
// tagged with how it is meant to be read.  VolumeDensity values are
// densities against the unit-mass reference form (positive, integral 1).
struct DensityField {
  FieldRole role = FieldRole::Generic;
  Eigen::ArrayXd values;
};

// Consumer of diagnostic rows emitted while an iteration runs, so traces can
// be flushed to disk before any later step can fail.  Empty means disabled.
using RowSink = std::function<void(const std::vector<double>&)>;

}  // namespace omegaflow
