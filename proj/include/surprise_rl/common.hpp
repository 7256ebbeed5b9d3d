#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace srl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Shape or dimension mismatch between caller-supplied arrays.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A precondition of the API was violated (e.g. stepping a finished episode).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite values showed up where finite math was required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Not enough data to compute the requested statistic.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checkpoint / metrics file could not be read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace srl
