#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace matchcal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values (sizes, probabilities, counts).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Singular or numerically rank-deficient linear system.
class RankError : public Error {
 public:
  using Error::Error;
};

// An operation was called on objects whose state does not support it
// (missing weights, mismatched lengths).
class StateError : public Error {
 public:
  using Error::Error;
};

// Iterative fit failed to converge or the data separate.
class FitError : public Error {
 public:
  using Error::Error;
};

// Too few observations to estimate a variance.
class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchcal
