#pragma once

#include <stdexcept>
#include <string>

namespace radarloop {

// Error categories map to CLI exit codes: config 2, data 3, numerical 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rotation angle at pi, where the SE(3) log is not unique.
struct AmbiguousLogError : NumericalError {
  using NumericalError::NumericalError;
};

// Registration found no correspondences; downstream treats as misaligned.
struct NoOverlapError : NumericalError {
  using NumericalError::NumericalError;
};

// Entropy measures cannot be computed (no point reaches min neighbors).
struct MeasuresUndefinedError : NumericalError {
  using NumericalError::NumericalError;
};

// Metric undefined for the given input (e.g. single-class ROC).
struct UndefinedMetricError : DataError {
  using DataError::DataError;
};

struct TrainingFailedError : DataError {
  using DataError::DataError;
};

}  // namespace radarloop
