#pragma once

#include <stdexcept>
#include <string>

namespace mega {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Bad input data: files, CSV contents, checkpoints (CLI exit code 3).
struct DataError : Error {
    using Error::Error;
};

/// Tensor/genome shape or architecture mismatch (CLI exit code 3).
struct ShapeError : DataError {
    using DataError::DataError;
};

/// Numeric failure: divergence, non-finite intermediates (CLI exit code 4).
struct NumericError : Error {
    using Error::Error;
};

/// Fitness evaluation failure, annotated with the individual's index.
struct FitnessError : NumericError {
    FitnessError(std::size_t individual_index, const std::string& msg)
        : NumericError("fitness evaluation failed for individual " +
                       std::to_string(individual_index) + ": " + msg),
          index(individual_index) {}
    std::size_t index;
};

}  // namespace mega
