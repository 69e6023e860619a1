#pragma once

#include <stdexcept>
#include <string>

namespace dcovsel {

/// Malformed or out-of-range input data (NA cells, non-finite values, bad shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs whose sample counts or column counts disagree.
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

/// Invalid parameter values supplied by the caller.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The LP solver could not produce a certified optimum.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dcovsel
