#pragma once

#include <stdexcept>

namespace windgp {

/// Malformed, missing or out-of-range input data (files, records, datasets).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization or optimization failure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace windgp
