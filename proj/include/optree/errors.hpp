#ifndef OPTREE_ERRORS_HPP
#define OPTREE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace optree {

/// Invalid configuration (bad prior parameters, limits, CLI options).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite or out-of-range value appeared inside a computation.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optree

#endif  // OPTREE_ERRORS_HPP
