#ifndef MSUNET_ERROR_H_
#define MSUNET_ERROR_H_

#include <stdexcept>
#include <string>

namespace msunet {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration value violates its documented invariant. `field` is the
// dotted path of the offending entry (e.g. "phantom.n_vs1").
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training (non-finite loss, divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

// A statistic cannot be computed from the supplied data (empty or
// constant pools, too few points for k neighbours, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace msunet

#endif  // MSUNET_ERROR_H_
