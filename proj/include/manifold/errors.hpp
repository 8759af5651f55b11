#ifndef MANIFOLD_ERRORS_HPP
#define MANIFOLD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace manifold {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration values.
class ParamError : public Error {
 public:
  using Error::Error;
};

// File system / format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Degenerate data or failed numerics (isolated nodes, empty affinity, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace manifold

#endif
