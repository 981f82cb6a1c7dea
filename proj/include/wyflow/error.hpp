#pragma once

#include <stdexcept>
#include <string>

namespace wyflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration that the model does not admit (e.g. m = 0 with a nonzero weight).
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

/// Fields defined on different grids were combined.
class GeometryMismatch : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain of an operation (non-finite values, non-positive factors).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to reach its tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// The conformal factor lost positivity and step halving could not recover it.
class BlowUp : public Error {
 public:
  using Error::Error;
};

/// A fit or inequality check had too little usable data.
class InsufficientSignal : public Error {
 public:
  using Error::Error;
};

}  // namespace wyflow
