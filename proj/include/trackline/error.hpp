#pragma once

#include <stdexcept>
#include <string>

namespace trackline {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A byte channel endpoint was used after its link was torn down.
class ChannelClosed : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked with its stated preconditions unmet.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace trackline
