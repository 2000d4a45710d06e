#pragma once

#include <stdexcept>
#include <string>

namespace roomest {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A RoomConfig, pulse list or settings object violates its invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A pulse does not fit into the requested signal length.
class PulseOutOfRange : public Error {
 public:
  using Error::Error;
};

/// Peak detection found nothing above threshold.
class NoPeakFound : public Error {
 public:
  using Error::Error;
};

/// No leading-pulse hypothesis produced the expected set cardinalities.
class ClassificationFailure : public Error {
 public:
  using Error::Error;
};

/// A (d0, da, db, dc) quadruple admits no physical wall-pair solution.
class InconsistentHypothesis : public Error {
 public:
  using Error::Error;
};

}  // namespace roomest
