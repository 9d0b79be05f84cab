#pragma once

#include <stdexcept>
#include <string>

namespace safectl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix arguments with inconsistent sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Riccati iteration diverged or the closed loop is not stable.
class NonStabilizableError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed after the jitter ladder was exhausted.
class NotPdError : public Error {
 public:
  using Error::Error;
};

/// A state became non-finite during integration (divergence).
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// step() called on a finished episode.
class EpisodeOverError : public Error {
 public:
  using Error::Error;
};

/// Configuration file parse or schema failure; carries a field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Requested combination is not supported (system/shape, controller/system).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Positivity resampling of inertial parameters failed.
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

}  // namespace safectl
