#pragma once

#include <stdexcept>
#include <string>

namespace igda {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed graph input: bad node count, duplicate names, self-edges.
class InvalidGraphError : public Error {
 public:
  using Error::Error;
};

/// A query outside the candidate edge set (self-edge, unknown id).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A label map that does not cover exactly the candidate pairs.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The completion endpoint could not be reached or kept failing.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Unusable configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The completion endpoint rejected the request (non-retryable 4xx).
class RequestRejectedError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class PolicyUnavailableError : public Error {
 public:
  using Error::Error;
};

/// The experiment oracle answered the same pair differently twice.
class OracleInconsistencyError : public Error {
 public:
  using Error::Error;
};

/// Curves or logs that do not share a budget grid.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Logged values disagree with values recomputed from snapshots.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace igda
