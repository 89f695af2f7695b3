#pragma once

#include <stdexcept>
#include <string>

namespace rubrictree {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// --- gateway ---------------------------------------------------------------

class GatewayError : public Error {
public:
  using Error::Error;
};

/// Transient provider failure; retries exhausted.
class ProviderUnavailable : public GatewayError {
public:
  using GatewayError::GatewayError;
};

/// Credential rejected. Not retryable.
class AuthFailure : public GatewayError {
public:
  using GatewayError::GatewayError;
};

class TimeoutError : public GatewayError {
public:
  using GatewayError::GatewayError;
};

/// The completion never produced a parseable JSON object.
class MalformedOutput : public GatewayError {
public:
  using GatewayError::GatewayError;
};

/// Valid JSON but the required top-level keys are absent.
class MissingKeys : public GatewayError {
public:
  using GatewayError::GatewayError;
};

/// The mock backend has no entry matching the prompt. Test-setup error,
/// never retried.
class MockScriptMiss : public GatewayError {
public:
  using GatewayError::GatewayError;
};

// --- expansion engine ------------------------------------------------------

class EngineError : public Error {
public:
  using Error::Error;
};

/// An operator that must produce nodes produced none.
class EmptyExpansion : public EngineError {
public:
  using EngineError::EngineError;
};

/// A per-item operator returned the wrong number of items.
class LengthMismatch : public EngineError {
public:
  using EngineError::EngineError;
};

/// Criteria reviewer output failed criteria-set validation.
class ConsolidationInvalid : public EngineError {
public:
  using EngineError::EngineError;
};

// --- scoring ---------------------------------------------------------------

class ZeroDenominator : public Error {
public:
  using Error::Error;
};

// --- quality metrics -------------------------------------------------------

class EmptyReferenceSet : public Error {
public:
  using Error::Error;
};

class EmptyGeneratedSet : public Error {
public:
  using Error::Error;
};

class EmptyCorpus : public Error {
public:
  using Error::Error;
};

class NoScorableTokens : public Error {
public:
  using Error::Error;
};

class OutOfRangeRating : public Error {
public:
  using Error::Error;
};

// --- taxonomy --------------------------------------------------------------

class EmptyTag : public Error {
public:
  using Error::Error;
};

class EmptyDimension : public Error {
public:
  using Error::Error;
};

// --- harness ---------------------------------------------------------------

class ParseError : public Error {
public:
  ParseError(const std::string& what, size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  size_t line() const { return line_; }

private:
  size_t line_;
};

class DuplicateId : public Error {
public:
  using Error::Error;
};

class UnknownQuestionId : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// A resumed run's prompt or stopword assets no longer hash to the values
/// recorded in the manifest.
class AssetDrift : public Error {
public:
  using Error::Error;
};

}  // namespace rubrictree
