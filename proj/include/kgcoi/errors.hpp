#pragma once

#include <stdexcept>
#include <string>

namespace kgcoi {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (TSV row, JSON line, model completion).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Input is well-formed but violates a structural invariant.
class IntegrityError : public Error {
public:
  using Error::Error;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class TemplateError : public Error {
public:
  using Error::Error;
};

/// Transport-level failure after the retry budget was spent.
class TransportError : public Error {
public:
  using Error::Error;
};

/// Endpoint answered with a non-success status that is not retried.
class EndpointError : public Error {
public:
  EndpointError(int status, std::string payload)
      : Error("endpoint returned status " + std::to_string(status) + ": " + payload),
        status_(status),
        payload_(std::move(payload)) {}

  int status() const noexcept { return status_; }
  const std::string& payload() const noexcept { return payload_; }

private:
  int status_;
  std::string payload_;
};

class AlignmentError : public Error {
public:
  using Error::Error;
};

class SamplingExhausted : public Error {
public:
  using Error::Error;
};

/// Persisted artifact has the wrong version or is corrupted.
class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

}  // namespace kgcoi
