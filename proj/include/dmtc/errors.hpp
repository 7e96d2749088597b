#pragma once
#include <stdexcept>
#include <string>

namespace dmtc {

// Bad input: malformed records, unknown labels, inconsistent dimensions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unreadable/unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote endpoint failed after all retries, or replied with an unusable body.
class RemoteServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero vector where a direction is required.
class DegenerateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A batch (or every batch of an epoch) produced no pairs of either polarity.
class NoPairsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Process exit codes shared by every CLI subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitIo = 3,
  kExitRemote = 4,
};

}  // namespace dmtc
