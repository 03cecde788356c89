#pragma once

#include <stdexcept>
#include <string>

namespace cefr {

/// Malformed or inconsistent input data (dataset rows, labels, feature rows).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required resource (word list, embeddings, lexicon, model file) is
/// missing or unreadable.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (bad k, bad sampling fractions...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Readability index requested on stats with zero words or sentences.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelVersionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class ModelTruncatedError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class FingerprintMismatch : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

}  // namespace cefr
