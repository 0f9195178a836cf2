#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nonlin {

/// Bad input: unknown names, wrong shapes, invalid parameters, unsupported forms.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numbers went wrong: factorizations failed, non-finite evaluations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientSamples : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Raised for the general (non-additive, non-multiplicative) noise form.
class NoClosedForm : public ValidationError {
 public:
  NoClosedForm() : ValidationError("no closed form for general noise") {}
};

class NotPositiveSemiDefinite : public NumericalError {
 public:
  explicit NotPositiveSemiDefinite(const std::string& what)
      : NumericalError("not positive semi-definite: " + what) {}
};

class DegenerateCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFiniteOutput : public NumericalError {
 public:
  explicit NonFiniteOutput(std::size_t sample_index)
      : NumericalError("non-finite model output at sample " + std::to_string(sample_index)),
        sample_index_(sample_index) {}

  std::size_t sample_index() const noexcept { return sample_index_; }

 private:
  std::size_t sample_index_;
};

}  // namespace nonlin
