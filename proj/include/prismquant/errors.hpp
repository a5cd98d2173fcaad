#pragma once

#include <stdexcept>
#include <string>

namespace prismquant {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input contained NaN/Inf or violated a structural precondition.
class RejectedInputError : public Error {
 public:
  using Error::Error;
};

/// A matrix required to be positive definite failed a Cholesky pivot.
class DefinitenessError : public Error {
 public:
  DefinitenessError(const std::string& what, std::size_t pivot)
      : Error(what), pivot_index(pivot) {}
  std::size_t pivot_index;
};

/// An iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

/// Argument outside the operation's admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Fewer samples than the estimator needs.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A coded stream is truncated or internally inconsistent.
class CorruptStreamError : public Error {
 public:
  CorruptStreamError(const std::string& what, std::size_t position)
      : Error(what + " (at byte/bit position " + std::to_string(position) + ")"),
        position(position) {}
  std::size_t position;
};

/// Decoder dictionary does not match the one the stream was encoded with.
class DictionaryMismatchError : public Error {
 public:
  using Error::Error;
};

/// Total rate budget below the lossless label cost.
class InfeasibleBudgetError : public Error {
 public:
  InfeasibleBudgetError(const std::string& what, double minimum_feasible_rate)
      : Error(what), minimum_feasible_rate(minimum_feasible_rate) {}
  double minimum_feasible_rate;
};

/// Malformed record while reading an external dataset.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t record)
      : Error(what + " (record " + std::to_string(record) + ")"), record_index(record) {}
  std::size_t record_index;
};

}  // namespace prismquant
