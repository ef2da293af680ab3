#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace abrac {

/// Cholesky factorization hit a non-positive pivot. `pivot_index` is the
/// zero-based row at which the factorization failed.
class DecompositionError : public std::runtime_error {
 public:
  DecompositionError(std::size_t pivot_index, double pivot_value)
      : std::runtime_error("cholesky: non-positive pivot " +
                           std::to_string(pivot_value) + " at index " +
                           std::to_string(pivot_index)),
        pivot_index_(pivot_index),
        pivot_value_(pivot_value) {}

  std::size_t pivot_index() const noexcept { return pivot_index_; }
  double pivot_value() const noexcept { return pivot_value_; }

 private:
  std::size_t pivot_index_;
  double pivot_value_;
};

class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(std::size_t diagonal_index)
      : std::runtime_error("triangular solve: zero diagonal at index " +
                           std::to_string(diagonal_index)),
        diagonal_index_(diagonal_index) {}

  std::size_t diagonal_index() const noexcept { return diagonal_index_; }

 private:
  std::size_t diagonal_index_;
};

/// Offline feature training produced a non-finite loss.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(int epoch, double learning_rate)
      : std::runtime_error("training diverged at epoch " +
                           std::to_string(epoch) + " (learning rate " +
                           std::to_string(learning_rate) + ")"),
        epoch_(epoch),
        learning_rate_(learning_rate) {}

  int epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  int epoch_;
  double learning_rate_;
};

}  // namespace abrac
