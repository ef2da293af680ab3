#pragma once

#include <string>
#include <vector>

#include "abrac/matrix.hpp"

namespace abrac {

/// Evaluations collected on one task: inputs X (N x D) with targets y.
struct TaskDataset {
  int task_id = 0;
  DenseMatrix x;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t input_dim() const noexcept { return x.cols(); }
};

}  // namespace abrac
