#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace abrac {

/// Dense row-major matrix of doubles. Minimal surface: just what the
/// regression and network code needs, not a general BLAS replacement.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool all_finite() const;

  /// y = A x
  std::vector<double> matvec(std::span<const double> x) const;
  /// y = A^T x
  std::vector<double> matvec_transposed(std::span<const double> x) const;
  /// A^T A (symmetric, cols x cols)
  DenseMatrix gram() const;
  /// Copy of the leading `ncols` columns.
  DenseMatrix leading_columns(std::size_t ncols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Cholesky factorization A = L L^T of a symmetric positive-definite matrix.
/// Returns the lower triangle L (upper entries zero). No jitter is added;
/// callers own regularization. Throws DecompositionError on a non-positive
/// pivot and std::invalid_argument if `a` is not square or not symmetric.
DenseMatrix cholesky(const DenseMatrix& a);

/// Forward substitution: solves L X = B for lower-triangular L. B may carry
/// multiple right-hand sides as columns. Throws SingularMatrixError on a zero
/// diagonal entry.
DenseMatrix solve_lower_triangular(const DenseMatrix& l, const DenseMatrix& b);
std::vector<double> solve_lower_triangular(const DenseMatrix& l,
                                           std::span<const double> b);

/// Backward substitution against the transpose: solves L^T x = b using the
/// lower-triangular storage of L.
std::vector<double> solve_lower_transposed(const DenseMatrix& l,
                                           std::span<const double> b);

/// Solves (L L^T) x = b with one forward and one backward substitution.
std::vector<double> solve_cholesky(const DenseMatrix& l,
                                   std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

}  // namespace abrac
