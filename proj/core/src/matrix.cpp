#include "abrac/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "abrac/errors.hpp"

namespace abrac {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " +
                                std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) +
                                "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<double> DenseMatrix::matvec(std::span<const double> x) const {
  if (x.size() != cols_) {
    throw std::invalid_argument("matvec: dimension mismatch");
  }
  std::vector<double> y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* r = data_.data() + i * cols_;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> DenseMatrix::matvec_transposed(
    std::span<const double> x) const {
  if (x.size() != rows_) {
    throw std::invalid_argument("matvec_transposed: dimension mismatch");
  }
  std::vector<double> y(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* r = data_.data() + i * cols_;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols_; ++j) y[j] += r[j] * xi;
  }
  return y;
}

DenseMatrix DenseMatrix::gram() const {
  DenseMatrix g(cols_, cols_);
  for (std::size_t n = 0; n < rows_; ++n) {
    const double* r = data_.data() + n * cols_;
    for (std::size_t i = 0; i < cols_; ++i) {
      const double ri = r[i];
      for (std::size_t j = i; j < cols_; ++j) g(i, j) += ri * r[j];
    }
  }
  for (std::size_t i = 0; i < cols_; ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  }
  return g;
}

DenseMatrix DenseMatrix::leading_columns(std::size_t ncols) const {
  if (ncols > cols_) {
    throw std::invalid_argument("leading_columns: ncols exceeds cols");
  }
  DenseMatrix out(rows_, ncols);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < ncols; ++j) out(i, j) = (*this)(i, j);
  }
  return out;
}

DenseMatrix cholesky(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) {
    throw std::invalid_argument("cholesky: matrix is not square");
  }
  // Symmetry check, relative to the largest entry.
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::fabs(a(i, j) - a(j, i)) > 1e-10 * std::max(scale, 1.0)) {
        throw std::invalid_argument("cholesky: matrix is not symmetric");
      }
    }
  }

  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) {
      throw DecompositionError(j, pivot);
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

DenseMatrix solve_lower_triangular(const DenseMatrix& l,
                                   const DenseMatrix& b) {
  const std::size_t n = l.rows();
  if (l.cols() != n) {
    throw std::invalid_argument("solve_lower_triangular: L is not square");
  }
  if (b.rows() != n) {
    throw std::invalid_argument(
        "solve_lower_triangular: rhs row count mismatch");
  }
  DenseMatrix x = b;
  for (std::size_t i = 0; i < n; ++i) {
    if (l(i, i) == 0.0) throw SingularMatrixError(i);
    for (std::size_t c = 0; c < b.cols(); ++c) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

std::vector<double> solve_lower_triangular(const DenseMatrix& l,
                                           std::span<const double> b) {
  const std::size_t n = l.rows();
  if (l.cols() != n) {
    throw std::invalid_argument("solve_lower_triangular: L is not square");
  }
  if (b.size() != n) {
    throw std::invalid_argument(
        "solve_lower_triangular: rhs length mismatch");
  }
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (l(i, i) == 0.0) throw SingularMatrixError(i);
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

std::vector<double> solve_lower_transposed(const DenseMatrix& l,
                                           std::span<const double> b) {
  const std::size_t n = l.rows();
  if (l.cols() != n) {
    throw std::invalid_argument("solve_lower_transposed: L is not square");
  }
  if (b.size() != n) {
    throw std::invalid_argument("solve_lower_transposed: rhs length mismatch");
  }
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t ii = n; ii-- > 0;) {
    if (l(ii, ii) == 0.0) throw SingularMatrixError(ii);
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

std::vector<double> solve_cholesky(const DenseMatrix& l,
                                   std::span<const double> b) {
  std::vector<double> y = solve_lower_triangular(l, b);
  return solve_lower_transposed(l, y);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace abrac
