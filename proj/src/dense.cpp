#include "ppgcn/dense.hpp"

#include <algorithm>
#include <cmath>

#include "ppgcn/error.hpp"

namespace ppgcn {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::ShapeMismatch, "dense payload size does not match " +
                                       std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

}  // namespace ppgcn
