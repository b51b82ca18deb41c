#include "ppgcn/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "ppgcn/error.hpp"

namespace ppgcn {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> row_ptr,
                           std::vector<std::uint32_t> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size()) {
    fail(ErrorCode::ShapeMismatch, "inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) fail(ErrorCode::ShapeMismatch, "row_ptr not monotone");
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] >= cols_) fail(ErrorCode::ShapeMismatch, "column index out of range");
      if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
        fail(ErrorCode::ShapeMismatch, "columns not strictly increasing in row " +
                                           std::to_string(r));
      }
      if (values_[k] == 0.0) fail(ErrorCode::InvalidArgument, "explicit zero in CSR payload");
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) fail(ErrorCode::ShapeMismatch, "triplet out of range");
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  for (std::size_t k = 0; k < triplets.size();) {
    const auto r = triplets[k].row;
    const auto c = triplets[k].col;
    double v = 0.0;
    for (; k < triplets.size() && triplets[k].row == r && triplets[k].col == c; ++k) {
      v += triplets[k].value;
    }
    if (v != 0.0) {
      m.col_idx_.push_back(c);
      m.values_.push_back(v);
      ++m.row_ptr_[r + 1];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.col_idx_[i] = static_cast<std::uint32_t>(i);
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const noexcept {
  if (r >= rows_) return 0.0;
  const auto cols = row_cols(r);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(c));
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseMatrix::diagonal() const {
  const std::size_t n = std::min(rows_, cols_);
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  for (const auto c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r) t.row_ptr_[r + 1] += t.row_ptr_[r];
  std::vector<std::size_t> cursor(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Rows visited ascending, so each transposed row receives ascending columns.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const auto dst = cursor[col_idx_[k]]++;
      t.col_idx_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  const SparseMatrix t = transpose();
  if (tol == 0.0) return t == *this;
  if (t.row_ptr_ != row_ptr_ || t.col_idx_ != col_idx_) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double scale = std::max({1.0, std::abs(values_[k]), std::abs(t.values_[k])});
    if (std::abs(values_[k] - t.values_[k]) > tol * scale) return false;
  }
  return true;
}

}  // namespace ppgcn
