#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace ppgcn {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

// Compressed sparse row matrix. Columns are strictly increasing within each
// row and no explicit zeros are stored, so iteration is deterministic
// row-major order and two matrices with the same entries compare equal.
class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  // Takes ownership of raw CSR arrays. Validates ordering, bounds and the
  // no-explicit-zeros rule.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
               std::vector<std::uint32_t> col_idx, std::vector<double> values);

  // Duplicate coordinates are summed; resulting zeros are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::uint32_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::uint32_t> row_cols(std::size_t r) const noexcept {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  // Binary search within row r; 0 when absent.
  double at(std::size_t r, std::size_t c) const noexcept;
  std::vector<double> diagonal() const;

  SparseMatrix transpose() const;
  bool is_symmetric(double tol = 0.0) const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace ppgcn
