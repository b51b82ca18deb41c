#pragma once

// Per-row bodies shared by the OpenMP kernels and their serial twins. Both
// translation units call exactly these functions, which is what makes the
// parallel and reference results bitwise identical.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/error.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn::kernels::rows {

struct Accumulator {
  explicit Accumulator(std::size_t width) : value(width, 0.0), seen(width, 0) {}
  std::vector<double> value;
  std::vector<char> seen;
  std::vector<std::uint32_t> touched;
};

struct SparseRow {
  std::vector<std::uint32_t> cols;
  std::vector<double> values;
};

inline void spgemm_row(const SparseMatrix& a, const SparseMatrix& b, std::size_t i,
                       Accumulator& acc, SparseRow& out) {
  acc.touched.clear();
  const auto a_cols = a.row_cols(i);
  const auto a_vals = a.row_values(i);
  for (std::size_t p = 0; p < a_cols.size(); ++p) {
    const auto k = a_cols[p];
    const double av = a_vals[p];
    const auto b_cols = b.row_cols(k);
    const auto b_vals = b.row_values(k);
    for (std::size_t q = 0; q < b_cols.size(); ++q) {
      const auto j = b_cols[q];
      if (!acc.seen[j]) {
        acc.seen[j] = 1;
        acc.touched.push_back(j);
      }
      acc.value[j] += av * b_vals[q];
    }
  }
  std::sort(acc.touched.begin(), acc.touched.end());
  out.cols.clear();
  out.values.clear();
  for (const auto j : acc.touched) {
    if (acc.value[j] != 0.0) {
      out.cols.push_back(j);
      out.values.push_back(acc.value[j]);
    }
    acc.value[j] = 0.0;
    acc.seen[j] = 0;
  }
}

inline SparseMatrix assemble(std::size_t rows, std::size_t cols,
                             const std::vector<SparseRow>& parts) {
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] = row_ptr[r] + parts[r].cols.size();
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(row_ptr.back());
  values.reserve(row_ptr.back());
  for (const auto& p : parts) {
    col_idx.insert(col_idx.end(), p.cols.begin(), p.cols.end());
    values.insert(values.end(), p.values.begin(), p.values.end());
  }
  return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

inline void spmm_row(const SparseMatrix& a, const DenseMatrix& x, std::size_t i,
                     DenseMatrix& y) {
  auto out = y.row(i);
  const auto cols = a.row_cols(i);
  const auto vals = a.row_values(i);
  for (std::size_t p = 0; p < cols.size(); ++p) {
    const auto src = x.row(cols[p]);
    const double v = vals[p];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += v * src[c];
  }
}

inline void gemm_row(const DenseMatrix& a, const DenseMatrix& b, std::size_t i,
                     DenseMatrix& c) {
  auto out = c.row(i);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double v = a(i, k);
    if (v == 0.0) continue;
    const auto src = b.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v * src[j];
  }
}

inline void gemm_tn_row(const DenseMatrix& a, const DenseMatrix& b, std::size_t r,
                        DenseMatrix& c) {
  auto out = c.row(r);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double v = a(i, r);
    if (v == 0.0) continue;
    const auto src = b.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v * src[j];
  }
}

inline void gemm_nt_row(const DenseMatrix& a, const DenseMatrix& b, std::size_t i,
                        DenseMatrix& c) {
  const auto lhs = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(lhs, b.row(j));
}

inline void sddmm_row(const SparseMatrix& pattern, const DenseMatrix& a, const DenseMatrix& b,
                      std::size_t i, std::vector<double>& out) {
  const auto lhs = a.row(i);
  const auto cols = pattern.row_cols(i);
  const std::size_t base = pattern.row_ptr()[i];
  for (std::size_t p = 0; p < cols.size(); ++p) out[base + p] = dot(lhs, b.row(cols[p]));
}

inline void weighted_sum_row(std::span<const SparseMatrix> mats, std::span<const double> w,
                             std::size_t i, DenseMatrix& out) {
  auto row = out.row(i);
  for (std::size_t m = 0; m < mats.size(); ++m) {
    const auto cols = mats[m].row_cols(i);
    const auto vals = mats[m].row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) row[cols[p]] += w[m] * vals[p];
  }
}

inline void sparse_weighted_sum_row(std::span<const SparseMatrix> mats,
                                    std::span<const double> w, bool drop_diagonal,
                                    std::size_t i, Accumulator& acc, SparseRow& out) {
  acc.touched.clear();
  for (std::size_t m = 0; m < mats.size(); ++m) {
    if (w[m] == 0.0) continue;
    const auto cols = mats[m].row_cols(i);
    const auto vals = mats[m].row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const auto j = cols[p];
      if (drop_diagonal && j == i) continue;
      if (!acc.seen[j]) {
        acc.seen[j] = 1;
        acc.touched.push_back(j);
      }
      acc.value[j] += w[m] * vals[p];
    }
  }
  std::sort(acc.touched.begin(), acc.touched.end());
  out.cols.clear();
  out.values.clear();
  for (const auto j : acc.touched) {
    if (acc.value[j] != 0.0) {
      out.cols.push_back(j);
      out.values.push_back(acc.value[j]);
    }
    acc.value[j] = 0.0;
    acc.seen[j] = 0;
  }
}

inline void require(bool ok, const char* kernel, const std::string& detail) {
  if (!ok) fail(ErrorCode::ShapeMismatch, std::string(kernel) + ": " + detail);
}

inline std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void check_spgemm(const SparseMatrix& a, const SparseMatrix& b) {
  require(a.cols() == b.rows(), "spgemm", dims(a.rows(), a.cols()) + " * " + dims(b.rows(), b.cols()));
}
inline void check_spmm(const SparseMatrix& a, const DenseMatrix& x) {
  require(a.cols() == x.rows(), "spmm", dims(a.rows(), a.cols()) + " * " + dims(x.rows(), x.cols()));
}
inline void check_gemm(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "gemm", dims(a.rows(), a.cols()) + " * " + dims(b.rows(), b.cols()));
}
inline void check_gemm_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "gemm_tn", dims(a.rows(), a.cols()) + "^T * " + dims(b.rows(), b.cols()));
}
inline void check_gemm_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), "gemm_nt", dims(a.rows(), a.cols()) + " * " + dims(b.rows(), b.cols()) + "^T");
}
inline void check_sddmm(const SparseMatrix& p, const DenseMatrix& a, const DenseMatrix& b) {
  require(p.rows() == a.rows() && p.cols() == b.rows() && a.cols() == b.cols(), "sddmm",
          "pattern " + dims(p.rows(), p.cols()) + " vs " + dims(a.rows(), a.cols()) + ", " +
              dims(b.rows(), b.cols()));
}
inline void check_weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w) {
  require(mats.size() == w.size(), "weighted_sum",
          std::to_string(mats.size()) + " matrices vs " + std::to_string(w.size()) + " weights");
  require(!mats.empty(), "weighted_sum", "no matrices");
  for (const auto& m : mats) {
    require(m.rows() == mats[0].rows() && m.cols() == mats[0].cols(), "weighted_sum",
            "operand shapes differ");
  }
}

}  // namespace ppgcn::kernels::rows
