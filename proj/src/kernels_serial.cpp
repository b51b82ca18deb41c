#include "ppgcn/kernels.hpp"

#include "kernels_rows.hpp"

namespace ppgcn::kernels::serial {

namespace r = ppgcn::kernels::rows;

SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b) {
  r::check_spgemm(a, b);
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  std::vector<r::SparseRow> parts(a.rows());
  r::Accumulator acc(b.cols());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    r::spgemm_row(a, b, static_cast<std::size_t>(i), acc, parts[static_cast<std::size_t>(i)]);
  }
  return r::assemble(a.rows(), b.cols(), parts);
}

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x) {
  r::check_spmm(a, x);
  DenseMatrix y(a.rows(), x.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::spmm_row(a, x, static_cast<std::size_t>(i), y);
  return y;
}

DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  r::check_gemm(a, b);
  DenseMatrix c(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::gemm_row(a, b, static_cast<std::size_t>(i), c);
  return c;
}

DenseMatrix gemm_tn(const DenseMatrix& a, const DenseMatrix& b) {
  r::check_gemm_tn(a, b);
  DenseMatrix c(a.cols(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.cols());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::gemm_tn_row(a, b, static_cast<std::size_t>(i), c);
  return c;
}

DenseMatrix gemm_nt(const DenseMatrix& a, const DenseMatrix& b) {
  r::check_gemm_nt(a, b);
  DenseMatrix c(a.rows(), b.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::gemm_nt_row(a, b, static_cast<std::size_t>(i), c);
  return c;
}

std::vector<double> sddmm(const SparseMatrix& pattern, const DenseMatrix& a,
                          const DenseMatrix& b) {
  r::check_sddmm(pattern, a, b);
  std::vector<double> out(pattern.nnz(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(pattern.rows());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::sddmm_row(pattern, a, b, static_cast<std::size_t>(i), out);
  return out;
}

DenseMatrix weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w) {
  r::check_weighted_sum(mats, w);
  DenseMatrix out(mats[0].rows(), mats[0].cols());
  const auto n = static_cast<std::ptrdiff_t>(out.rows());

  for (std::ptrdiff_t i = 0; i < n; ++i) r::weighted_sum_row(mats, w, static_cast<std::size_t>(i), out);
  return out;
}

SparseMatrix sparse_weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w,
                                 bool drop_diagonal) {
  r::check_weighted_sum(mats, w);
  const std::size_t cols = mats[0].cols();
  const auto n = static_cast<std::ptrdiff_t>(mats[0].rows());
  std::vector<r::SparseRow> parts(mats[0].rows());
  r::Accumulator acc(cols);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    r::sparse_weighted_sum_row(mats, w, drop_diagonal, static_cast<std::size_t>(i), acc,
                               parts[static_cast<std::size_t>(i)]);
  }
  return r::assemble(mats[0].rows(), cols, parts);
}

}  // namespace ppgcn::kernels::serial
