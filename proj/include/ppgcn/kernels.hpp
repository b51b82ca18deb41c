#pragma once

// Data-parallel kernels. Every kernel in `ppgcn::kernels` parallelizes over
// output rows with OpenMP and keeps a fixed per-row reduction order, so its
// result is bitwise identical to the twin in `ppgcn::kernels::serial`, which
// is the plain single-threaded reference used by tests and benchmarks.

#include <span>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn::kernels {

// Sparse-sparse product a·b. Per output row, contributions are accumulated
// in (k ascending over a's row, j ascending over b's row k) order.
SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b);

// Sparse-dense product a·x.
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x);

// a·b, aᵀ·b and a·bᵀ. Inner sums run over the shared index ascending.
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gemm_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gemm_nt(const DenseMatrix& a, const DenseMatrix& b);

// Sampled dense-dense product: for every stored entry (i, j) of `pattern`,
// out[k] = <a.row(i), b.row(j)>, aligned with pattern.values().
std::vector<double> sddmm(const SparseMatrix& pattern, const DenseMatrix& a,
                          const DenseMatrix& b);

// Dense Σ_m w[m]·mats[m], summed over m ascending per entry.
DenseMatrix weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w);

// Sparse Σ_m w[m]·mats[m] over the union of supports, same summation order.
// Terms with w[m] == 0 are skipped; `drop_diagonal` omits (i, i).
SparseMatrix sparse_weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w,
                                 bool drop_diagonal);

namespace serial {

SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b);
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& x);
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gemm_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gemm_nt(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> sddmm(const SparseMatrix& pattern, const DenseMatrix& a,
                          const DenseMatrix& b);
DenseMatrix weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w);
SparseMatrix sparse_weighted_sum(std::span<const SparseMatrix> mats, std::span<const double> w,
                                 bool drop_diagonal);

}  // namespace serial

}  // namespace ppgcn::kernels
