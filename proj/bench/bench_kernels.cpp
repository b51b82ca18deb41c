// Serial reference kernels against their OpenMP twins on graph-shaped
// inputs. Run with OMP_NUM_THREADS set to compare scaling; both variants
// produce bitwise-identical output, so only time differs.

#include <benchmark/benchmark.h>

#include <random>

#include "ppgcn/kernels.hpp"
#include "ppgcn/metapath.hpp"
#include "ppgcn/nn.hpp"
#include "ppgcn/pairwise.hpp"
#include "ppgcn/pipeline.hpp"

using namespace ppgcn;

namespace {

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, std::size_t per_row, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> col(0, static_cast<std::uint32_t>(cols - 1));
  std::uniform_real_distribution<double> val(0.1, 1.0);
  std::vector<Triplet> t;
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < per_row; ++k) t.push_back({i, col(rng), val(rng)});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

template <bool Parallel>
void BM_spgemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sparse(n, n / 2, 8, 1);
  const auto at = a.transpose();
  for (auto _ : state) {
    auto c = Parallel ? kernels::spgemm(a, at) : kernels::serial::spgemm(a, at);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Parallel>
void BM_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sparse(n, n, 32, 2);
  const auto x = random_dense(n, 64, 3);
  for (auto _ : state) {
    auto c = Parallel ? kernels::spmm(a, x) : kernels::serial::spmm(a, x);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_dense(n, 128, 4);
  const auto b = random_dense(128, 64, 5);
  for (auto _ : state) {
    auto c = Parallel ? kernels::gemm(a, b) : kernels::serial::gemm(a, b);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Parallel>
void BM_sddmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = random_sparse(n, n, 32, 6);
  const auto a = random_dense(n, 64, 7);
  const auto b = random_dense(n, 64, 8);
  for (auto _ : state) {
    auto c = Parallel ? kernels::sddmm(p, a, b) : kernels::serial::sddmm(p, a, b);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Parallel>
void BM_sparse_weighted_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<SparseMatrix> mats;
  for (std::uint64_t m = 0; m < 15; ++m) mats.push_back(random_sparse(n, n, 16, 10 + m));
  const std::vector<double> w(mats.size(), 1.0 / 15.0);
  for (auto _ : state) {
    auto c = Parallel ? kernels::sparse_weighted_sum(mats, w, true)
                      : kernels::serial::sparse_weighted_sum(mats, w, true);
    benchmark::DoNotOptimize(c);
  }
}

// One training batch on the default planted corpus: the end-to-end cost
// the kernels above add up to.
void BM_training_batch(benchmark::State& state) {
  SynthConfig sc;
  const auto corpus = gen_synthetic_corpus(sc);
  const auto g = prepare_graph(corpus.documents, corpus.relations,
                               enumerate_metapaths(MetaSchema::default_schema(), 2));
  const auto x = fit_features(corpus.documents, kDefaultFeatureDim, 0);
  TrainConfig tc;
  const auto model = init_model(x.cols(), g.catalog, tc);
  std::vector<PairSample> pairs;
  for (std::uint32_t i = 0; i < 64; ++i) pairs.push_back({i, (i * 7 + 3) % 100, i % 2 == 0});
  for (auto _ : state) {
    auto r = batch_loss_and_gradients(model, g.dice, x, pairs);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_spgemm<false>)->Name("spgemm/serial")->Arg(2000)->Arg(8000);
BENCHMARK(BM_spgemm<true>)->Name("spgemm/omp")->Arg(2000)->Arg(8000);
BENCHMARK(BM_spmm<false>)->Name("spmm/serial")->Arg(2000)->Arg(8000);
BENCHMARK(BM_spmm<true>)->Name("spmm/omp")->Arg(2000)->Arg(8000);
BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(1000)->Arg(4000);
BENCHMARK(BM_gemm<true>)->Name("gemm/omp")->Arg(1000)->Arg(4000);
BENCHMARK(BM_sddmm<false>)->Name("sddmm/serial")->Arg(2000)->Arg(8000);
BENCHMARK(BM_sddmm<true>)->Name("sddmm/omp")->Arg(2000)->Arg(8000);
BENCHMARK(BM_sparse_weighted_sum<false>)->Name("sparse_weighted_sum/serial")->Arg(2000);
BENCHMARK(BM_sparse_weighted_sum<true>)->Name("sparse_weighted_sum/omp")->Arg(2000);
BENCHMARK(BM_training_batch)->Name("training_batch/default_corpus")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
