#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/metapath.hpp"

namespace ppgcn {

// D[i,j] = 1 - KIES(i,j) with zero diagonal. Weights must be normalized.
DenseMatrix kies_distance_matrix(std::span<const SparseMatrix> dice, const KiesWeights& weights);

struct Clustering {
  std::vector<std::uint32_t> assignment;  // event -> cluster id in [0, k)
  std::size_t k = 0;
  std::vector<std::uint32_t> medoids;     // medoids[c] is the medoid of cluster c
  double cost = 0.0;                      // Σ distance to own medoid
  std::vector<double> cost_trace;         // cost after each assignment step
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKmedoidsMaxIterations = 100;
inline constexpr std::size_t kKmedoidsRestarts = 10;

// k-medoids++ seeding then alternating assignment / medoid update until
// stable or 100 iterations. Ties break toward the lowest index; clusters
// are numbered by ascending medoid index. Each restart reseeds from the
// same stream; the lowest-cost run wins, the earliest on ties.
Clustering kmedoids(const DenseMatrix& distances, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = kKmedoidsRestarts);

enum class NmiNormalization { Geometric, Arithmetic };

// I(A;B) normalized by sqrt(H(A)H(B)) (or their mean), natural logs.
double nmi(std::span<const std::string> a, std::span<const std::string> b,
           NmiNormalization norm = NmiNormalization::Geometric);
double nmi(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
           NmiNormalization norm = NmiNormalization::Geometric);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> nmi;
  std::map<std::string, ClassMetrics> per_class;  // gold classes
};

// kNewClass predictions never match a gold label.
MetricsReport detection_metrics(std::span<const std::string> predictions,
                                std::span<const std::string> golds);

std::string metrics_to_json(const MetricsReport& report, const std::string& meta_json = "");

}  // namespace ppgcn
