#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/hin.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn {

// N×d event features; row i belongs to event node i (corpus order).
using FeatureMatrix = DenseMatrix;

inline constexpr std::size_t kDefaultFeatureDim = 128;

// Lower-cased text tokens plus typed element tokens "kw:", "ent:", "top:".
std::vector<std::string> document_tokens(const EventDocument& doc);

struct TfidfModel {
  std::vector<std::string> vocabulary;  // sorted
  std::vector<double> idf;              // ln((1+N)/(1+df)) + 1
  SparseMatrix weights;                 // N × |vocabulary|, raw tf times idf
};

TfidfModel fit_tfidf(std::span<const EventDocument> corpus);

// TF-IDF rows projected to d dimensions by a seeded Gaussian matrix and
// L2-normalized. Token-less documents give zero rows.
FeatureMatrix fit_features(std::span<const EventDocument> corpus, std::size_t d,
                           std::uint64_t seed);

// Text lines `id v1 ... vd`. Rows come back in `expected_ids` order.
FeatureMatrix load_embeddings(std::istream& in, std::span<const std::string> expected_ids);

}  // namespace ppgcn
