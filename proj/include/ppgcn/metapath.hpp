#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/hin.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn {

struct PathStep {
  std::size_t relation;
  bool inverse = false;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// Typed path template A1 -R1-> A2 ... -RL-> A(L+1). Signatures alternate
// type and relation names joined by '-', with `^-1` marking a step taken
// against the relation's direction, e.g.
// "EventInstance-contains-Keyword-contains^-1-EventInstance".
class MetaPath {
 public:
  static MetaPath from_steps(const MetaSchema& schema, const NodeType& start,
                             std::vector<PathStep> steps);
  static MetaPath parse(const MetaSchema& schema, const std::string& signature);

  const std::vector<NodeType>& node_types() const noexcept { return node_types_; }
  const std::vector<PathStep>& steps() const noexcept { return steps_; }
  const std::string& signature() const noexcept { return signature_; }
  std::size_t hops() const noexcept { return steps_.size(); }

  // True iff the step sequence equals its own reversed inverse.
  bool palindromic() const noexcept { return palindromic_; }

 private:
  std::vector<NodeType> node_types_;
  std::vector<PathStep> steps_;
  std::string signature_;
  bool palindromic_ = false;
};

class MetaPathCatalog {
 public:
  MetaPathCatalog() = default;
  explicit MetaPathCatalog(std::vector<MetaPath> paths);

  void add(MetaPath path);
  std::size_t size() const noexcept { return paths_.size(); }
  bool empty() const noexcept { return paths_.empty(); }
  const MetaPath& operator[](std::size_t m) const { return paths_[m]; }
  const std::vector<MetaPath>& paths() const noexcept { return paths_; }
  std::vector<std::string> signatures() const;

 private:
  std::vector<MetaPath> paths_;
};

// Every event-to-event path Q∘Q^-1 where Q starts at EventInstance, has
// 1..max_hops steps and never revisits EventInstance. Sorted by signature.
MetaPathCatalog enumerate_metapaths(const MetaSchema& schema, std::size_t max_hops);

// One signature per line; blank lines and `#` comments ignored.
MetaPathCatalog read_catalog(std::istream& in, const MetaSchema& schema);
void write_catalog(std::ostream& out, const MetaPathCatalog& catalog);

// Meta-path instance counts M_P as the left-to-right chain product of typed
// adjacency matrices. Products of shared path prefixes are cached, so one
// calculator over a catalog does each distinct prefix product once. Not
// thread-safe; parallelism lives inside the kernels.
class CoupCalculator {
 public:
  explicit CoupCalculator(const Hin& hin) : hin_(&hin) {}

  SparseMatrix compute(const MetaPath& path);
  std::vector<SparseMatrix> compute_all(const MetaPathCatalog& catalog);

 private:
  const SparseMatrix& step_matrix(const PathStep& step);

  const Hin* hin_;
  std::map<std::vector<std::pair<std::size_t, bool>>, SparseMatrix> steps_;
  std::map<std::vector<std::pair<std::size_t, bool>>, SparseMatrix> prefixes_;
};

SparseMatrix coup_matrix(const Hin& hin, const MetaPath& path);

// S[i,j] = 2 M[i,j] / (M[i,i] + M[j,j]) on M's support; 0/0 gives 0.
SparseMatrix dice_matrix(const SparseMatrix& counts);

struct KiesWeights {
  std::vector<std::string> signatures;
  std::vector<double> values;
  bool normalized = false;

  static KiesWeights uniform(const MetaPathCatalog& catalog);
  // Validates length, non-negativity and, when flagged, sum 1 ± 1e-9.
  void validate() const;
  KiesWeights normalized_copy() const;
};

// Σ_m ω_m S_m[i,j], summed over m ascending.
double kies(std::size_t i, std::size_t j, std::span<const SparseMatrix> dice,
            const KiesWeights& weights);

// Symmetric A with A[i,j] = KIES(i,j) off the diagonal and zero diagonal.
SparseMatrix build_event_adjacency(std::span<const SparseMatrix> dice,
                                   std::span<const double> weights);
SparseMatrix build_event_adjacency(std::span<const SparseMatrix> dice,
                                   const KiesWeights& weights);

// JSON map signature -> weight with a `normalized` flag.
// `meta_json`, when non-empty, is embedded verbatim as a `meta` object.
std::string weights_to_json(const KiesWeights& weights, const std::string& meta_json = "");
KiesWeights weights_from_json(const std::string& text);

// Reorders weights into catalog order. Throws SignatureMismatch naming the
// first catalog signature absent from the weights, or the first extra one.
KiesWeights align_weights(const KiesWeights& weights, const MetaPathCatalog& catalog);

}  // namespace ppgcn
