#pragma once

// Pairwise popularity GCN: pair sampling, the modulus-ratio and angle heads,
// joint training of layer weights and meta-path weights, and transductive
// class prediction.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/embed.hpp"
#include "ppgcn/metapath.hpp"
#include "ppgcn/nn.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn {

enum class Head { Popularity, Angle };

const char* to_string(Head h) noexcept;
Head head_from_string(const std::string& s);

inline constexpr double kAngleSharpness = 10.0;
inline constexpr double kAngleThreshold = 0.5;

// Prediction label for an instance no known class claims.
inline const std::string kNewClass = "__NEW_CLASS__";

struct HeadScore {
  double x = 0.0;      // modulus ratio (popularity) or cosine (angle)
  double logit = 0.0;  // f(x) for popularity, κ(cos - τ) for angle
  double p = 0.0;
  bool degenerate = false;  // a zero vector; p forced to 0
  bool positive() const { return p >= 0.5; }
};

// x = max(|vi|,|vj|) / min(|vi|,|vj|), f = -log10(x - 1 + c), p = σ(f).
HeadScore popularity_score(std::span<const double> vi, std::span<const double> vj, double c);
// p = σ(κ·(cos(vi, vj) - τ)) with κ = 10, τ = 0.5.
HeadScore angle_score(std::span<const double> vi, std::span<const double> vj);

struct PairSample {
  std::uint32_t i;
  std::uint32_t j;
  bool positive;
  friend bool operator==(const PairSample&, const PairSample&) = default;
};

struct TrainConfig {
  std::size_t anchors = 1000;          // R
  std::size_t batch_size = 64;         // B
  std::size_t batches_per_epoch = 32;  // E
  std::size_t epochs = 7000;
  double lr = 0.01;
  double c = 0.01;
  Head head = Head::Popularity;
  std::uint64_t seed = 0;
  std::size_t patience = 200;  // epochs without dev improvement; 0 disables
  bool restore_best = true;    // return the parameters of the best dev epoch
  bool exact_normalization = false;  // differentiate through D̃ as well
  bool transductive = true;          // non-train events stay in the graph
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 32;
  Activation hidden_activation = Activation::Relu;

  void validate() const;
};

struct EpochPlan {
  std::vector<PairSample> pool;                   // R positive then R negative
  std::vector<std::vector<std::uint32_t>> batches;  // E batches of B pool indices
};

// labels[i] >= 0 marks a training instance of that class; -1 is excluded.
// Anchors from singleton classes are redrawn.
EpochPlan sample_epoch_pairs(std::span<const int> labels, const TrainConfig& config,
                             std::mt19937_64& rng);

struct Model {
  GcnParams gcn;
  std::vector<double> omega_raw;  // ω_m = softplus(omega_raw_m)
  std::vector<std::string> signatures;
  TrainConfig config;

  std::vector<double> omega() const;
};

double softplus(double x) noexcept;
double inverse_softplus(double y) noexcept;

// Fresh model: Glorot layers d -> hidden -> output and ω_m = 1/M'.
Model init_model(std::size_t feature_dim, const MetaPathCatalog& catalog, const TrainConfig& config);

struct BatchResult {
  double loss = 0.0;
  std::vector<DenseMatrix> weight_grads;
  std::vector<double> omega_raw_grad;
  std::size_t degenerate_pairs = 0;
};

// Mean binary cross-entropy of the configured head over `pairs` and its
// gradient with respect to all layer weights and omega_raw.
BatchResult batch_loss_and_gradients(const Model& model, std::span<const SparseMatrix> dice,
                                     const FeatureMatrix& x, std::span<const PairSample> pairs);

// Output representations Z over the full graph.
DenseMatrix infer_embeddings(const Model& model, std::span<const SparseMatrix> dice,
                             const FeatureMatrix& x);

struct Prediction {
  std::string label;  // kNewClass when no class reaches 0.5
  std::map<std::string, double> class_probability;
};

// Per-class probability is the mean head score between t and that class's
// gallery members (t itself skipped). Ties go to the smallest label.
Prediction predict_class(std::size_t t, const DenseMatrix& z,
                         std::span<const std::uint32_t> gallery,
                         std::span<const std::string> labels, Head head, double c);

// Event labels plus train/dev/test node lists.
struct DatasetSplit {
  std::vector<std::string> labels;  // per event; empty string = unlabeled
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> dev;
  std::vector<std::uint32_t> test;
};

struct TraceRow {
  std::size_t epoch;
  double loss;
  double dev_accuracy;
  Head head;
};

struct TrainResult {
  Model model;
  std::vector<TraceRow> trace;
  std::size_t best_epoch = 0;
};

double accuracy_on(const Model& model, const DenseMatrix& z, const DatasetSplit& split,
                   std::span<const std::uint32_t> nodes);

TrainResult train(std::span<const SparseMatrix> dice, const FeatureMatrix& x,
                  const DatasetSplit& split, const MetaPathCatalog& catalog,
                  const TrainConfig& config);

// Simplex-normalized softplus(omega_raw), keyed by catalog signature.
KiesWeights export_weights(const Model& model);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

// Versioned JSON: gcn checkpoint + omega_raw + catalog signatures + config.
std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

}  // namespace ppgcn
