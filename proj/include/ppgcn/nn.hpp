#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/dense.hpp"
#include "ppgcn/sparse.hpp"

namespace ppgcn {

enum class Activation { Relu, Identity, Sigmoid };

const char* to_string(Activation a) noexcept;
Activation activation_from_string(const std::string& s);

// Â = D̃^-1/2 (A + I) D̃^-1/2 with D̃_ii = 1 + Σ_j A_ij. Rejects asymmetric
// or negative input. The result always stores its diagonal.
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

// D̃ of the above, i.e. 1 + row sums of A.
std::vector<double> augmented_degrees(const SparseMatrix& adjacency);

struct GcnParams {
  std::vector<DenseMatrix> weights;     // W(0): d×h ... W(L-1): h×F
  std::vector<Activation> activations;  // one per layer

  // Glorot-uniform weights, ReLU hidden layers and an identity output layer.
  static GcnParams glorot(std::span<const std::size_t> dims, std::uint64_t seed,
                          Activation hidden = Activation::Relu);
  void validate() const;
  std::size_t input_dim() const { return weights.front().rows(); }
  std::size_t output_dim() const { return weights.back().cols(); }

  friend bool operator==(const GcnParams&, const GcnParams&) = default;
};

// Per-layer intermediates of one forward pass. Holds its own copy of Â and
// of the weights it ran with; valid for exactly one backward pass.
//
// A layer that narrows (W has more rows than columns) is evaluated as
// Â·(H·W) instead of (Â·H)·W so the sparse product runs at the smaller
// width; `weight_first` records which order each layer used.
struct ForwardCache {
  SparseMatrix a_hat;
  GcnParams params;
  std::vector<DenseMatrix> inputs;       // H(l)
  std::vector<DenseMatrix> propagated;   // Â·H(l), or H(l)·W(l) when weight_first
  std::vector<char> weight_first;
  std::vector<DenseMatrix> pre_activation;
  std::vector<DenseMatrix> outputs;      // H(l+1)
  bool consumed = false;
};

struct ForwardResult {
  DenseMatrix z;
  ForwardCache cache;
};

// H(l+1) = σ((Â·H(l))·W(l)) for every layer, H(0) = X.
ForwardResult gcn_forward(SparseMatrix a_hat, const DenseMatrix& x, const GcnParams& params);

struct GcnGradients {
  std::vector<DenseMatrix> weights;
  DenseMatrix input;                  // dL/dX
  std::vector<double> adjacency;      // dL/dÂ on Â's stored pattern
};

// Exact reverse-mode gradients. Marks the cache consumed; a second call
// with the same cache throws StaleCache. With `input_gradient` false the
// dL/dX product is skipped and `input` is left empty.
GcnGradients gcn_backward(ForwardCache& cache, const DenseMatrix& dz, bool input_gradient = true);

// p -= lr·g. lr must be finite and >= 0.
void sgd_step(GcnParams& params, std::span<const DenseMatrix> gradients, double lr);
void sgd_step(std::span<double> params, std::span<const double> gradients, double lr);

// Versioned JSON with layer shapes, activation tags and row-major payloads.
std::string gcn_to_json(const GcnParams& params);
GcnParams gcn_from_json(const std::string& text);

}  // namespace ppgcn
