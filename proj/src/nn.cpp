#include "ppgcn/nn.hpp"

#include <cmath>

#include "json_io.hpp"
#include "ppgcn/error.hpp"
#include "ppgcn/kernels.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  fail(ErrorCode::InvalidArgument, "unknown activation '" + s + "'");
}

std::vector<double> augmented_degrees(const SparseMatrix& adjacency) {
  std::vector<double> d(adjacency.rows(), 1.0);
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (const double v : adjacency.row_values(i)) d[i] += v;
  }
  return d;
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    fail(ErrorCode::ShapeMismatch, "normalize_adjacency needs a square matrix");
  }
  for (const double v : adjacency.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      fail(ErrorCode::InvalidArgument, "adjacency must be finite and non-negative");
    }
  }
  if (!adjacency.is_symmetric(1e-12)) fail(ErrorCode::InvalidArgument, "adjacency must be symmetric");
  const auto deg = augmented_degrees(adjacency);
  std::vector<double> inv_sqrt(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
  const std::size_t n = adjacency.rows();
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(adjacency.nnz() + n);
  vals.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto rc = adjacency.row_cols(i);
    const auto rv = adjacency.row_values(i);
    bool diag_done = false;
    const auto emit_diag = [&] {
      const double a_ii = adjacency.at(i, i) + 1.0;
      cols.push_back(static_cast<std::uint32_t>(i));
      vals.push_back(a_ii * inv_sqrt[i] * inv_sqrt[i]);
      diag_done = true;
    };
    for (std::size_t p = 0; p < rc.size(); ++p) {
      if (!diag_done && rc[p] >= i) emit_diag();
      if (rc[p] == i) continue;
      cols.push_back(rc[p]);
      vals.push_back(rv[p] * inv_sqrt[i] * inv_sqrt[rc[p]]);
    }
    if (!diag_done) emit_diag();
    row_ptr[i + 1] = cols.size();
  }
  return SparseMatrix(n, n, std::move(row_ptr), std::move(cols), std::move(vals));
}

GcnParams GcnParams::glorot(std::span<const std::size_t> dims, std::uint64_t seed,
                            Activation hidden) {
  if (dims.size() < 2) fail(ErrorCode::InvalidArgument, "GCN needs at least input and output dims");
  auto rng = make_rng(seed, "init");
  GcnParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) fail(ErrorCode::InvalidArgument, "zero layer width");
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseMatrix w(dims[l], dims[l + 1]);
    for (auto& v : w.values()) v = u(rng);
    p.weights.push_back(std::move(w));
    p.activations.push_back(l + 2 == dims.size() ? Activation::Identity : hidden);
  }
  return p;
}

void GcnParams::validate() const {
  if (weights.empty()) fail(ErrorCode::InvalidArgument, "GCN has no layers");
  if (weights.size() != activations.size()) {
    fail(ErrorCode::ShapeMismatch, "one activation per layer required");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() == 0 || weights[l].cols() == 0) {
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0 && weights[l - 1].cols() != weights[l].rows()) {
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " input " +
                                         std::to_string(weights[l].rows()) + " != previous output " +
                                         std::to_string(weights[l - 1].cols()));
    }
  }
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseMatrix activate(const DenseMatrix& q, Activation a) {
  DenseMatrix h = q;
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu:
      for (auto& v : h.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (auto& v : h.values()) v = sigmoid(v);
      break;
  }
  return h;
}

void activation_backward(DenseMatrix& grad, const DenseMatrix& q, const DenseMatrix& h,
                         Activation a) {
  auto g = grad.values();
  const auto qv = q.values();
  const auto hv = h.values();
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu:
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(qv[k] > 0.0)) g[k] = 0.0;
      }
      break;
    case Activation::Sigmoid:
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= hv[k] * (1.0 - hv[k]);
      break;
  }
}

}  // namespace

ForwardResult gcn_forward(SparseMatrix a_hat, const DenseMatrix& x, const GcnParams& params) {
  params.validate();
  if (a_hat.rows() != a_hat.cols() || a_hat.rows() != x.rows()) {
    fail(ErrorCode::ShapeMismatch, "A_hat " + std::to_string(a_hat.rows()) + "x" +
                                       std::to_string(a_hat.cols()) + " vs X with " +
                                       std::to_string(x.rows()) + " rows");
  }
  if (x.cols() != params.input_dim()) {
    fail(ErrorCode::ShapeMismatch, "X has " + std::to_string(x.cols()) + " columns, W(0) expects " +
                                       std::to_string(params.input_dim()));
  }
  ForwardResult r;
  auto& c = r.cache;
  c.a_hat = std::move(a_hat);
  c.params = params;
  const DenseMatrix* h = &x;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    const bool weight_first = w.cols() < w.rows();
    c.inputs.push_back(*h);
    c.weight_first.push_back(weight_first);
    if (weight_first) {
      c.propagated.push_back(kernels::gemm(*h, w));
      c.pre_activation.push_back(kernels::spmm(c.a_hat, c.propagated.back()));
    } else {
      c.propagated.push_back(kernels::spmm(c.a_hat, *h));
      c.pre_activation.push_back(kernels::gemm(c.propagated.back(), w));
    }
    c.outputs.push_back(activate(c.pre_activation.back(), params.activations[l]));
    if (!c.outputs.back().all_finite()) {
      fail(ErrorCode::NonFinite, "non-finite activation in GCN layer " + std::to_string(l));
    }
    h = &c.outputs.back();
  }
  r.z = c.outputs.back();
  return r;
}

GcnGradients gcn_backward(ForwardCache& cache, const DenseMatrix& dz, bool input_gradient) {
  if (cache.consumed) fail(ErrorCode::StaleCache, "forward cache already used by a backward pass");
  if (cache.outputs.empty()) fail(ErrorCode::StaleCache, "forward cache is empty");
  const auto& z = cache.outputs.back();
  if (dz.rows() != z.rows() || dz.cols() != z.cols()) {
    fail(ErrorCode::ShapeMismatch, "dZ shape differs from Z");
  }
  cache.consumed = true;
  const std::size_t layers = cache.params.weights.size();
  const SparseMatrix a_hat_t = cache.a_hat.transpose();
  GcnGradients g;
  g.weights.resize(layers);
  g.adjacency.assign(cache.a_hat.nnz(), 0.0);
  DenseMatrix upstream = dz;
  for (std::size_t l = layers; l-- > 0;) {
    activation_backward(upstream, cache.pre_activation[l], cache.outputs[l],
                        cache.params.activations[l]);
    const auto& w = cache.params.weights[l];
    const bool need_input = l > 0 || input_gradient;
    if (cache.weight_first[l]) {
      // Q = Â·U with U = H·W
      const auto d_adj = kernels::sddmm(cache.a_hat, upstream, cache.propagated[l]);
      for (std::size_t k = 0; k < d_adj.size(); ++k) g.adjacency[k] += d_adj[k];
      const DenseMatrix d_u = kernels::spmm(a_hat_t, upstream);
      g.weights[l] = kernels::gemm_tn(cache.inputs[l], d_u);
      upstream = need_input ? kernels::gemm_nt(d_u, w) : DenseMatrix();
    } else {
      // Q = P·W with P = Â·H
      g.weights[l] = kernels::gemm_tn(cache.propagated[l], upstream);
      const DenseMatrix d_prop = kernels::gemm_nt(upstream, w);
      const auto d_adj = kernels::sddmm(cache.a_hat, d_prop, cache.inputs[l]);
      for (std::size_t k = 0; k < d_adj.size(); ++k) g.adjacency[k] += d_adj[k];
      upstream = need_input ? kernels::spmm(a_hat_t, d_prop) : DenseMatrix();
    }
  }
  g.input = std::move(upstream);
  return g;
}

void sgd_step(GcnParams& params, std::span<const DenseMatrix> gradients, double lr) {
  if (!std::isfinite(lr) || lr < 0.0) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (gradients.size() != params.weights.size()) {
    fail(ErrorCode::ShapeMismatch, "one gradient per layer required");
  }
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    auto& w = params.weights[l];
    if (gradients[l].rows() != w.rows() || gradients[l].cols() != w.cols()) {
      fail(ErrorCode::ShapeMismatch, "gradient shape differs for layer " + std::to_string(l));
    }
    sgd_step(w.values(), gradients[l].values(), lr);
  }
}

void sgd_step(std::span<double> params, std::span<const double> gradients, double lr) {
  if (!std::isfinite(lr) || lr < 0.0) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (params.size() != gradients.size()) fail(ErrorCode::ShapeMismatch, "gradient length mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * gradients[k];
}

namespace detail {

ojson gcn_json(const GcnParams& params) {
  params.validate();
  ojson layers = ojson::array();
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"activation", to_string(params.activations[l])},
                      {"data", std::vector<double>(w.values().begin(), w.values().end())}});
  }
  return {{"format", "ppgcn.gcn"}, {"version", 1}, {"layers", layers}};
}

GcnParams gcn_from_json_value(const ojson& j) {
  GcnParams p;
  try {
    if (j.at("format") != "ppgcn.gcn" || j.at("version") != 1) {
      fail(ErrorCode::Parse, "not a version-1 ppgcn.gcn checkpoint");
    }
    for (const auto& layer : j.at("layers")) {
      p.weights.emplace_back(layer.at("rows").get<std::size_t>(), layer.at("cols").get<std::size_t>(),
                             layer.at("data").get<std::vector<double>>());
      p.activations.push_back(activation_from_string(layer.at("activation").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("gcn checkpoint: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace detail

std::string gcn_to_json(const GcnParams& params) { return detail::gcn_json(params).dump(); }

GcnParams gcn_from_json(const std::string& text) {
  try {
    return detail::gcn_from_json_value(detail::ojson::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("gcn checkpoint: ") + e.what());
  }
}

}  // namespace ppgcn
