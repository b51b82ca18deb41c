#include "ppgcn/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "json_io.hpp"
#include "ppgcn/error.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

namespace {

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log σ(s) for y = 1, -log(1 - σ(s)) for y = 0.
double bce_with_logit(double s, bool positive) noexcept {
  return positive ? softplus(-s) : softplus(s);
}

constexpr double kDegenerateLoss = 27.631021115928547;  // -ln(1e-12)

// Adds dL/dvi and dL/dvj for one pair with weight `scale`; returns the loss.
double pair_loss(Head head, double c, std::span<const double> vi, std::span<const double> vj,
                 bool positive, double scale, std::span<double> gi, std::span<double> gj,
                 bool& degenerate) {
  const HeadScore s = head == Head::Popularity ? popularity_score(vi, vj, c) : angle_score(vi, vj);
  degenerate = s.degenerate;
  if (s.degenerate) return positive ? kDegenerateLoss : 0.0;
  const double loss = bce_with_logit(s.logit, positive);
  const double dlogit = scale * (sigmoid(s.logit) - (positive ? 1.0 : 0.0));
  const double ni = l2_norm(vi);
  const double nj = l2_norm(vj);
  if (head == Head::Popularity) {
    // x = n_big / n_small, f = -log10(x - 1 + c)
    const bool i_big = ni >= nj;
    const double n_big = i_big ? ni : nj;
    const double n_small = i_big ? nj : ni;
    const double dx = dlogit * (-1.0 / ((s.x - 1.0 + c) * std::log(10.0)));
    const double d_big = dx / n_small;
    const double d_small = -dx * n_big / (n_small * n_small);
    const double di = i_big ? d_big : d_small;
    const double dj = i_big ? d_small : d_big;
    for (std::size_t k = 0; k < vi.size(); ++k) {
      gi[k] += di * vi[k] / ni;
      gj[k] += dj * vj[k] / nj;
    }
  } else {
    const double dcos = dlogit * kAngleSharpness;
    const double cos = s.x;
    for (std::size_t k = 0; k < vi.size(); ++k) {
      gi[k] += dcos * (vj[k] / (ni * nj) - cos * vi[k] / (ni * ni));
      gj[k] += dcos * (vi[k] / (ni * nj) - cos * vj[k] / (nj * nj));
    }
  }
  return loss;
}

std::vector<SparseMatrix> restrict_to(std::span<const SparseMatrix> dice,
                                      const std::vector<char>& keep) {
  std::vector<SparseMatrix> out;
  for (const auto& s : dice) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < s.rows(); ++i) {
      if (!keep[i]) continue;
      const auto cols = s.row_cols(i);
      const auto vals = s.row_values(i);
      for (std::size_t p = 0; p < cols.size(); ++p) {
        if (keep[cols[p]]) t.push_back({static_cast<std::uint32_t>(i), cols[p], vals[p]});
      }
    }
    out.push_back(SparseMatrix::from_triplets(s.rows(), s.cols(), std::move(t)));
  }
  return out;
}

}  // namespace

const char* to_string(Head h) noexcept { return h == Head::Popularity ? "popularity" : "angle"; }

Head head_from_string(const std::string& s) {
  if (s == "popularity") return Head::Popularity;
  if (s == "angle") return Head::Angle;
  fail(ErrorCode::InvalidArgument, "unknown head '" + s + "' (popularity|angle)");
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double inverse_softplus(double y) noexcept {
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

HeadScore popularity_score(std::span<const double> vi, std::span<const double> vj, double c) {
  HeadScore s;
  const double ni = l2_norm(vi);
  const double nj = l2_norm(vj);
  const double lo = std::min(ni, nj);
  const double hi = std::max(ni, nj);
  if (lo == 0.0) {
    s.degenerate = true;
    s.x = hi == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    s.logit = -std::numeric_limits<double>::infinity();
    s.p = 0.0;
    return s;
  }
  s.x = hi / lo;
  s.logit = -std::log10(s.x - 1.0 + c);
  s.p = sigmoid(s.logit);
  return s;
}

HeadScore angle_score(std::span<const double> vi, std::span<const double> vj) {
  HeadScore s;
  const double ni = l2_norm(vi);
  const double nj = l2_norm(vj);
  if (ni == 0.0 || nj == 0.0) {
    s.degenerate = true;
    s.logit = -std::numeric_limits<double>::infinity();
    return s;
  }
  s.x = dot(vi, vj) / (ni * nj);
  s.logit = kAngleSharpness * (s.x - kAngleThreshold);
  s.p = sigmoid(s.logit);
  return s;
}

void TrainConfig::validate() const {
  if (anchors < 1 || batch_size < 1 || batches_per_epoch < 1) {
    fail(ErrorCode::InvalidArgument, "R, B and E must all be >= 1");
  }
  if (!(c > 0.0 && c < 1.0)) fail(ErrorCode::InvalidArgument, "head coefficient c must be in (0, 1)");
  if (!std::isfinite(lr) || lr < 0.0) fail(ErrorCode::InvalidArgument, "lr must be finite and >= 0");
  if (hidden_dim < 1 || output_dim < 1) fail(ErrorCode::InvalidArgument, "layer widths must be >= 1");
}

EpochPlan sample_epoch_pairs(std::span<const int> labels, const TrainConfig& config,
                             std::mt19937_64& rng) {
  config.validate();
  std::vector<std::uint32_t> labeled;
  std::map<int, std::vector<std::uint32_t>> members;
  for (std::uint32_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    labeled.push_back(i);
    members[labels[i]].push_back(i);
  }
  if (members.size() < 2) fail(ErrorCode::InvalidArgument, "pair sampling needs >= 2 classes");
  if (std::none_of(members.begin(), members.end(), [](const auto& kv) { return kv.second.size() >= 2; })) {
    fail(ErrorCode::InvalidArgument, "no class has two labeled instances: no positive partner exists");
  }
  EpochPlan plan;
  plan.pool.reserve(2 * config.anchors);
  for (std::size_t r = 0; r < config.anchors; ++r) {
    std::uint32_t anchor = 0;
    do {
      anchor = labeled[uniform_index(rng, labeled.size())];
    } while (members[labels[anchor]].size() < 2);
    const auto& same = members[labels[anchor]];
    std::uint32_t partner = anchor;
    while (partner == anchor) partner = same[uniform_index(rng, same.size())];
    std::uint32_t other = anchor;
    while (labels[other] == labels[anchor]) other = labeled[uniform_index(rng, labeled.size())];
    plan.pool.push_back({anchor, partner, true});
    plan.pool.push_back({anchor, other, false});
  }
  plan.batches.resize(config.batches_per_epoch);
  for (auto& batch : plan.batches) {
    batch.resize(config.batch_size);
    for (auto& b : batch) b = static_cast<std::uint32_t>(uniform_index(rng, plan.pool.size()));
  }
  return plan;
}

std::vector<double> Model::omega() const {
  std::vector<double> w(omega_raw.size());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = softplus(omega_raw[m]);
  return w;
}

Model init_model(std::size_t feature_dim, const MetaPathCatalog& catalog, const TrainConfig& config) {
  config.validate();
  if (catalog.empty()) fail(ErrorCode::InvalidArgument, "empty meta-path catalog");
  Model m;
  const std::size_t dims[] = {feature_dim, config.hidden_dim, config.output_dim};
  m.gcn = GcnParams::glorot(dims, config.seed, config.hidden_activation);
  m.omega_raw.assign(catalog.size(), inverse_softplus(1.0 / static_cast<double>(catalog.size())));
  m.signatures = catalog.signatures();
  m.config = config;
  return m;
}

BatchResult batch_loss_and_gradients(const Model& model, std::span<const SparseMatrix> dice,
                                     const FeatureMatrix& x, std::span<const PairSample> pairs) {
  if (dice.size() != model.omega_raw.size()) {
    fail(ErrorCode::ShapeMismatch, "model has " + std::to_string(model.omega_raw.size()) +
                                       " meta-path weights but " + std::to_string(dice.size()) +
                                       " similarity matrices were given");
  }
  if (pairs.empty()) fail(ErrorCode::InvalidArgument, "empty batch");
  const auto omega = model.omega();
  const SparseMatrix adjacency = build_event_adjacency(dice, omega);
  const auto degree = augmented_degrees(adjacency);
  SparseMatrix a_hat = normalize_adjacency(adjacency);
  auto fwd = gcn_forward(a_hat, x, model.gcn);
  const DenseMatrix& z = fwd.z;

  BatchResult out;
  DenseMatrix dz(z.rows(), z.cols());
  const double scale = 1.0 / static_cast<double>(pairs.size());
  const double c = model.config.c;
  for (const auto& pr : pairs) {
    if (pr.i >= z.rows() || pr.j >= z.rows()) fail(ErrorCode::InvalidArgument, "pair index out of range");
    bool degenerate = false;
    out.loss += scale * pair_loss(model.config.head, c, z.row(pr.i), z.row(pr.j), pr.positive,
                                  scale, dz.row(pr.i), dz.row(pr.j), degenerate);
    if (degenerate) ++out.degenerate_pairs;
  }

  auto grads = gcn_backward(fwd.cache, dz, false);
  out.weight_grads = std::move(grads.weights);

  // dL/dA on Â's pattern. With the stop-gradient D̃ only the direct path
  // Â_ij = Ã_ij / sqrt(d_i d_j) is kept; exact mode adds the degree terms.
  const auto& d_ahat = grads.adjacency;
  const std::size_t n = a_hat.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  std::vector<double> d_degree(n, 0.0);
  if (model.config.exact_normalization) {
    std::vector<double> acc(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cols = a_hat.row_cols(i);
      const auto vals = a_hat.row_values(i);
      const std::size_t base = a_hat.row_ptr()[i];
      for (std::size_t p = 0; p < cols.size(); ++p) {
        const double t = d_ahat[base + p] * vals[p];
        acc[i] += t;
        acc[cols[p]] += t;
      }
    }
    for (std::size_t i = 0; i < n; ++i) d_degree[i] = -acc[i] / (2.0 * degree[i]);
  }
  // Row by row: scatter dL/dA_ij for the row into a dense buffer, then read
  // it back along every Dice matrix's row.
  out.omega_raw_grad.assign(dice.size(), 0.0);
  std::vector<double> d_a(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = a_hat.row_cols(i);
    const std::size_t base = a_hat.row_ptr()[i];
    for (std::size_t p = 0; p < cols.size(); ++p) {
      d_a[cols[p]] = d_ahat[base + p] * inv_sqrt[i] * inv_sqrt[cols[p]] + d_degree[i];
    }
    for (std::size_t m = 0; m < dice.size(); ++m) {
      const auto dcols = dice[m].row_cols(i);
      const auto dvals = dice[m].row_values(i);
      double g = 0.0;
      for (std::size_t p = 0; p < dcols.size(); ++p) {
        if (dcols[p] != i) g += d_a[dcols[p]] * dvals[p];
      }
      out.omega_raw_grad[m] += g;
    }
    for (const auto j : cols) d_a[j] = 0.0;
  }
  for (std::size_t m = 0; m < dice.size(); ++m) out.omega_raw_grad[m] *= sigmoid(model.omega_raw[m]);
  return out;
}

DenseMatrix infer_embeddings(const Model& model, std::span<const SparseMatrix> dice,
                             const FeatureMatrix& x) {
  if (dice.size() != model.omega_raw.size()) {
    fail(ErrorCode::ShapeMismatch, "similarity matrices do not match the model's catalog");
  }
  const auto adjacency = build_event_adjacency(dice, model.omega());
  return gcn_forward(normalize_adjacency(adjacency), x, model.gcn).z;
}

Prediction predict_class(std::size_t t, const DenseMatrix& z,
                         std::span<const std::uint32_t> gallery,
                         std::span<const std::string> labels, Head head, double c) {
  if (t >= z.rows()) fail(ErrorCode::InvalidArgument, "event index out of range");
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto g : gallery) {
    if (g == t) continue;
    if (g >= z.rows() || g >= labels.size()) fail(ErrorCode::InvalidArgument, "gallery index out of range");
    const auto s = head == Head::Popularity ? popularity_score(z.row(t), z.row(g), c)
                                            : angle_score(z.row(t), z.row(g));
    auto& [sum, count] = sums[labels[g]];
    sum += s.p;
    ++count;
  }
  if (sums.empty()) fail(ErrorCode::InvalidArgument, "empty gallery");
  Prediction pred;
  double best = -1.0;
  for (const auto& [label, sc] : sums) {
    const double p = sc.first / static_cast<double>(sc.second);
    pred.class_probability[label] = p;
    if (p > best) {
      best = p;
      pred.label = label;
    }
  }
  if (best < 0.5) pred.label = kNewClass;
  return pred;
}

double accuracy_on(const Model& model, const DenseMatrix& z, const DatasetSplit& split,
                   std::span<const std::uint32_t> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto t : nodes) {
    const auto p = predict_class(t, z, split.train, split.labels, model.config.head, model.config.c);
    if (p.label != kNewClass && p.label == split.labels[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

TrainResult train(std::span<const SparseMatrix> dice, const FeatureMatrix& x,
                  const DatasetSplit& split, const MetaPathCatalog& catalog,
                  const TrainConfig& config) {
  config.validate();
  if (dice.size() != catalog.size()) {
    fail(ErrorCode::ShapeMismatch, "one similarity matrix per catalog path required");
  }
  const std::size_t n = x.rows();
  for (const auto& s : dice) {
    if (s.rows() != n || s.cols() != n) fail(ErrorCode::ShapeMismatch, "similarity matrix is not N x N");
  }
  if (split.labels.size() != n) fail(ErrorCode::ShapeMismatch, "one label slot per event required");

  std::set<std::string> names;
  for (const auto t : split.train) {
    if (t >= n || split.labels[t].empty()) fail(ErrorCode::InvalidArgument, "training node without label");
    names.insert(split.labels[t]);
  }
  const std::vector<std::string> class_names(names.begin(), names.end());
  std::vector<int> labels(n, -1);
  for (const auto t : split.train) {
    labels[t] = static_cast<int>(std::lower_bound(class_names.begin(), class_names.end(),
                                                  split.labels[t]) - class_names.begin());
  }

  std::vector<SparseMatrix> masked;
  std::span<const SparseMatrix> train_dice = dice;
  if (!config.transductive) {
    std::vector<char> keep(n, 0);
    for (const auto t : split.train) keep[t] = 1;
    masked = restrict_to(dice, keep);
    train_dice = masked;
  }

  TrainResult result;
  result.model = init_model(x.cols(), catalog, config);
  Model& model = result.model;
  Model best = model;
  double best_accuracy = -1.0;
  auto rng = make_rng(config.seed, "sampler");
  std::vector<PairSample> batch(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const EpochPlan plan = sample_epoch_pairs(labels, config, rng);
    double loss = 0.0;
    for (const auto& indices : plan.batches) {
      for (std::size_t b = 0; b < indices.size(); ++b) batch[b] = plan.pool[indices[b]];
      const BatchResult br = batch_loss_and_gradients(model, train_dice, x, batch);
      sgd_step(model.gcn, br.weight_grads, config.lr);
      sgd_step(model.omega_raw, br.omega_raw_grad, config.lr);
      loss += br.loss;
    }
    loss /= static_cast<double>(plan.batches.size());
    double dev_accuracy = 0.0;
    if (!split.dev.empty()) {
      dev_accuracy = accuracy_on(model, infer_embeddings(model, dice, x), split, split.dev);
    }
    result.trace.push_back({epoch, loss, dev_accuracy, config.head});
    if (dev_accuracy > best_accuracy) {
      best_accuracy = dev_accuracy;
      result.best_epoch = epoch;
      if (config.restore_best) best = model;
    }
    if (config.patience > 0 && !split.dev.empty() && epoch - result.best_epoch >= config.patience) break;
  }
  if (config.restore_best && !split.dev.empty() && result.best_epoch > 0) model = best;
  return result;
}

KiesWeights export_weights(const Model& model) {
  KiesWeights w;
  w.signatures = model.signatures;
  w.values = model.omega();
  return w.normalized_copy();
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "epoch,loss,dev_accuracy,head\n";
  char buf[64];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << r.epoch << ',' << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.dev_accuracy);
    out << buf << ',' << to_string(r.head) << '\n';
  }
}

std::string model_to_json(const Model& model) {
  using detail::ojson;
  const auto& c = model.config;
  ojson config = {{"anchors", c.anchors},
                  {"batch_size", c.batch_size},
                  {"batches_per_epoch", c.batches_per_epoch},
                  {"epochs", c.epochs},
                  {"lr", c.lr},
                  {"c", c.c},
                  {"head", to_string(c.head)},
                  {"seed", c.seed},
                  {"patience", c.patience},
                  {"restore_best", c.restore_best},
                  {"exact_normalization", c.exact_normalization},
                  {"transductive", c.transductive},
                  {"hidden_dim", c.hidden_dim},
                  {"output_dim", c.output_dim},
                  {"hidden_activation", to_string(c.hidden_activation)}};
  ojson j = {{"format", "ppgcn.model"},
             {"version", 1},
             {"config", config},
             {"catalog", model.signatures},
             {"omega_raw", model.omega_raw},
             {"gcn", detail::gcn_json(model.gcn)}};
  return j.dump();
}

Model model_from_json(const std::string& text) {
  using detail::ojson;
  Model m;
  try {
    const ojson j = ojson::parse(text);
    if (j.at("format") != "ppgcn.model" || j.at("version") != 1) {
      fail(ErrorCode::Parse, "not a version-1 ppgcn.model checkpoint");
    }
    const auto& c = j.at("config");
    auto& k = m.config;
    k.anchors = c.at("anchors").get<std::size_t>();
    k.batch_size = c.at("batch_size").get<std::size_t>();
    k.batches_per_epoch = c.at("batches_per_epoch").get<std::size_t>();
    k.epochs = c.at("epochs").get<std::size_t>();
    k.lr = c.at("lr").get<double>();
    k.c = c.at("c").get<double>();
    k.head = head_from_string(c.at("head").get<std::string>());
    k.seed = c.at("seed").get<std::uint64_t>();
    k.patience = c.at("patience").get<std::size_t>();
    k.restore_best = c.at("restore_best").get<bool>();
    k.exact_normalization = c.at("exact_normalization").get<bool>();
    k.transductive = c.at("transductive").get<bool>();
    k.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    k.output_dim = c.at("output_dim").get<std::size_t>();
    k.hidden_activation = activation_from_string(c.at("hidden_activation").get<std::string>());
    m.signatures = j.at("catalog").get<std::vector<std::string>>();
    m.omega_raw = j.at("omega_raw").get<std::vector<double>>();
    m.gcn = detail::gcn_from_json_value(j.at("gcn"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("model checkpoint: ") + e.what());
  }
  if (m.signatures.size() != m.omega_raw.size()) {
    fail(ErrorCode::Parse, "model checkpoint: catalog and omega_raw lengths differ");
  }
  m.config.validate();
  return m;
}

}  // namespace ppgcn
