#include "ppgcn/metapath.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "ppgcn/error.hpp"
#include "ppgcn/kernels.hpp"

namespace ppgcn {

namespace {

using json = nlohmann::ordered_json;

const NodeType& step_from(const RelationType& rel, bool inverse) {
  return inverse ? rel.dst : rel.src;
}
const NodeType& step_to(const RelationType& rel, bool inverse) {
  return inverse ? rel.src : rel.dst;
}

PathStep canonical(const MetaSchema& schema, PathStep s) {
  if (schema.relations()[s.relation].self_inverse()) s.inverse = false;
  return s;
}

PathStep reversed(const MetaSchema& schema, PathStep s) {
  return canonical(schema, {s.relation, !s.inverse});
}

using StepKey = std::vector<std::pair<std::size_t, bool>>;

StepKey key_of(std::span<const PathStep> steps) {
  StepKey k;
  k.reserve(steps.size());
  for (const auto& s : steps) k.emplace_back(s.relation, s.inverse);
  return k;
}

void enumerate_from(const MetaSchema& schema, const NodeType& at, std::size_t max_hops,
                    std::vector<PathStep>& prefix, std::vector<MetaPath>& out) {
  if (prefix.size() == max_hops) return;
  const auto& rels = schema.relations();
  for (std::size_t r = 0; r < rels.size(); ++r) {
    for (const bool inverse : {false, true}) {
      if (inverse && rels[r].self_inverse()) continue;
      if (step_from(rels[r], inverse) != at) continue;
      const NodeType& next = step_to(rels[r], inverse);
      if (next == node_types::kEvent) continue;
      prefix.push_back({r, inverse});
      std::vector<PathStep> full = prefix;
      for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) full.push_back(reversed(schema, *it));
      out.push_back(MetaPath::from_steps(schema, node_types::kEvent, std::move(full)));
      enumerate_from(schema, next, max_hops, prefix, out);
      prefix.pop_back();
    }
  }
}

}  // namespace

MetaPath MetaPath::from_steps(const MetaSchema& schema, const NodeType& start,
                              std::vector<PathStep> steps) {
  if (steps.empty()) fail(ErrorCode::InvalidArgument, "meta-path needs at least one relation");
  schema.node_type_index(start);
  MetaPath p;
  p.node_types_.push_back(start);
  p.signature_ = start.name;
  for (auto& s : steps) {
    if (s.relation >= schema.relations().size()) {
      fail(ErrorCode::SchemaViolation, "meta-path references relation absent from schema");
    }
    s = canonical(schema, s);
    const auto& rel = schema.relations()[s.relation];
    if (step_from(rel, s.inverse) != p.node_types_.back()) {
      fail(ErrorCode::SchemaViolation, "relation " + rel.name + " cannot follow type " +
                                           p.node_types_.back().name);
    }
    p.node_types_.push_back(step_to(rel, s.inverse));
    p.signature_ += "-" + rel.name + (s.inverse ? "^-1" : "") + "-" + p.node_types_.back().name;
  }
  p.steps_ = std::move(steps);
  p.palindromic_ = true;
  const std::size_t n = p.steps_.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(p.steps_[k] == reversed(schema, p.steps_[n - 1 - k]))) p.palindromic_ = false;
  }
  return p;
}

MetaPath MetaPath::parse(const MetaSchema& schema, const std::string& signature) {
  // `^-1` contains the token separator; swap it for a marker first.
  std::string s = signature;
  for (std::size_t pos; (pos = s.find("^-1")) != std::string::npos;) s.replace(pos, 3, "\x01");
  std::vector<std::string> tokens;
  std::size_t begin = 0;
  for (std::size_t end; (end = s.find('-', begin)) != std::string::npos; begin = end + 1) {
    tokens.push_back(s.substr(begin, end - begin));
  }
  tokens.push_back(s.substr(begin));
  if (tokens.size() < 3 || tokens.size() % 2 == 0) {
    fail(ErrorCode::Parse, "malformed meta-path signature: " + signature);
  }
  const NodeType start{tokens[0]};
  if (!schema.has_node_type(start)) {
    fail(ErrorCode::SchemaViolation, "meta-path " + signature + " uses unknown type " + start.name);
  }
  std::vector<PathStep> steps;
  for (std::size_t k = 1; k < tokens.size(); k += 2) {
    std::string rel = tokens[k];
    const bool inverse = !rel.empty() && rel.back() == '\x01';
    if (inverse) rel.pop_back();
    const NodeType from{tokens[k - 1]};
    const NodeType to{tokens[k + 1]};
    const auto r = inverse ? schema.find_relation(rel, to, from) : schema.find_relation(rel, from, to);
    if (!r) {
      fail(ErrorCode::SchemaViolation, "meta-path " + signature + " references relation " + rel +
                                           " absent from schema");
    }
    steps.push_back({*r, inverse});
  }
  return from_steps(schema, start, std::move(steps));
}

MetaPathCatalog::MetaPathCatalog(std::vector<MetaPath> paths) {
  for (auto& p : paths) add(std::move(p));
}

void MetaPathCatalog::add(MetaPath path) {
  for (const auto& p : paths_) {
    if (p.signature() == path.signature()) {
      fail(ErrorCode::Duplicate, "duplicate catalog signature: " + path.signature());
    }
  }
  paths_.push_back(std::move(path));
}

std::vector<std::string> MetaPathCatalog::signatures() const {
  std::vector<std::string> s;
  s.reserve(paths_.size());
  for (const auto& p : paths_) s.push_back(p.signature());
  return s;
}

MetaPathCatalog enumerate_metapaths(const MetaSchema& schema, std::size_t max_hops) {
  if (max_hops < 1) fail(ErrorCode::InvalidArgument, "max_hops must be >= 1");
  std::vector<MetaPath> paths;
  std::vector<PathStep> prefix;
  enumerate_from(schema, node_types::kEvent, max_hops, prefix, paths);
  std::sort(paths.begin(), paths.end(),
            [](const MetaPath& a, const MetaPath& b) { return a.signature() < b.signature(); });
  return MetaPathCatalog(std::move(paths));
}

MetaPathCatalog read_catalog(std::istream& in, const MetaSchema& schema) {
  MetaPathCatalog catalog;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    catalog.add(MetaPath::parse(schema, line.substr(b, e - b + 1)));
  }
  return catalog;
}

void write_catalog(std::ostream& out, const MetaPathCatalog& catalog) {
  for (const auto& p : catalog.paths()) out << p.signature() << '\n';
}

const SparseMatrix& CoupCalculator::step_matrix(const PathStep& step) {
  const StepKey key{{step.relation, step.inverse}};
  auto it = steps_.find(key);
  if (it == steps_.end()) {
    it = steps_.emplace(key, hin_->adjacency(step.relation, step.inverse)).first;
  }
  return it->second;
}

SparseMatrix CoupCalculator::compute(const MetaPath& path) {
  const auto& steps = path.steps();
  const auto& schema = hin_->schema();
  for (const auto& s : steps) {
    if (s.relation >= schema.relations().size()) {
      fail(ErrorCode::SchemaViolation, "path " + path.signature() + " references relation absent from schema");
    }
  }
  const SparseMatrix* acc = &step_matrix(steps[0]);
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const StepKey key = key_of(std::span(steps).first(k + 1));
    auto it = prefixes_.find(key);
    if (it == prefixes_.end()) {
      it = prefixes_.emplace(key, kernels::spgemm(*acc, step_matrix(steps[k]))).first;
    }
    acc = &it->second;
  }
  return *acc;
}

std::vector<SparseMatrix> CoupCalculator::compute_all(const MetaPathCatalog& catalog) {
  std::vector<SparseMatrix> out;
  out.reserve(catalog.size());
  for (const auto& p : catalog.paths()) out.push_back(compute(p));
  return out;
}

SparseMatrix coup_matrix(const Hin& hin, const MetaPath& path) {
  return CoupCalculator(hin).compute(path);
}

SparseMatrix dice_matrix(const SparseMatrix& counts) {
  if (counts.rows() != counts.cols()) {
    fail(ErrorCode::ShapeMismatch, "dice_matrix needs a square matrix");
  }
  const auto diag = counts.diagonal();
  std::vector<Triplet> t;
  t.reserve(counts.nnz());
  for (std::size_t i = 0; i < counts.rows(); ++i) {
    const auto cols = counts.row_cols(i);
    const auto vals = counts.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const double denom = diag[i] + diag[cols[p]];
      if (denom == 0.0) continue;
      t.push_back({static_cast<std::uint32_t>(i), cols[p], 2.0 * vals[p] / denom});
    }
  }
  return SparseMatrix::from_triplets(counts.rows(), counts.cols(), std::move(t));
}

KiesWeights KiesWeights::uniform(const MetaPathCatalog& catalog) {
  KiesWeights w;
  w.signatures = catalog.signatures();
  w.values.assign(catalog.size(), catalog.empty() ? 0.0 : 1.0 / static_cast<double>(catalog.size()));
  w.normalized = true;
  return w;
}

void KiesWeights::validate() const {
  if (signatures.size() != values.size()) {
    fail(ErrorCode::ShapeMismatch, "weights: " + std::to_string(values.size()) + " values for " +
                                       std::to_string(signatures.size()) + " signatures");
  }
  double sum = 0.0;
  for (std::size_t m = 0; m < values.size(); ++m) {
    if (!std::isfinite(values[m]) || values[m] < 0.0) {
      fail(ErrorCode::InvalidArgument, "weight for " + signatures[m] + " must be finite and >= 0");
    }
    sum += values[m];
  }
  if (normalized && std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "weights flagged normalized but sum to " + std::to_string(sum));
  }
}

KiesWeights KiesWeights::normalized_copy() const {
  KiesWeights w = *this;
  double sum = 0.0;
  for (const double v : w.values) sum += v;
  if (!(sum > 0.0)) fail(ErrorCode::InvalidArgument, "cannot normalize all-zero weights");
  for (auto& v : w.values) v /= sum;
  w.normalized = true;
  return w;
}

double kies(std::size_t i, std::size_t j, std::span<const SparseMatrix> dice,
            const KiesWeights& weights) {
  if (dice.size() != weights.values.size()) {
    fail(ErrorCode::ShapeMismatch, "kies: " + std::to_string(dice.size()) + " matrices vs " +
                                       std::to_string(weights.values.size()) + " weights");
  }
  double s = 0.0;
  for (std::size_t m = 0; m < dice.size(); ++m) {
    if (i >= dice[m].rows() || j >= dice[m].cols()) {
      fail(ErrorCode::InvalidArgument, "kies: event index out of range");
    }
    s += weights.values[m] * dice[m].at(i, j);
  }
  return s;
}

SparseMatrix build_event_adjacency(std::span<const SparseMatrix> dice,
                                   std::span<const double> weights) {
  if (dice.size() != weights.size()) {
    fail(ErrorCode::ShapeMismatch, "build_event_adjacency: " + std::to_string(dice.size()) +
                                       " matrices vs " + std::to_string(weights.size()) + " weights");
  }
  return kernels::sparse_weighted_sum(dice, weights, /*drop_diagonal=*/true);
}

SparseMatrix build_event_adjacency(std::span<const SparseMatrix> dice,
                                   const KiesWeights& weights) {
  return build_event_adjacency(dice, std::span<const double>(weights.values));
}

std::string weights_to_json(const KiesWeights& weights, const std::string& meta_json) {
  weights.validate();
  json j;
  if (!meta_json.empty()) j["meta"] = json::parse(meta_json);
  j["format"] = "ppgcn.weights";
  j["version"] = 1;
  j["normalized"] = weights.normalized;
  json map = json::object();
  for (std::size_t m = 0; m < weights.values.size(); ++m) map[weights.signatures[m]] = weights.values[m];
  j["weights"] = map;
  return j.dump(2);
}

KiesWeights weights_from_json(const std::string& text) {
  KiesWeights w;
  try {
    const json j = json::parse(text);
    w.normalized = j.at("normalized").get<bool>();
    for (const auto& [sig, v] : j.at("weights").items()) {
      w.signatures.push_back(sig);
      w.values.push_back(v.get<double>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("weights file: ") + e.what());
  }
  w.validate();
  return w;
}

KiesWeights align_weights(const KiesWeights& weights, const MetaPathCatalog& catalog) {
  KiesWeights out;
  out.normalized = weights.normalized;
  std::set<std::string> used;
  for (const auto& p : catalog.paths()) {
    const auto it = std::find(weights.signatures.begin(), weights.signatures.end(), p.signature());
    if (it == weights.signatures.end()) {
      fail(ErrorCode::SignatureMismatch, "weights lack catalog signature " + p.signature());
    }
    out.signatures.push_back(p.signature());
    out.values.push_back(weights.values[static_cast<std::size_t>(it - weights.signatures.begin())]);
    used.insert(p.signature());
  }
  for (const auto& s : weights.signatures) {
    if (!used.contains(s)) fail(ErrorCode::SignatureMismatch, "weights carry signature " + s + " not in catalog");
  }
  out.validate();
  return out;
}

}  // namespace ppgcn
