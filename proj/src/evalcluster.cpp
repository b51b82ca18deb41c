#include "ppgcn/evalcluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ppgcn/error.hpp"
#include "ppgcn/kernels.hpp"
#include "ppgcn/pairwise.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

DenseMatrix kies_distance_matrix(std::span<const SparseMatrix> dice, const KiesWeights& weights) {
  weights.validate();
  if (!weights.normalized) fail(ErrorCode::InvalidArgument, "KIES distance needs normalized weights");
  if (dice.size() != weights.values.size()) {
    fail(ErrorCode::ShapeMismatch, std::to_string(dice.size()) + " similarity matrices vs " +
                                       std::to_string(weights.values.size()) + " weights");
  }
  DenseMatrix d = kernels::weighted_sum(dice, weights.values);
  const auto n = static_cast<std::ptrdiff_t>(d.rows());
#pragma omp parallel for schedule(static) if (n >= 256)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto row = d.row(static_cast<std::size_t>(i));
    for (auto& v : row) v = std::max(0.0, 1.0 - v);
    row[static_cast<std::size_t>(i)] = 0.0;
  }
  return d;
}

namespace {

double assign(const DenseMatrix& d, const std::vector<std::uint32_t>& medoids,
              std::vector<std::uint32_t>& assignment) {
  const std::size_t n = d.rows();
  std::vector<int> medoid_cluster(n, -1);
  for (std::size_t c = 0; c < medoids.size(); ++c) medoid_cluster[medoids[c]] = static_cast<int>(c);
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (medoid_cluster[i] >= 0) {
      assignment[i] = static_cast<std::uint32_t>(medoid_cluster[i]);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < medoids.size(); ++c) {
      const double dc = d(i, medoids[c]);
      const double db = d(i, medoids[best]);
      if (dc < db || (dc == db && medoids[c] < medoids[best])) best = c;
    }
    assignment[i] = static_cast<std::uint32_t>(best);
    cost += d(i, medoids[best]);
  }
  return cost;
}

Clustering kmedoids_once(const DenseMatrix& distances, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = distances.rows();
  std::vector<std::uint32_t> medoids;
  std::vector<char> is_medoid(n, 0);
  medoids.push_back(static_cast<std::uint32_t>(uniform_index(rng, n)));
  is_medoid[medoids[0]] = 1;
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = distances(i, medoids[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (medoids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += is_medoid[i] ? 0.0 : nearest[i] * nearest[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = unit(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (is_medoid[i]) continue;
        const double w = nearest[i] * nearest[i];
        if (w > 0.0) pick = i;
        if (w > 0.0 && (target -= w) < 0.0) break;
      }
    }
    if (pick == n) {
      pick = static_cast<std::size_t>(std::find(is_medoid.begin(), is_medoid.end(), 0) - is_medoid.begin());
    }
    medoids.push_back(static_cast<std::uint32_t>(pick));
    is_medoid[pick] = 1;
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], distances(i, pick));
  }
  std::sort(medoids.begin(), medoids.end());

  Clustering out;
  out.k = k;
  out.assignment.assign(n, 0);
  out.cost = assign(distances, medoids, out.assignment);
  out.cost_trace.push_back(out.cost);
  while (out.iterations < kKmedoidsMaxIterations) {
    ++out.iterations;
    bool changed = false;
    std::vector<std::vector<std::uint32_t>> members(k);
    for (std::uint32_t i = 0; i < n; ++i) members[out.assignment[i]].push_back(i);
    for (std::size_t c = 0; c < k; ++c) {
      std::uint32_t best = medoids[c];
      double best_sum = std::numeric_limits<double>::infinity();
      for (const auto cand : members[c]) {
        double sum = 0.0;
        for (const auto other : members[c]) sum += distances(other, cand);
        if (sum < best_sum || (sum == best_sum && cand < best)) {
          best_sum = sum;
          best = cand;
        }
      }
      // Keep the incumbent on ties so the loop cannot cycle.
      double incumbent = 0.0;
      for (const auto other : members[c]) incumbent += distances(other, medoids[c]);
      if (best != medoids[c] && best_sum < incumbent) {
        medoids[c] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::sort(medoids.begin(), medoids.end());
    out.cost = assign(distances, medoids, out.assignment);
    out.cost_trace.push_back(out.cost);
  }
  out.medoids = medoids;
  return out;
}

}  // namespace

Clustering kmedoids(const DenseMatrix& distances, std::size_t k, std::uint64_t seed, std::size_t restarts) {
  const std::size_t n = distances.rows();
  if (distances.cols() != n) fail(ErrorCode::ShapeMismatch, "distance matrix must be square");
  if (k < 1 || k > n) {
    fail(ErrorCode::InvalidArgument, "k = " + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }
  if (restarts < 1) fail(ErrorCode::InvalidArgument, "kmedoids needs at least one restart");
  auto rng = make_rng(seed, "kmedoids");
  Clustering best = kmedoids_once(distances, k, rng);
  for (std::size_t r = 1; r < restarts; ++r) {
    Clustering c = kmedoids_once(distances, k, rng);
    if (c.cost < best.cost) best = std::move(c);
  }
  return best;
}

namespace {

template <typename T>
double nmi_impl(std::span<const T> a, std::span<const T> b, NmiNormalization norm) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "nmi: label vectors differ in length");
  if (a.empty()) fail(ErrorCode::InvalidArgument, "nmi: empty labelings");
  std::map<T, double> pa, pb;
  std::map<std::pair<T, T>, double> pab;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    pab[{a[i], b[i]}] += 1.0 / n;
  }
  const auto entropy = [](const std::map<T, double>& p) {
    double h = 0.0;
    for (const auto& [k, v] : p) h -= v * std::log(v);
    return h;
  };
  if (pa.size() == 1 && pb.size() == 1) return 1.0;
  const double ha = pa.size() == 1 ? 0.0 : entropy(pa);
  const double hb = pb.size() == 1 ? 0.0 : entropy(pb);
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [k, v] : pab) mi += v * std::log(v / (pa[k.first] * pb[k.second]));
  const double denom = norm == NmiNormalization::Geometric ? std::sqrt(ha * hb) : 0.5 * (ha + hb);
  return std::clamp(mi / denom, 0.0, 1.0);
}

}  // namespace

double nmi(std::span<const std::string> a, std::span<const std::string> b, NmiNormalization norm) {
  return nmi_impl(a, b, norm);
}

double nmi(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, NmiNormalization norm) {
  return nmi_impl(a, b, norm);
}

MetricsReport detection_metrics(std::span<const std::string> predictions,
                                std::span<const std::string> golds) {
  if (predictions.size() != golds.size()) {
    fail(ErrorCode::ShapeMismatch, "detection_metrics: prediction and gold lengths differ");
  }
  MetricsReport r;
  if (golds.empty()) return r;
  std::map<std::string, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& p = predictions[i];
    const auto& g = golds[i];
    r.per_class[g].support += 1;
    if (p != kNewClass && p == g) {
      ++correct;
      ++tp[g];
    } else {
      ++fn[g];
      if (p != kNewClass) ++fp[p];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(golds.size());
  const auto f1 = [](double prec, double rec) { return prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0; };
  double macro = 0.0;
  for (auto& [label, m] : r.per_class) {
    const double t = static_cast<double>(tp[label]);
    const double pos = t + static_cast<double>(fp[label]);
    m.precision = pos > 0.0 ? t / pos : 0.0;
    m.recall = t / static_cast<double>(m.support);
    m.f1 = f1(m.precision, m.recall);
    macro += m.f1;
  }
  r.macro_f1 = macro / static_cast<double>(r.per_class.size());
  std::size_t all_fp = 0;
  for (const auto& [label, v] : fp) all_fp += v;
  const double t = static_cast<double>(correct);
  const double micro_p = t + static_cast<double>(all_fp) > 0.0 ? t / (t + static_cast<double>(all_fp)) : 0.0;
  const double micro_r = t / static_cast<double>(golds.size());
  r.micro_f1 = f1(micro_p, micro_r);
  return r;
}

std::string metrics_to_json(const MetricsReport& report, const std::string& meta_json) {
  nlohmann::ordered_json j;
  if (!meta_json.empty()) j["meta"] = nlohmann::ordered_json::parse(meta_json);
  j["accuracy"] = report.accuracy;
  j["micro_f1"] = report.micro_f1;
  j["macro_f1"] = report.macro_f1;
  if (report.nmi) j["nmi"] = *report.nmi;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [label, m] : report.per_class) {
    per[label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  j["per_class"] = per;
  return j.dump(2);
}

}  // namespace ppgcn
