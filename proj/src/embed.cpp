#include "ppgcn/embed.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ppgcn/error.hpp"
#include "ppgcn/kernels.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

std::vector<std::string> document_tokens(const EventDocument& doc) {
  std::vector<std::string> tokens;
  std::istringstream words(doc.text);
  for (std::string w; words >> w;) {
    const auto keep = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
    const auto b = std::find_if(w.begin(), w.end(), keep);
    const auto e = std::find_if(w.rbegin(), w.rend(), keep).base();
    if (b >= e) continue;
    std::string t(b, e);
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    tokens.push_back(std::move(t));
  }
  for (const auto& k : doc.keywords) tokens.push_back("kw:" + k);
  for (const auto& n : doc.entities) tokens.push_back("ent:" + n);
  for (const auto& t : doc.topics) tokens.push_back("top:" + t);
  return tokens;
}

TfidfModel fit_tfidf(std::span<const EventDocument> corpus) {
  if (corpus.empty()) fail(ErrorCode::InvalidArgument, "cannot fit features on an empty corpus");
  std::vector<std::map<std::string, double>> counts(corpus.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (auto& t : document_tokens(corpus[i])) counts[i][std::move(t)] += 1.0;
    for (const auto& [t, c] : counts[i]) ++df[t];
  }
  TfidfModel model;
  std::unordered_map<std::string, std::uint32_t> index;
  const double n = static_cast<double>(corpus.size());
  for (const auto& [t, f] : df) {
    index.emplace(t, static_cast<std::uint32_t>(model.vocabulary.size()));
    model.vocabulary.push_back(t);
    model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(f))) + 1.0);
  }
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& [t, c] : counts[i]) {
      const auto v = index.at(t);
      trip.push_back({static_cast<std::uint32_t>(i), v, c * model.idf[v]});
    }
  }
  model.weights = SparseMatrix::from_triplets(corpus.size(), model.vocabulary.size(), std::move(trip));
  return model;
}

FeatureMatrix fit_features(std::span<const EventDocument> corpus, std::size_t d,
                           std::uint64_t seed) {
  if (d < 1) fail(ErrorCode::InvalidArgument, "feature dimension must be >= 1");
  const TfidfModel model = fit_tfidf(corpus);
  auto rng = make_rng(seed, "features");
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix projection(model.vocabulary.size(), d);
  for (auto& v : projection.values()) v = normal(rng);
  FeatureMatrix x = kernels::spmm(model.weights, projection);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    const double norm = l2_norm(row);
    if (norm > 0.0) {
      for (auto& v : row) v /= norm;
    }
  }
  return x;
}

FeatureMatrix load_embeddings(std::istream& in, std::span<const std::string> expected_ids) {
  std::unordered_map<std::string, std::vector<double>> rows;
  std::size_t d = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string id;
    if (!(fields >> id)) continue;
    std::vector<double> values;
    for (std::string tok; fields >> tok;) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        fail(ErrorCode::Parse, "embeddings line " + std::to_string(lineno) + ": bad value '" + tok + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) fail(ErrorCode::Parse, "embeddings line " + std::to_string(lineno) + ": no values");
    if (d == 0) d = values.size();
    if (values.size() != d) {
      fail(ErrorCode::Parse, "embeddings line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(d) + " values, got " + std::to_string(values.size()));
    }
    if (!rows.emplace(id, std::move(values)).second) {
      fail(ErrorCode::Duplicate, "embeddings line " + std::to_string(lineno) + ": duplicate id " + id);
    }
  }
  FeatureMatrix x(expected_ids.size(), d);
  for (std::size_t i = 0; i < expected_ids.size(); ++i) {
    const auto it = rows.find(expected_ids[i]);
    if (it == rows.end()) fail(ErrorCode::MissingNode, "embeddings missing id " + expected_ids[i]);
    std::copy(it->second.begin(), it->second.end(), x.row(i).begin());
    rows.erase(it);
  }
  if (!rows.empty()) {
    std::vector<std::string> extra;
    for (const auto& [id, v] : rows) extra.push_back(id);
    std::sort(extra.begin(), extra.end());
    fail(ErrorCode::InvalidArgument, "embeddings carry unknown id " + extra.front());
  }
  return x;
}

}  // namespace ppgcn
