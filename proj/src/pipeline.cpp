#include "ppgcn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ppgcn/embed.hpp"
#include "ppgcn/error.hpp"
#include "ppgcn/hin_io.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr char kCacheMagic[8] = {'P', 'P', 'G', 'C', 'N', 'S', '0', '1'};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

fs::path or_default(const fs::path& given, const fs::path& fallback) {
  return given.empty() ? fallback : given;
}

std::vector<EventDocument> load_corpus(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_corpus_jsonl(in);
}

std::vector<RelationRow> load_relation_rows(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_relations_tsv(in);
}

MetaPathCatalog resolve_catalog(const RunConfig& config, const MetaSchema& schema) {
  if (config.catalog.empty()) return enumerate_metapaths(schema, config.max_hops);
  std::istringstream in(read_file(config.catalog));
  return read_catalog(in, schema);
}

// Shared run metadata for artifact headers; no paths or timestamps so the
// artifacts of two identical runs compare equal byte for byte.
ojson run_meta(const RunConfig& config, const char* command) {
  return {{"command", command}, {"seed", config.seed}};
}

std::string csv_meta_line(const ojson& meta) { return "# " + meta.dump() + "\n"; }

struct LoadedRun {
  std::vector<EventDocument> docs;
  PreparedGraph graph;
};

// Reads the artifacts of `build` from the output directory, reusing the
// Dice cache when its key still matches.
LoadedRun load_built(const RunConfig& config, std::ostream& log) {
  LoadedRun run;
  run.docs = load_corpus(or_default(config.corpus, config.out_dir / "corpus.jsonl"));
  const std::string graph_text = read_file(config.out_dir / "graph.json");
  run.graph.hin = hin_from_json(graph_text);
  {
    std::istringstream in(read_file(config.out_dir / "catalog.txt"));
    run.graph.catalog = read_catalog(in, run.graph.hin.schema());
  }
  const auto& events = run.graph.hin.node_ids(node_types::kEvent);
  bool same = events.size() == run.docs.size();
  for (std::size_t i = 0; same && i < events.size(); ++i) same = events[i] == run.docs[i].id;
  if (!same) {
    fail(ErrorCode::InvalidArgument, "corpus events do not match graph.json; rerun `build`");
  }
  const std::uint64_t gh = fnv1a64(hin_to_json(run.graph.hin));
  const std::uint64_t ch = fnv1a64(catalog_text(run.graph.catalog));
  const fs::path cache = config.out_dir / "dice.bin";
  if (auto cached = read_dice_cache(cache, gh, ch)) {
    run.graph.dice = std::move(*cached);
  } else {
    log << "dice cache missing or stale; recomputing\n";
    CoupCalculator calc(run.graph.hin);
    for (const auto& counts : calc.compute_all(run.graph.catalog)) {
      run.graph.dice.push_back(dice_matrix(counts));
    }
    write_dice_cache(cache, gh, ch, run.graph.dice);
  }
  return run;
}

FeatureMatrix load_features(const RunConfig& config, std::span<const EventDocument> docs) {
  if (config.embeddings.empty()) return fit_features(docs, config.feature_dim, config.seed);
  std::vector<std::string> ids;
  for (const auto& d : docs) ids.push_back(d.id);
  std::istringstream in(read_file(config.embeddings));
  return load_embeddings(in, ids);
}

std::string split_csv(const DatasetSplit& split, std::span<const EventDocument> docs, const ojson& meta) {
  std::vector<const char*> tag(docs.size(), "none");
  for (const auto t : split.train) tag[t] = "train";
  for (const auto t : split.dev) tag[t] = "dev";
  for (const auto t : split.test) tag[t] = "test";
  std::string out = csv_meta_line(meta) + "event_id,split\n";
  for (std::size_t i = 0; i < docs.size(); ++i) out += docs[i].id + "," + tag[i] + "\n";
  return out;
}

DatasetSplit read_split_csv(const fs::path& path, std::span<const EventDocument> docs) {
  std::map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < docs.size(); ++i) index[docs[i].id] = static_cast<std::uint32_t>(i);
  DatasetSplit split;
  split.labels.resize(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) split.labels[i] = docs[i].label.value_or("");
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line == "event_id,split") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) fail(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": expected id,split");
    const auto it = index.find(line.substr(0, comma));
    if (it == index.end()) fail(ErrorCode::MissingNode, "split file names unknown event " + line.substr(0, comma));
    const std::string tag = line.substr(comma + 1);
    if (tag == "train") split.train.push_back(it->second);
    else if (tag == "dev") split.dev.push_back(it->second);
    else if (tag == "test") split.test.push_back(it->second);
    else if (tag != "none") fail(ErrorCode::Parse, "unknown split tag `" + tag + "`");
  }
  for (auto* v : {&split.train, &split.dev, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

}  // namespace

void SplitFractions::validate() const {
  for (const double f : {train, dev, test}) {
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorCode::InvalidArgument, "split fractions must lie in [0, 1]");
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "split fractions must sum to 1");
  }
  if (train <= 0.0) fail(ErrorCode::InvalidArgument, "train fraction must be positive");
}

DatasetSplit split_dataset(std::span<const EventDocument> docs, const SplitFractions& fractions,
                           std::uint64_t seed) {
  fractions.validate();
  DatasetSplit split;
  split.labels.resize(docs.size());
  std::map<std::string, std::vector<std::uint32_t>> by_label;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].label || docs[i].label->empty()) continue;
    split.labels[i] = *docs[i].label;
    by_label[*docs[i].label].push_back(static_cast<std::uint32_t>(i));
  }
  auto rng = make_rng(seed, "split");
  for (auto& [label, members] : by_label) {
    std::sort(members.begin(), members.end(),
              [&](std::uint32_t a, std::uint32_t b) { return docs[a].id < docs[b].id; });
    std::shuffle(members.begin(), members.end(), rng);
    const double n = static_cast<double>(members.size());
    const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::llround(n * fractions.train)));
    const auto n_dev = std::min(members.size() - n_train, static_cast<std::size_t>(std::llround(n * fractions.dev)));
    for (std::size_t p = 0; p < members.size(); ++p) {
      auto& dst = p < n_train ? split.train : p < n_train + n_dev ? split.dev : split.test;
      dst.push_back(members[p]);
    }
  }
  for (auto* v : {&split.train, &split.dev, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

PreparedGraph prepare_graph(std::span<const EventDocument> docs, std::span<const RelationRow> relations,
                            MetaPathCatalog catalog) {
  PreparedGraph g{ingest_corpus(docs), std::move(catalog), {}};
  load_relations(g.hin, relations);
  CoupCalculator calc(g.hin);
  for (const auto& counts : calc.compute_all(g.catalog)) g.dice.push_back(dice_matrix(counts));
  return g;
}

std::string catalog_text(const MetaPathCatalog& catalog) {
  std::ostringstream out;
  write_catalog(out, catalog);
  return out.str();
}

void write_dice_cache(const fs::path& path, std::uint64_t graph_hash, std::uint64_t catalog_hash,
                      std::span<const SparseMatrix> dice) {
  std::string out(kCacheMagic, sizeof kCacheMagic);
  put<std::uint64_t>(out, graph_hash);
  put<std::uint64_t>(out, catalog_hash);
  put<std::uint64_t>(out, dice.size());
  for (const auto& s : dice) {
    put<std::uint64_t>(out, s.rows());
    put<std::uint64_t>(out, s.cols());
    put<std::uint64_t>(out, s.nnz());
    for (const auto p : s.row_ptr()) put<std::uint64_t>(out, p);
    for (const auto c : s.col_idx()) put<std::uint32_t>(out, c);
    for (const auto v : s.values()) put<double>(out, v);
  }
  write_file_atomic(path, out);
}

std::optional<std::vector<SparseMatrix>> read_dice_cache(const fs::path& path, std::uint64_t graph_hash,
                                                         std::uint64_t catalog_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof kCacheMagic];
  std::uint64_t gh = 0, ch = 0, count = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) return std::nullopt;
  if (!get(in, gh) || !get(in, ch) || !get(in, count) || gh != graph_hash || ch != catalog_hash) {
    return std::nullopt;
  }
  std::vector<SparseMatrix> dice;
  try {
    for (std::uint64_t m = 0; m < count; ++m) {
      std::uint64_t rows = 0, cols = 0, nnz = 0;
      if (!get(in, rows) || !get(in, cols) || !get(in, nnz)) return std::nullopt;
      if (rows > (1u << 28) || nnz > (1ull << 32)) return std::nullopt;
      std::vector<std::size_t> row_ptr(rows + 1);
      std::vector<std::uint32_t> col_idx(nnz);
      std::vector<double> values(nnz);
      for (auto& p : row_ptr) {
        std::uint64_t v = 0;
        if (!get(in, v)) return std::nullopt;
        p = v;
      }
      for (auto& c : col_idx) {
        if (!get(in, c)) return std::nullopt;
      }
      for (auto& v : values) {
        if (!get(in, v)) return std::nullopt;
      }
      dice.emplace_back(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  return dice;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot rename onto " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void RunConfig::validate() const {
  split.validate();
  if (feature_dim == 0) fail(ErrorCode::InvalidArgument, "--d must be positive");
  if (max_hops == 0) fail(ErrorCode::InvalidArgument, "--max-hops must be >= 1");
  if (k && *k == 0) fail(ErrorCode::InvalidArgument, "--k must be positive");
  train.validate();
}

void run_synth(const RunConfig& config, std::ostream& log) {
  SynthConfig sc = config.synth;
  sc.seed = config.seed;
  const auto corpus = gen_synthetic_corpus(sc);
  ojson meta = run_meta(config, "synth");
  meta["classes"] = sc.classes;
  meta["instances_per_class"] = sc.instances_per_class;
  meta["p_in"] = sc.p_in;
  meta["p_out"] = sc.p_out;

  std::ostringstream docs;
  write_corpus_jsonl(docs, corpus.documents);
  write_file_atomic(config.out_dir / "corpus.jsonl", docs.str());
  std::ostringstream rel;
  rel << csv_meta_line(meta);
  write_relations_tsv(rel, corpus.relations);
  write_file_atomic(config.out_dir / "relations.tsv", rel.str());
  std::string labels = csv_meta_line(meta) + "event_id,label\n";
  for (const auto& [id, label] : corpus.gold) labels += id + "," + label + "\n";
  write_file_atomic(config.out_dir / "labels.csv", labels);
  log << "synth: " << corpus.documents.size() << " events, " << corpus.relations.size()
      << " relation rows -> " << config.out_dir.string() << "\n";
}

void run_build(const RunConfig& config, std::ostream& log) {
  const fs::path corpus_path = or_default(config.corpus, config.out_dir / "corpus.jsonl");
  const auto docs = load_corpus(corpus_path);
  std::vector<RelationRow> rows;
  fs::path rel_path = config.relations;
  if (rel_path.empty() && fs::exists(config.out_dir / "relations.tsv")) rel_path = config.out_dir / "relations.tsv";
  if (!rel_path.empty()) rows = load_relation_rows(rel_path);

  auto graph = prepare_graph(docs, rows, resolve_catalog(config, MetaSchema::default_schema()));
  if (graph.catalog.empty()) fail(ErrorCode::InvalidArgument, "empty meta-path catalog");

  fs::create_directories(config.out_dir);
  const fs::path own_corpus = config.out_dir / "corpus.jsonl";
  if (!fs::exists(own_corpus) || !fs::equivalent(corpus_path, own_corpus)) {
    write_file_atomic(own_corpus, read_file(corpus_path));
  }
  const std::string graph_text = hin_to_json(graph.hin);
  const std::string cat_text = catalog_text(graph.catalog);
  write_file_atomic(config.out_dir / "graph.json", graph_text);
  write_file_atomic(config.out_dir / "catalog.txt", cat_text);
  write_dice_cache(config.out_dir / "dice.bin", fnv1a64(graph_text), fnv1a64(cat_text), graph.dice);
  log << "build: " << graph.hin.node_count() << " nodes, " << graph.hin.edge_count() << " edges, "
      << graph.catalog.size() << " meta-paths\n";
}

void run_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto run = load_built(config, log);
  const auto x = load_features(config, run.docs);
  const auto split = split_dataset(run.docs, config.split, config.seed);
  if (split.train.empty()) fail(ErrorCode::InvalidArgument, "corpus has no labeled training events");
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  const auto result = train(run.graph.dice, x, split, run.graph.catalog, tc);

  ojson meta = run_meta(config, "train");
  meta["head"] = to_string(tc.head);
  meta["epochs_run"] = result.trace.size();
  meta["best_epoch"] = result.best_epoch;
  meta["feature_dim"] = x.cols();
  meta["split"] = {config.split.train, config.split.dev, config.split.test};

  write_file_atomic(config.out_dir / "model.json", model_to_json(result.model));
  write_file_atomic(config.out_dir / "weights.json", weights_to_json(export_weights(result.model), meta.dump()));
  std::ostringstream trace;
  trace << csv_meta_line(meta);
  write_trace_csv(trace, result.trace);
  write_file_atomic(config.out_dir / (std::string("trace_") + to_string(tc.head) + ".csv"), trace.str());
  write_file_atomic(config.out_dir / "split.csv", split_csv(split, run.docs, meta));
  const double dev = result.best_epoch > 0 ? result.trace[result.best_epoch - 1].dev_accuracy : 0.0;
  log << "train: " << result.trace.size() << " epochs, best dev accuracy " << dev << " at epoch "
      << result.best_epoch << "\n";
}

void run_detect(const RunConfig& config, std::ostream& log) {
  const auto model = model_from_json(read_file(or_default(config.checkpoint, config.out_dir / "model.json")));
  const auto run = load_built(config, log);
  if (model.signatures != run.graph.catalog.signatures()) {
    KiesWeights probe{model.signatures, std::vector<double>(model.signatures.size(), 1.0), false};
    align_weights(probe, run.graph.catalog);  // names the first mismatch
    fail(ErrorCode::SignatureMismatch, "checkpoint catalog order differs from catalog.txt");
  }
  RunConfig fc = config;
  fc.feature_dim = model.gcn.input_dim();
  fc.seed = model.config.seed;
  const auto x = load_features(fc, run.docs);
  if (x.cols() != model.gcn.input_dim()) fail(ErrorCode::ShapeMismatch, "feature width differs from the checkpoint");
  const fs::path split_path = config.out_dir / "split.csv";
  const auto split = fs::exists(split_path) ? read_split_csv(split_path, run.docs)
                                            : split_dataset(run.docs, config.split, model.config.seed);
  if (split.test.empty()) fail(ErrorCode::InvalidArgument, "no test events to detect");
  const auto z = infer_embeddings(model, run.graph.dice, x);

  std::vector<std::string> preds, golds;
  ojson meta = {{"command", "detect"}, {"seed", model.config.seed}, {"head", to_string(model.config.head)},
                {"test_events", split.test.size()}};
  std::string csv = csv_meta_line(meta) + "event_id,gold,predicted,probability\n";
  for (const auto t : split.test) {
    const auto p = predict_class(t, z, split.train, split.labels, model.config.head, model.config.c);
    preds.push_back(p.label);
    golds.push_back(split.labels[t]);
    const double prob = p.label == kNewClass ? 0.0 : p.class_probability.at(p.label);
    csv += run.docs[t].id + "," + split.labels[t] + "," + p.label + "," + fmt(prob) + "\n";
  }
  const auto report = detection_metrics(preds, golds);
  write_file_atomic(config.out_dir / "detection.json", metrics_to_json(report, meta.dump()));
  write_file_atomic(config.out_dir / "predictions.csv", csv);
  log << "detect: accuracy " << report.accuracy << ", micro-F1 " << report.micro_f1 << " on "
      << split.test.size() << " test events\n";
}

void run_cluster(const RunConfig& config, std::ostream& log) {
  if (!config.k) fail(ErrorCode::InvalidArgument, "cluster requires --k");
  const auto run = load_built(config, log);
  fs::path wpath = config.weights;
  if (wpath.empty() && fs::exists(config.out_dir / "weights.json")) wpath = config.out_dir / "weights.json";
  KiesWeights w = wpath.empty() ? KiesWeights::uniform(run.graph.catalog)
                                : align_weights(weights_from_json(read_file(wpath)), run.graph.catalog);
  if (!w.normalized) fail(ErrorCode::InvalidArgument, "cluster needs simplex-normalized weights");
  const std::size_t n = run.docs.size();
  if (*config.k > n) {
    fail(ErrorCode::InvalidArgument, "--k " + std::to_string(*config.k) + " exceeds " + std::to_string(n) + " events");
  }
  const auto d = kies_distance_matrix(run.graph.dice, w);
  const auto clustering = kmedoids(d, *config.k, config.seed);

  std::vector<std::string> gold, found;
  for (std::size_t i = 0; i < n; ++i) {
    if (!run.docs[i].label || run.docs[i].label->empty()) continue;
    gold.push_back(*run.docs[i].label);
    found.push_back(std::to_string(clustering.assignment[i]));
  }
  ojson meta = run_meta(config, "cluster");
  meta["k"] = *config.k;
  meta["weights"] = wpath.empty() ? "uniform" : "file";
  ojson j = {{"meta", meta},
             {"format", "ppgcn.cluster_metrics"},
             {"nmi", gold.empty() ? ojson(nullptr) : ojson(nmi(gold, found))},
             {"labeled_events", gold.size()},
             {"cost", clustering.cost},
             {"iterations", clustering.iterations},
             {"medoids", clustering.medoids},
             {"omega", w.values}};
  std::string csv = csv_meta_line(meta) + "event_id,cluster\n";
  for (std::size_t i = 0; i < n; ++i) csv += run.docs[i].id + "," + std::to_string(clustering.assignment[i]) + "\n";
  write_file_atomic(config.out_dir / "clustering.csv", csv);
  write_file_atomic(config.out_dir / "cluster_metrics.json", j.dump(2));
  log << "cluster: k=" << *config.k << ", cost " << clustering.cost;
  if (!gold.empty()) log << ", NMI " << j["nmi"].get<double>();
  log << "\n";
}

void run_inspect(const RunConfig& config, std::ostream& out) {
  const Hin hin = hin_from_json(read_file(config.out_dir / "graph.json"));
  ojson j;
  ojson nodes = ojson::object();
  for (const auto& t : hin.schema().node_types()) nodes[t.name] = hin.node_count(t);
  ojson edges = ojson::object();
  const auto& rels = hin.schema().relations();
  for (std::size_t r = 0; r < rels.size(); ++r) {
    edges[rels[r].name + "(" + rels[r].src.name + "," + rels[r].dst.name + ")"] = hin.edges(r).size();
  }
  j["nodes"] = nodes;
  j["edges"] = edges;
  const fs::path cat = config.out_dir / "catalog.txt";
  if (fs::exists(cat)) {
    std::istringstream in(read_file(cat));
    const auto catalog = read_catalog(in, hin.schema());
    ojson paths = ojson::array();
    const auto cached = read_dice_cache(config.out_dir / "dice.bin", fnv1a64(hin_to_json(hin)),
                                        fnv1a64(catalog_text(catalog)));
    for (std::size_t m = 0; m < catalog.size(); ++m) {
      ojson p = {{"signature", catalog[m].signature()}, {"hops", catalog[m].hops()}};
      if (cached) p["dice_nnz"] = (*cached)[m].nnz();
      paths.push_back(p);
    }
    j["catalog"] = paths;
    j["dice_cache"] = cached ? "fresh" : "missing or stale";
  }
  out << j.dump(2) << "\n";
}

int run(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err) {
  try {
    if (command == "synth") run_synth(config, log);
    else if (command == "build") run_build(config, log);
    else if (command == "train") run_train(config, log);
    else if (command == "detect") run_detect(config, log);
    else if (command == "cluster") run_cluster(config, log);
    else if (command == "inspect") run_inspect(config, log);
    else fail(ErrorCode::InvalidArgument, "unknown command `" + command + "`");
    return 0;
  } catch (const Error& e) {
    err << ojson{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump() << "\n";
  } catch (const std::exception& e) {
    err << ojson{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
  }
  return 1;
}

}  // namespace ppgcn
