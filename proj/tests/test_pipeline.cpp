#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ppgcn/error.hpp"
#include "ppgcn/pipeline.hpp"

using namespace ppgcn;
namespace fs = std::filesystem;

namespace {

SynthConfig small_synth(std::uint64_t seed = 0) {
  SynthConfig s;
  s.classes = 4;
  s.keywords = 32;
  s.entities = 16;
  s.topics = 8;
  s.users = 8;
  s.text_vocabulary = 60;
  s.seed = seed;
  return s;
}

// Fresh directory under the build tree, removed on scope exit.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / ("ppgcn_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

RunConfig small_run(const fs::path& out) {
  RunConfig rc;
  rc.out_dir = out;
  rc.synth = small_synth();
  rc.max_hops = 1;
  rc.feature_dim = 16;
  rc.train.epochs = 3;
  rc.train.anchors = 20;
  rc.train.batch_size = 8;
  rc.train.batches_per_epoch = 2;
  rc.train.hidden_dim = 8;
  rc.train.output_dim = 4;
  return rc;
}

}  // namespace

TEST_CASE("synthetic corpus shape and determinism") {
  const auto cfg = small_synth(3);
  const auto a = gen_synthetic_corpus(cfg);
  const auto b = gen_synthetic_corpus(cfg);
  REQUIRE(a.documents.size() == 20);
  CHECK(a.gold.size() == 20);
  std::map<std::string, int> per_class;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    const auto& d = a.documents[i];
    CHECK(d.id == b.documents[i].id);
    CHECK(d.keywords == b.documents[i].keywords);
    CHECK(d.label == b.documents[i].label);
    REQUIRE(d.label.has_value());
    ++per_class[*d.label];
    ids.insert(d.id);
  }
  CHECK(ids.size() == 20);
  CHECK(per_class.size() == 4);
  for (const auto& [label, n] : per_class) CHECK(n == 5);
  CHECK(a.relations.size() == b.relations.size());
  const auto other = gen_synthetic_corpus(small_synth(4));
  bool differs = false;
  for (std::size_t i = 0; i < 20; ++i) differs |= other.documents[i].keywords != a.documents[i].keywords;
  CHECK(differs);

  auto bad = cfg;
  bad.p_out = 0.7;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.classes = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("stratified split") {
  const auto corpus = gen_synthetic_corpus(small_synth(1));
  const auto s = split_dataset(corpus.documents, {}, 7);
  CHECK(s.train.size() == 12);
  CHECK(s.dev.size() == 4);
  CHECK(s.test.size() == 4);
  std::set<std::uint32_t> all;
  for (const auto* part : {&s.train, &s.dev, &s.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 20);
  std::map<std::string, int> train_per_class;
  for (const auto t : s.train) ++train_per_class[s.labels[t]];
  for (const auto& [label, n] : train_per_class) CHECK(n == 3);

  const auto again = split_dataset(corpus.documents, {}, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK_THROWS_AS((SplitFractions{0.5, 0.5, 0.5}.validate()), Error);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("dice cache round trip and staleness") {
  ScratchDir dir("cache");
  const auto corpus = gen_synthetic_corpus(small_synth(2));
  const auto g = prepare_graph(corpus.documents, corpus.relations,
                               enumerate_metapaths(MetaSchema::default_schema(), 1));
  const auto file = dir.path / "dice.bin";
  write_dice_cache(file, 11, 22, g.dice);
  const auto back = read_dice_cache(file, 11, 22);
  REQUIRE(back.has_value());
  REQUIRE(back->size() == g.dice.size());
  for (std::size_t m = 0; m < g.dice.size(); ++m) CHECK((*back)[m] == g.dice[m]);
  CHECK_FALSE(read_dice_cache(file, 12, 22).has_value());
  CHECK_FALSE(read_dice_cache(file, 11, 23).has_value());
  CHECK_FALSE(read_dice_cache(dir.path / "missing.bin", 11, 22).has_value());

  auto bytes = read_file(file);
  bytes.resize(bytes.size() / 2);
  write_file_atomic(file, bytes);
  CHECK_FALSE(read_dice_cache(file, 11, 22).has_value());
  CHECK_FALSE(fs::exists(dir.path / "dice.bin.tmp"));
}

TEST_CASE("commands run end to end") {
  ScratchDir dir("e2e");
  const auto rc = small_run(dir.path);
  std::ostringstream log, err;
  for (const char* cmd : {"synth", "build", "train", "detect"}) {
    INFO("command " << cmd << " stderr " << err.str());
    REQUIRE(run(cmd, rc, log, err) == 0);
  }
  for (const char* f : {"corpus.jsonl", "relations.tsv", "labels.csv", "graph.json", "catalog.txt", "dice.bin",
                        "model.json", "weights.json", "trace_popularity.csv", "split.csv", "detection.json",
                        "predictions.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir.path / f));
  }
  const auto weights = weights_from_json(read_file(dir.path / "weights.json"));
  CHECK(weights.normalized);
  CHECK(weights.values.size() == 4);

  CHECK(run("cluster", rc, log, err) != 0);  // --k is required
  auto with_k = rc;
  with_k.k = 4;
  REQUIRE(run("cluster", with_k, log, err) == 0);
  const auto metrics = nlohmann::json::parse(read_file(dir.path / "cluster_metrics.json"));
  CHECK(metrics.at("format") == "ppgcn.cluster_metrics");
  CHECK(metrics.at("nmi").get<double>() >= 0.0);
  CHECK(metrics.at("medoids").size() == 4);

  std::ostringstream inspect;
  REQUIRE(run("inspect", rc, inspect, err) == 0);
  const auto stats = nlohmann::json::parse(inspect.str());
  CHECK(stats.is_object());

  // a second identical training run reproduces the checkpoint byte for byte
  const auto model = read_file(dir.path / "model.json");
  REQUIRE(run("train", rc, log, err) == 0);
  CHECK(read_file(dir.path / "model.json") == model);
}

TEST_CASE("weights for another catalog are rejected") {
  ScratchDir dir("mismatch");
  auto rc = small_run(dir.path);
  std::ostringstream log, err;
  REQUIRE(run("synth", rc, log, err) == 0);
  REQUIRE(run("build", rc, log, err) == 0);
  KiesWeights foreign;
  foreign.signatures = {"EventInstance-contains-Keyword-contains^-1-EventInstance"};
  foreign.values = {1.0};
  foreign.normalized = true;
  write_file_atomic(dir.path / "foreign.json", weights_to_json(foreign));
  rc.weights = dir.path / "foreign.json";
  rc.k = 4;
  std::ostringstream fail_err;
  CHECK(run("cluster", rc, log, fail_err) == 1);
  const auto j = nlohmann::json::parse(fail_err.str());
  CHECK(j.at("error").at("code") == "signature_mismatch");
}

TEST_CASE("missing inputs fail with a structured error") {
  ScratchDir dir("missing");
  const auto rc = small_run(dir.path);
  std::ostringstream log, err;
  CHECK(run("build", rc, log, err) == 1);
  CHECK(nlohmann::json::parse(err.str()).contains("error"));
  std::ostringstream err2;
  CHECK(run("frobnicate", rc, log, err2) == 1);
}
