#pragma once

// Glue between the modules: dataset splitting, graph preparation with an
// on-disk Dice cache, atomic artifact writes and the CLI commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgcn/evalcluster.hpp"
#include "ppgcn/hin.hpp"
#include "ppgcn/metapath.hpp"
#include "ppgcn/pairwise.hpp"
#include "ppgcn/synth.hpp"

namespace ppgcn {

struct SplitFractions {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
  void validate() const;  // each in [0, 1], sum 1 ± 1e-9
};

// Stratified by label: each class's members, ordered by id and shuffled on
// the "split" stream, contribute round(n·train) train and round(n·dev) dev
// instances; the rest go to test. Unlabeled documents land in no list.
DatasetSplit split_dataset(std::span<const EventDocument> docs, const SplitFractions& fractions,
                           std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

struct PreparedGraph {
  Hin hin;
  MetaPathCatalog catalog;
  std::vector<SparseMatrix> dice;  // one per catalog path, event × event
};

// Ingest + relations + Dice matrices for every catalog path.
PreparedGraph prepare_graph(std::span<const EventDocument> docs, std::span<const RelationRow> relations,
                            MetaPathCatalog catalog);

std::string catalog_text(const MetaPathCatalog& catalog);

// Binary cache of Dice matrices tagged with (graph hash, catalog hash).
void write_dice_cache(const std::filesystem::path& path, std::uint64_t graph_hash,
                      std::uint64_t catalog_hash, std::span<const SparseMatrix> dice);
// Empty when the file is missing or was written for another graph/catalog.
std::optional<std::vector<SparseMatrix>> read_dice_cache(const std::filesystem::path& path,
                                                         std::uint64_t graph_hash,
                                                         std::uint64_t catalog_hash);

// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct RunConfig {
  std::filesystem::path out_dir = ".";
  std::filesystem::path corpus;      // default <out>/corpus.jsonl
  std::filesystem::path relations;   // default <out>/relations.tsv when present
  std::filesystem::path catalog;     // default: enumerate from the schema
  std::filesystem::path weights;     // cluster: default <out>/weights.json, else uniform
  std::filesystem::path checkpoint;  // detect: default <out>/model.json
  std::filesystem::path embeddings;  // optional external features
  std::uint64_t seed = 0;
  std::size_t max_hops = 2;
  std::size_t feature_dim = kDefaultFeatureDim;
  std::optional<std::size_t> k;
  SplitFractions split;
  TrainConfig train;
  SynthConfig synth;

  void validate() const;
};

// Each returns normally on success and throws Error otherwise. Human
// readable progress goes to `log`.
void run_synth(const RunConfig& config, std::ostream& log);
void run_build(const RunConfig& config, std::ostream& log);
void run_train(const RunConfig& config, std::ostream& log);
void run_detect(const RunConfig& config, std::ostream& log);
void run_cluster(const RunConfig& config, std::ostream& log);
void run_inspect(const RunConfig& config, std::ostream& out);

// Dispatches by command name; returns the process exit status and prints a
// JSON error object to `err` on failure.
int run(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace ppgcn
