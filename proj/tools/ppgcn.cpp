#include <algorithm>
#include <cctype>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ppgcn/pipeline.hpp"

namespace {

std::string env_name(const std::string& flag) {
  std::string out = "PPGCN_";
  for (const char ch : flag) out += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  ppgcn::RunConfig cfg;
  std::string head = "popularity";
  std::string hidden_activation = "relu";
  std::size_t k = 0;

  CLI::App app{"Pairwise popularity GCN for event detection over heterogeneous graphs"};
  app.set_config("--config", "", "TOML/INI file whose keys mirror the long flags");
  app.require_subcommand(1);
  app.fallthrough();

  const auto add = [&](const std::string& flag, auto& target, const std::string& help) {
    return app.add_option("--" + flag, target, help)->envname(env_name(flag));
  };
  add("out-dir", cfg.out_dir, "artifact directory")->capture_default_str();
  add("corpus", cfg.corpus, "corpus JSONL (default <out-dir>/corpus.jsonl)");
  add("relations", cfg.relations, "relations TSV (default <out-dir>/relations.tsv if present)");
  add("catalog", cfg.catalog, "meta-path catalog, one signature per line (default: enumerate)");
  add("weights", cfg.weights, "KIES weights JSON for cluster (default <out-dir>/weights.json, else uniform)");
  add("checkpoint", cfg.checkpoint, "model checkpoint for detect (default <out-dir>/model.json)");
  add("embeddings", cfg.embeddings, "external feature file `id v1 ... vd` instead of TF-IDF projection");
  add("seed", cfg.seed, "run seed")->capture_default_str();
  add("head", head, "popularity | angle")->check(CLI::IsMember({"popularity", "angle"}))->capture_default_str();
  add("k", k, "cluster count for cluster");
  add("epochs", cfg.train.epochs, "maximum training epochs")->capture_default_str();
  add("lr", cfg.train.lr, "SGD learning rate")->capture_default_str();
  add("d", cfg.feature_dim, "feature dimension")->capture_default_str();
  add("max-hops", cfg.max_hops, "half-length bound for catalog enumeration")->capture_default_str();
  add("patience", cfg.train.patience, "early-stop patience in epochs, 0 disables")->capture_default_str();
  add("anchors", cfg.train.anchors, "anchors R per epoch")->capture_default_str();
  add("batch-size", cfg.train.batch_size, "pairs per batch B")->capture_default_str();
  add("batches", cfg.train.batches_per_epoch, "batches per epoch E")->capture_default_str();
  add("c", cfg.train.c, "popularity head offset c")->capture_default_str();
  add("hidden", cfg.train.hidden_dim, "hidden layer width")->capture_default_str();
  add("output-dim", cfg.train.output_dim, "output representation width")->capture_default_str();
  add("hidden-activation", hidden_activation, "relu | identity | sigmoid")
      ->check(CLI::IsMember({"relu", "identity", "sigmoid"}))
      ->capture_default_str();
  app.add_flag("!--no-restore-best", cfg.train.restore_best, "keep last-epoch parameters");
  app.add_flag("--exact-normalization", cfg.train.exact_normalization, "differentiate through the degree normalization");
  app.add_flag("!--inductive", cfg.train.transductive, "drop non-train events from the training graph");
  add("train-frac", cfg.split.train, "train fraction")->capture_default_str();
  add("dev-frac", cfg.split.dev, "dev fraction")->capture_default_str();
  add("test-frac", cfg.split.test, "test fraction")->capture_default_str();
  add("classes", cfg.synth.classes, "synth: class count")->capture_default_str();
  add("per-class", cfg.synth.instances_per_class, "synth: instances per class")->capture_default_str();
  add("p-in", cfg.synth.p_in, "synth: within-class element probability")->capture_default_str();
  add("p-out", cfg.synth.p_out, "synth: cross-class element probability")->capture_default_str();

  app.add_subcommand("synth", "generate a planted-class corpus, relations and gold labels");
  app.add_subcommand("build", "ingest corpus and relations, enumerate meta-paths, cache Dice matrices");
  app.add_subcommand("train", "train the pairwise GCN; writes model, weights and trace");
  app.add_subcommand("detect", "predict test events and write detection metrics");
  app.add_subcommand("cluster", "k-medoids over KIES distances and NMI against gold labels");
  app.add_subcommand("inspect", "print graph and catalog statistics as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  cfg.train.head = ppgcn::head_from_string(head);
  cfg.train.hidden_activation = ppgcn::activation_from_string(hidden_activation);
  if (k > 0) cfg.k = k;
  std::ostream& out = command == "inspect" ? std::cout : std::cerr;
  return ppgcn::run(command, cfg, out, std::cerr);
}
