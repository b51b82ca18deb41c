#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ppgcn/hin.hpp"

namespace ppgcn {

// Planted-partition event corpus. Every element vocabulary is cut into C
// contiguous class pools. An instance includes each element of its own
// class pool with probability p_in and each element of the other pools with
// probability p_out; its poster comes from its class's users except with
// probability p_out. Free text is drawn from a class-neutral vocabulary.
struct SynthConfig {
  std::size_t classes = 20;
  std::size_t instances_per_class = 5;
  std::size_t keywords = 160;
  std::size_t entities = 80;
  std::size_t topics = 40;
  std::size_t users = 20;
  std::size_t text_vocabulary = 400;
  std::size_t text_length = 16;
  double p_in = 0.6;
  double p_out = 0.05;
  double p_relation = 0.3;  // within-class element-relation density
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<EventDocument> documents;  // labels filled in
  std::vector<RelationRow> relations;
  std::vector<std::pair<std::string, std::string>> gold;  // (event id, label)
};

SyntheticCorpus gen_synthetic_corpus(const SynthConfig& config);

}  // namespace ppgcn
