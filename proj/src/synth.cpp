#include "ppgcn/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "ppgcn/error.hpp"
#include "ppgcn/rng.hpp"

namespace ppgcn {

namespace {

std::string name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

// Pool of class c when `size` elements are split across `classes` pools.
std::pair<std::size_t, std::size_t> pool(std::size_t size, std::size_t classes, std::size_t c) {
  return {c * size / classes, (c + 1) * size / classes};
}

std::size_t owner(std::size_t size, std::size_t classes, std::size_t element) {
  std::size_t c = element * classes / size;
  while (pool(size, classes, c).first > element) --c;
  while (pool(size, classes, c).second <= element) ++c;
  return c;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) fail(ErrorCode::InvalidArgument, "synthetic corpus needs >= 2 classes");
  if (instances_per_class < 1) fail(ErrorCode::InvalidArgument, "instances_per_class must be >= 1");
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "need 0 <= p_out < p_in <= 1");
  }
  if (!(p_relation >= 0.0 && p_relation <= 1.0)) fail(ErrorCode::InvalidArgument, "p_relation must be in [0, 1]");
  const std::pair<const char*, std::size_t> vocab[] = {
      {"keywords", keywords}, {"entities", entities}, {"topics", topics}, {"users", users}};
  for (const auto& [what, size] : vocab) {
    if (size < classes) {
      fail(ErrorCode::InvalidArgument, std::string(what) + " vocabulary (" + std::to_string(size) +
                                           ") smaller than the class count (" + std::to_string(classes) + ")");
    }
  }
  if (text_length > 0 && text_vocabulary == 0) fail(ErrorCode::InvalidArgument, "empty text vocabulary");
}

SyntheticCorpus gen_synthetic_corpus(const SynthConfig& config) {
  config.validate();
  auto rng = make_rng(config.seed, "synth");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto coin = [&](double p) { return unit(rng) < p; };
  const std::size_t C = config.classes;

  SyntheticCorpus out;
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < config.instances_per_class; ++j) slots.emplace_back(c, j);
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  const auto sample_elements = [&](const char* prefix, std::size_t size, std::size_t c) {
    std::vector<std::string> picked;
    for (std::size_t e = 0; e < size; ++e) {
      if (coin(owner(size, C, e) == c ? config.p_in : config.p_out)) picked.push_back(name(prefix, e));
    }
    return picked;
  };

  for (std::size_t n = 0; n < slots.size(); ++n) {
    const auto [c, j] = slots[n];
    EventDocument d;
    d.id = name("ev", n);
    d.label = name("class", c);
    for (std::size_t w = 0; w < config.text_length; ++w) {
      if (w) d.text += ' ';
      d.text += name("w", uniform_index(rng, config.text_vocabulary));
    }
    d.keywords = sample_elements("kw", config.keywords, c);
    d.entities = sample_elements("ent", config.entities, c);
    d.topics = sample_elements("top", config.topics, c);
    const auto [u0, u1] = pool(config.users, C, c);
    const std::size_t u = coin(config.p_out) ? uniform_index(rng, config.users)
                                             : u0 + uniform_index(rng, u1 - u0);
    d.user = name("user", u);
    out.gold.emplace_back(d.id, *d.label);
    out.documents.push_back(std::move(d));
  }

  auto& rel = out.relations;
  const double cross = 0.1 * config.p_out;
  const auto pairwise = [&](const char* type, const char* prefix, std::size_t size, const char* relation) {
    for (std::size_t a = 0; a < size; ++a) {
      for (std::size_t b = a + 1; b < size; ++b) {
        const bool same = owner(size, C, a) == owner(size, C, b);
        if (coin(same ? config.p_relation : cross)) {
          rel.push_back({type, name(prefix, a), relation, type, name(prefix, b)});
        }
      }
    }
  };
  pairwise("Keyword", "kw", config.keywords, "synonym");
  pairwise("User", "user", config.users, "friend");

  // Directed element links: usually toward an element of the same class,
  // occasionally (p_out) toward any element.
  const auto link = [&](const char* src_type, const char* src_prefix, std::size_t src_size,
                        const char* relation, const char* dst_type, const char* dst_prefix,
                        std::size_t dst_size, std::size_t per_element) {
    for (std::size_t a = 0; a < src_size; ++a) {
      const auto [d0, d1] = pool(dst_size, C, owner(src_size, C, a));
      for (std::size_t t = 0; t < per_element; ++t) {
        const std::size_t b = coin(config.p_out) ? uniform_index(rng, dst_size) : d0 + uniform_index(rng, d1 - d0);
        if (std::string(src_type) == dst_type && a == b) continue;
        rel.push_back({src_type, name(src_prefix, a), relation, dst_type, name(dst_prefix, b)});
      }
    }
  };
  link("Entity", "ent", config.entities, "located_in", "Entity", "ent", config.entities, 1);
  link("Entity", "ent", config.entities, "describes", "Keyword", "kw", config.keywords, 2);
  link("Keyword", "kw", config.keywords, "belongs_to", "Topic", "top", config.topics, 1);
  link("Topic", "top", config.topics, "subtopic_of", "Topic", "top", config.topics, 1);
  return out;
}

}  // namespace ppgcn
