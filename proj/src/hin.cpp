#include "ppgcn/hin.hpp"

#include <algorithm>

#include "ppgcn/error.hpp"

namespace ppgcn {

namespace {

std::uint64_t edge_key(std::uint32_t src, std::uint32_t dst) {
  return (static_cast<std::uint64_t>(src) << 32) | dst;
}

bool valid_name(std::string_view name) {
  return !name.empty() && name.find('-') == std::string_view::npos &&
         name.find('^') == std::string_view::npos &&
         name.find_first_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

MetaSchema MetaSchema::default_schema() {
  using namespace node_types;
  MetaSchema s;
  for (const auto& t : {kEvent, kKeyword, kEntity, kTopic, kUser}) s.add_node_type(t);
  s.add_relation({"contains", kEvent, kKeyword, true});
  s.add_relation({"mentions", kEvent, kEntity, true});
  s.add_relation({"about", kEvent, kTopic, true});
  s.add_relation({"posted_by", kEvent, kUser, true});
  s.add_relation({"synonym", kKeyword, kKeyword, true});
  s.add_relation({"related_to", kEntity, kEntity, true});
  s.add_relation({"located_in", kEntity, kEntity, false});
  s.add_relation({"describes", kEntity, kKeyword, false});
  s.add_relation({"belongs_to", kKeyword, kTopic, false});
  s.add_relation({"subtopic_of", kTopic, kTopic, false});
  s.add_relation({"friend", kUser, kUser, true});
  return s;
}

void MetaSchema::add_node_type(NodeType type) {
  if (!valid_name(type.name)) {
    fail(ErrorCode::InvalidArgument, "invalid node type name '" + type.name + "'");
  }
  if (has_node_type(type)) fail(ErrorCode::Duplicate, "node type declared twice: " + type.name);
  node_types_.push_back(std::move(type));
}

void MetaSchema::add_relation(RelationType relation) {
  if (!valid_name(relation.name)) {
    fail(ErrorCode::InvalidArgument, "invalid relation name '" + relation.name + "'");
  }
  if (!has_node_type(relation.src) || !has_node_type(relation.dst)) {
    fail(ErrorCode::UnknownType, "relation " + relation.name + " references undeclared type");
  }
  if (find_relation(relation.name, relation.src, relation.dst)) {
    fail(ErrorCode::Duplicate, "relation declared twice: " + relation.name);
  }
  relations_.push_back(std::move(relation));
}

bool MetaSchema::has_node_type(const NodeType& type) const {
  return std::find(node_types_.begin(), node_types_.end(), type) != node_types_.end();
}

std::size_t MetaSchema::node_type_index(const NodeType& type) const {
  const auto it = std::find(node_types_.begin(), node_types_.end(), type);
  if (it == node_types_.end()) fail(ErrorCode::UnknownType, "unknown node type: " + type.name);
  return static_cast<std::size_t>(it - node_types_.begin());
}

std::optional<std::size_t> MetaSchema::find_relation(std::string_view name, const NodeType& src,
                                                     const NodeType& dst) const {
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& rel = relations_[r];
    if (rel.name == name && rel.src == src && rel.dst == dst) return r;
  }
  return std::nullopt;
}

bool MetaSchema::has_relation_name(std::string_view name) const {
  return std::any_of(relations_.begin(), relations_.end(),
                     [&](const RelationType& r) { return r.name == name; });
}

Hin::Hin(MetaSchema schema)
    : schema_(std::move(schema)),
      tables_(schema_.node_types().size()),
      edges_(schema_.relations().size()),
      edge_keys_(schema_.relations().size()) {}

const Hin::NodeTable& Hin::table(const NodeType& type) const {
  return tables_[schema_.node_type_index(type)];
}

std::uint32_t Hin::add_node(const NodeType& type, std::string_view id) {
  auto& t = tables_[schema_.node_type_index(type)];
  std::string key(id);
  if (const auto it = t.index.find(key); it != t.index.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(t.ids.size());
  t.ids.push_back(key);
  t.index.emplace(std::move(key), idx);
  return idx;
}

std::optional<std::uint32_t> Hin::find_node(const NodeType& type, std::string_view id) const {
  const auto& t = table(type);
  if (const auto it = t.index.find(std::string(id)); it != t.index.end()) return it->second;
  return std::nullopt;
}

std::size_t Hin::node_count(const NodeType& type) const { return table(type).ids.size(); }

std::size_t Hin::node_count() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.ids.size();
  return n;
}

const std::vector<std::string>& Hin::node_ids(const NodeType& type) const {
  return table(type).ids;
}

bool Hin::add_edge(std::string_view relation, const NodeRef& src, const NodeRef& dst) {
  const auto r = schema_.find_relation(relation, src.type, dst.type);
  if (!r) {
    if (!schema_.has_relation_name(relation)) {
      fail(ErrorCode::UnknownType, "unknown relation: " + std::string(relation));
    }
    fail(ErrorCode::SchemaViolation, "type mismatch: relation " + std::string(relation) +
                                         " does not link " + src.type.name + " to " +
                                         dst.type.name);
  }
  const auto s = find_node(src.type, src.id);
  if (!s) fail(ErrorCode::MissingNode, "missing endpoint " + src.type.name + ":" + src.id);
  const auto d = find_node(dst.type, dst.id);
  if (!d) fail(ErrorCode::MissingNode, "missing endpoint " + dst.type.name + ":" + dst.id);
  return add_edge(*r, *s, *d);
}

bool Hin::add_edge(std::size_t relation, std::uint32_t src, std::uint32_t dst) {
  if (relation >= edges_.size()) fail(ErrorCode::UnknownType, "relation index out of range");
  const auto& rel = schema_.relations()[relation];
  if (src >= node_count(rel.src) || dst >= node_count(rel.dst)) {
    fail(ErrorCode::MissingNode, "edge endpoint out of range for relation " + rel.name);
  }
  if (rel.self_inverse() && dst < src) std::swap(src, dst);
  if (!edge_keys_[relation].insert(edge_key(src, dst)).second) return false;
  edges_[relation].push_back({src, dst});
  return true;
}

std::size_t Hin::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += e.size();
  return n;
}

std::size_t Hin::degree(const NodeRef& node, std::string_view relation) const {
  const auto idx = find_node(node.type, node.id);
  if (!idx) fail(ErrorCode::MissingNode, "missing node " + node.type.name + ":" + node.id);
  if (!schema_.has_relation_name(relation)) {
    fail(ErrorCode::UnknownType, "unknown relation: " + std::string(relation));
  }
  std::size_t deg = 0;
  const auto& rels = schema_.relations();
  for (std::size_t r = 0; r < rels.size(); ++r) {
    if (rels[r].name != relation) continue;
    for (const auto& e : edges_[r]) {
      const bool at_src = rels[r].src == node.type && e.src == *idx;
      const bool at_dst = rels[r].dst == node.type && e.dst == *idx;
      if (at_src || at_dst) ++deg;
    }
  }
  return deg;
}

SparseMatrix Hin::adjacency(std::size_t relation, bool inverse) const {
  const auto& rel = schema_.relations().at(relation);
  const std::size_t n_src = node_count(rel.src);
  const std::size_t n_dst = node_count(rel.dst);
  std::vector<Triplet> t;
  t.reserve(edges_[relation].size() * (rel.self_inverse() ? 2 : 1));
  for (const auto& e : edges_[relation]) {
    t.push_back({e.src, e.dst, 1.0});
    if (rel.self_inverse() && e.src != e.dst) t.push_back({e.dst, e.src, 1.0});
  }
  auto m = SparseMatrix::from_triplets(n_src, n_dst, std::move(t));
  if (inverse && !rel.self_inverse()) return m.transpose();
  return m;
}

Hin ingest_corpus(std::span<const EventDocument> documents, MetaSchema schema) {
  using namespace node_types;
  Hin hin(std::move(schema));
  std::unordered_set<std::string> seen;
  for (const auto& doc : documents) {
    if (!seen.insert(doc.id).second) fail(ErrorCode::Duplicate, "duplicate document id: " + doc.id);
    hin.add_node(kEvent, doc.id);
  }
  const auto link = [&hin](std::uint32_t event, const char* relation, const NodeType& type,
                           const std::string& element) {
    const auto rel = hin.schema().find_relation(relation, kEvent, type);
    if (!rel) fail(ErrorCode::SchemaViolation, std::string("schema lacks relation ") + relation);
    hin.add_edge(*rel, event, hin.add_node(type, element));
  };
  for (std::uint32_t e = 0; e < documents.size(); ++e) {
    const auto& doc = documents[e];
    for (const auto& k : doc.keywords) link(e, "contains", kKeyword, k);
    for (const auto& n : doc.entities) link(e, "mentions", kEntity, n);
    for (const auto& t : doc.topics) link(e, "about", kTopic, t);
    if (!doc.user.empty()) link(e, "posted_by", kUser, doc.user);
  }
  return hin;
}

std::size_t load_relations(Hin& hin, std::span<const RelationRow> rows) {
  std::size_t added = 0;
  for (const auto& row : rows) {
    const NodeType src{row.src_type};
    const NodeType dst{row.dst_type};
    if (row.src_id.empty() || row.dst_id.empty()) {
      fail(ErrorCode::Parse, "relation row with empty node id");
    }
    const auto rel = hin.schema().find_relation(row.relation, src, dst);
    if (!rel) {
      if (!hin.schema().has_relation_name(row.relation)) {
        fail(ErrorCode::UnknownType, "unknown relation: " + row.relation);
      }
      fail(ErrorCode::SchemaViolation, "type mismatch: relation " + row.relation +
                                           " does not link " + src.name + " to " + dst.name);
    }
    const auto s = hin.add_node(src, row.src_id);
    const auto d = hin.add_node(dst, row.dst_id);
    if (hin.add_edge(*rel, s, d)) ++added;
  }
  return added;
}

}  // namespace ppgcn
