#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ppgcn/sparse.hpp"

namespace ppgcn {

struct NodeType {
  std::string name;
  friend auto operator<=>(const NodeType&, const NodeType&) = default;
};

namespace node_types {
inline const NodeType kEvent{"EventInstance"};
inline const NodeType kKeyword{"Keyword"};
inline const NodeType kEntity{"Entity"};
inline const NodeType kTopic{"Topic"};
inline const NodeType kUser{"User"};
}  // namespace node_types

// A typed link declaration. `symmetric` relations between nodes of one type
// are stored once per unordered pair and read identically in both
// directions; any other relation is traversable against its direction as
// its inverse R^-1.
struct RelationType {
  std::string name;
  NodeType src;
  NodeType dst;
  bool symmetric = false;

  bool self_inverse() const { return symmetric && src == dst; }
  friend bool operator==(const RelationType&, const RelationType&) = default;
};

class MetaSchema {
 public:
  // The five canonical node types plus event incidences (contains, mentions,
  // about, posted_by) and element relations (synonym, related_to,
  // located_in, describes, belongs_to, subtopic_of, friend).
  static MetaSchema default_schema();

  void add_node_type(NodeType type);
  void add_relation(RelationType relation);

  const std::vector<NodeType>& node_types() const noexcept { return node_types_; }
  const std::vector<RelationType>& relations() const noexcept { return relations_; }

  bool has_node_type(const NodeType& type) const;
  std::size_t node_type_index(const NodeType& type) const;  // throws UnknownType
  std::optional<std::size_t> find_relation(std::string_view name, const NodeType& src,
                                           const NodeType& dst) const;
  bool has_relation_name(std::string_view name) const;

  friend bool operator==(const MetaSchema&, const MetaSchema&) = default;

 private:
  std::vector<NodeType> node_types_;
  std::vector<RelationType> relations_;
};

struct NodeRef {
  NodeType type;
  std::string id;
};

struct Edge {
  std::uint32_t src;
  std::uint32_t dst;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Event-based heterogeneous information network. Nodes are stored per type
// in dense insertion order; edges per declared relation with multiplicity 1.
class Hin {
 public:
  explicit Hin(MetaSchema schema = MetaSchema::default_schema());

  const MetaSchema& schema() const noexcept { return schema_; }

  // Idempotent: re-adding an existing (type, id) returns its index.
  std::uint32_t add_node(const NodeType& type, std::string_view id);
  std::optional<std::uint32_t> find_node(const NodeType& type, std::string_view id) const;
  std::size_t node_count(const NodeType& type) const;
  std::size_t node_count() const;
  const std::vector<std::string>& node_ids(const NodeType& type) const;

  // Returns true when the edge is new. Both endpoints must already exist.
  bool add_edge(std::string_view relation, const NodeRef& src, const NodeRef& dst);
  bool add_edge(std::size_t relation, std::uint32_t src, std::uint32_t dst);

  std::span<const Edge> edges(std::size_t relation) const { return edges_[relation]; }
  std::size_t edge_count() const;

  // Number of edges of `relation` incident to the node, either end.
  std::size_t degree(const NodeRef& node, std::string_view relation) const;

  // Binary adjacency of one relation: rows index the src type, columns the
  // dst type. `inverse` yields the transpose. Self-inverse relations give
  // the same symmetric matrix either way.
  SparseMatrix adjacency(std::size_t relation, bool inverse = false) const;

 private:
  struct NodeTable {
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::uint32_t> index;
  };

  const NodeTable& table(const NodeType& type) const;

  MetaSchema schema_;
  std::vector<NodeTable> tables_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::unordered_set<std::uint64_t>> edge_keys_;
};

struct EventDocument {
  std::string id;
  std::string text;
  std::vector<std::string> keywords;
  std::vector<std::string> entities;
  std::vector<std::string> topics;
  std::string user;  // empty: no poster
  std::optional<std::string> label;
};

// One EventInstance per document in corpus order, one element node per
// distinct string, and contains/mentions/about/posted_by incidence edges.
Hin ingest_corpus(std::span<const EventDocument> documents,
                  MetaSchema schema = MetaSchema::default_schema());

struct RelationRow {
  std::string src_type;
  std::string src_id;
  std::string relation;
  std::string dst_type;
  std::string dst_id;
};

// Creates missing endpoint nodes; returns how many edges were new.
std::size_t load_relations(Hin& hin, std::span<const RelationRow> rows);

}  // namespace ppgcn
