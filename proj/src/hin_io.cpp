#include "ppgcn/hin_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ppgcn/error.hpp"

namespace ppgcn {

namespace {

using json = nlohmann::ordered_json;

constexpr int kSnapshotVersion = 1;

std::vector<std::string> string_list(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || j[field].is_null()) return {};
  if (!j[field].is_array()) {
    fail(ErrorCode::Parse, "corpus line " + std::to_string(line) + ": `" + field +
                               "` must be a list of strings");
  }
  std::vector<std::string> out;
  for (const auto& v : j[field]) {
    if (!v.is_string()) {
      fail(ErrorCode::Parse, "corpus line " + std::to_string(line) + ": non-string in `" +
                                 field + "`");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<EventDocument> read_corpus_jsonl(std::istream& in) {
  std::vector<EventDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Parse, "corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      fail(ErrorCode::Parse, "corpus line " + std::to_string(lineno) + ": missing string `id`");
    }
    EventDocument d;
    d.id = j["id"].get<std::string>();
    if (j.contains("text") && j["text"].is_string()) d.text = j["text"].get<std::string>();
    d.keywords = string_list(j, "keywords", lineno);
    d.entities = string_list(j, "entities", lineno);
    d.topics = string_list(j, "topics", lineno);
    if (j.contains("user") && j["user"].is_string()) d.user = j["user"].get<std::string>();
    if (j.contains("label") && !j["label"].is_null()) {
      if (j["label"].is_string()) {
        d.label = j["label"].get<std::string>();
      } else if (j["label"].is_number_integer()) {
        d.label = std::to_string(j["label"].get<long long>());
      } else {
        fail(ErrorCode::Parse, "corpus line " + std::to_string(lineno) + ": bad `label`");
      }
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

void write_corpus_jsonl(std::ostream& out, const std::vector<EventDocument>& docs) {
  for (const auto& d : docs) {
    json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["keywords"] = d.keywords;
    j["entities"] = d.entities;
    j["topics"] = d.topics;
    j["user"] = d.user;
    j["label"] = d.label ? json(*d.label) : json(nullptr);
    out << j.dump() << '\n';
  }
}

std::vector<RelationRow> read_relations_tsv(std::istream& in) {
  std::vector<RelationRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(std::move(f));
    if (cols.empty()) continue;
    if (cols.size() != 5) {
      fail(ErrorCode::Parse, "relations line " + std::to_string(lineno) + ": expected 5 columns, got " +
                                 std::to_string(cols.size()));
    }
    rows.push_back({cols[0], cols[1], cols[2], cols[3], cols[4]});
  }
  return rows;
}

void write_relations_tsv(std::ostream& out, const std::vector<RelationRow>& rows) {
  out << "# src_type\tsrc_id\trelation\tdst_type\tdst_id\n";
  for (const auto& r : rows) {
    out << r.src_type << '\t' << r.src_id << '\t' << r.relation << '\t' << r.dst_type << '\t'
        << r.dst_id << '\n';
  }
}

std::string hin_to_json(const Hin& hin) {
  json j;
  j["format"] = "ppgcn.hin";
  j["version"] = kSnapshotVersion;
  json types = json::array();
  for (const auto& t : hin.schema().node_types()) types.push_back(t.name);
  json rels = json::array();
  for (const auto& r : hin.schema().relations()) {
    rels.push_back({{"name", r.name}, {"src", r.src.name}, {"dst", r.dst.name},
                    {"symmetric", r.symmetric}});
  }
  j["schema"] = {{"node_types", types}, {"relations", rels}};
  json nodes = json::object();
  for (const auto& t : hin.schema().node_types()) nodes[t.name] = hin.node_ids(t);
  j["nodes"] = nodes;
  json edges = json::array();
  for (std::size_t r = 0; r < hin.schema().relations().size(); ++r) {
    const auto& rel = hin.schema().relations()[r];
    json pairs = json::array();
    for (const auto& e : hin.edges(r)) pairs.push_back({e.src, e.dst});
    edges.push_back(
        {{"relation", rel.name}, {"src", rel.src.name}, {"dst", rel.dst.name}, {"pairs", pairs}});
  }
  j["edges"] = edges;
  return j.dump();
}

Hin hin_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("graph snapshot: ") + e.what());
  }
  try {
    if (j.at("format") != "ppgcn.hin") fail(ErrorCode::Parse, "not a ppgcn.hin snapshot");
    if (j.at("version") != kSnapshotVersion) {
      fail(ErrorCode::Parse, "unsupported snapshot version " + j.at("version").dump());
    }
    MetaSchema schema;
    for (const auto& t : j.at("schema").at("node_types")) schema.add_node_type({t.get<std::string>()});
    for (const auto& r : j.at("schema").at("relations")) {
      schema.add_relation({r.at("name").get<std::string>(), {r.at("src").get<std::string>()},
                           {r.at("dst").get<std::string>()}, r.at("symmetric").get<bool>()});
    }
    Hin hin(std::move(schema));
    for (const auto& t : hin.schema().node_types()) {
      for (const auto& id : j.at("nodes").at(t.name)) hin.add_node(t, id.get<std::string>());
    }
    for (const auto& e : j.at("edges")) {
      const auto rel = hin.schema().find_relation(e.at("relation").get<std::string>(),
                                                  {e.at("src").get<std::string>()},
                                                  {e.at("dst").get<std::string>()});
      if (!rel) fail(ErrorCode::SchemaViolation, "snapshot edge list for undeclared relation");
      for (const auto& p : e.at("pairs")) {
        hin.add_edge(*rel, p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>());
      }
    }
    return hin;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("graph snapshot: ") + e.what());
  }
}

}  // namespace ppgcn
