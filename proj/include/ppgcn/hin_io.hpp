#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ppgcn/hin.hpp"

namespace ppgcn {

// JSON-lines corpus, one EventDocument per line with fields
// id,text,keywords,entities,topics,user,label. Blank lines are skipped.
std::vector<EventDocument> read_corpus_jsonl(std::istream& in);
void write_corpus_jsonl(std::ostream& out, const std::vector<EventDocument>& docs);

// Five tab- or space-separated columns `src_type src_id relation dst_type
// dst_id`; `#` starts a comment.
std::vector<RelationRow> read_relations_tsv(std::istream& in);
void write_relations_tsv(std::ostream& out, const std::vector<RelationRow>& rows);

// Versioned JSON snapshot of schema, node tables and edge lists.
std::string hin_to_json(const Hin& hin);
Hin hin_from_json(const std::string& text);

}  // namespace ppgcn
