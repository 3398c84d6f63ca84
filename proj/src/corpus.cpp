#include "hashrag/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "hashrag/error.hpp"

namespace hashrag {

using nlohmann::json;

Corpus Corpus::FromRecords(std::vector<Document> documents,
                           std::vector<Proposition> propositions) {
  if (propositions.empty()) throw InputError("empty corpus");

  Corpus c;
  c.documents_ = std::move(documents);
  c.propositions_ = std::move(propositions);

  for (std::size_t i = 0; i < c.documents_.size(); ++i) {
    const auto& d = c.documents_[i];
    if (d.doc_id.empty()) throw InputError("document with empty doc_id");
    if (d.text.empty()) throw InputError("document \"" + d.doc_id + "\" has empty text");
    if (!c.doc_index_.emplace(d.doc_id, i).second) {
      throw InputError("duplicate doc_id \"" + d.doc_id + "\"");
    }
  }

  // (doc, ordinal) pairs already seen.
  std::unordered_set<std::string> ordinals;
  for (std::size_t i = 0; i < c.propositions_.size(); ++i) {
    const auto& p = c.propositions_[i];
    if (p.prop_id.empty()) throw InputError("proposition with empty prop_id");
    if (p.text.empty()) throw InputError("proposition \"" + p.prop_id + "\" has empty text");
    if (!c.prop_index_.emplace(p.prop_id, i).second) {
      throw InputError("duplicate prop_id \"" + p.prop_id + "\"");
    }
    if (!c.doc_index_.contains(p.doc_id)) {
      throw InputError("proposition \"" + p.prop_id +
                       "\" references unknown doc_id \"" + p.doc_id + "\"");
    }
    std::string key = p.doc_id;
    key.push_back('\0');
    key += std::to_string(p.ordinal);
    if (!ordinals.insert(std::move(key)).second) {
      throw InputError("duplicate ordinal " + std::to_string(p.ordinal) +
                       " in document \"" + p.doc_id + "\"");
    }
  }
  return c;
}

std::optional<std::size_t> Corpus::PropIndex(std::string_view prop_id) const {
  auto it = prop_index_.find(std::string(prop_id));
  if (it == prop_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Corpus::DocOf(std::string_view prop_id) const {
  auto row = PropIndex(prop_id);
  if (!row) throw InputError("unknown prop_id \"" + std::string(prop_id) + "\"");
  return propositions_[*row].doc_id;
}

const Document& Corpus::document(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) {
    throw InputError("unknown doc_id \"" + std::string(doc_id) + "\"");
  }
  return documents_[it->second];
}

std::vector<std::string> Corpus::PropIds() const {
  std::vector<std::string> ids;
  ids.reserve(propositions_.size());
  for (const auto& p : propositions_) ids.push_back(p.prop_id);
  return ids;
}

namespace {

std::string RequireString(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw InputError("corpus line " + std::to_string(line) +
                     ": missing string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus ParseCorpus(std::istream& in) {
  std::vector<Document> docs;
  std::vector<Proposition> props;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("corpus line " + std::to_string(line_no) +
                       ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) {
      throw InputError("corpus line " + std::to_string(line_no) +
                       ": expected a JSON object");
    }
    const std::string kind = RequireString(obj, "kind", line_no);
    if (kind == "doc") {
      docs.push_back({RequireString(obj, "doc_id", line_no),
                      RequireString(obj, "title", line_no),
                      RequireString(obj, "text", line_no)});
    } else if (kind == "prop") {
      auto ord = obj.find("ordinal");
      if (ord == obj.end() || !ord->is_number_unsigned()) {
        throw InputError("corpus line " + std::to_string(line_no) +
                         ": \"ordinal\" must be a non-negative integer");
      }
      props.push_back({RequireString(obj, "prop_id", line_no),
                       RequireString(obj, "doc_id", line_no),
                       RequireString(obj, "text", line_no),
                       ord->get<std::uint32_t>()});
    } else {
      throw InputError("corpus line " + std::to_string(line_no) +
                       ": unknown kind \"" + kind + "\"");
    }
  }
  return Corpus::FromRecords(std::move(docs), std::move(props));
}

Corpus LoadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus " + path);
  return ParseCorpus(in);
}

void WriteCorpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.documents()) {
    nlohmann::ordered_json j;
    j["kind"] = "doc";
    j["doc_id"] = d.doc_id;
    j["title"] = d.title;
    j["text"] = d.text;
    out << j.dump() << '\n';
  }
  for (const auto& p : corpus.propositions()) {
    nlohmann::ordered_json j;
    j["kind"] = "prop";
    j["prop_id"] = p.prop_id;
    j["doc_id"] = p.doc_id;
    j["ordinal"] = p.ordinal;
    j["text"] = p.text;
    out << j.dump() << '\n';
  }
}

std::vector<std::string> DocsOf(const Corpus& corpus,
                                std::span<const std::string> prop_ids) {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& id : prop_ids) {
    const std::string& doc = corpus.DocOf(id);
    if (seen.insert(doc).second) out.push_back(doc);
  }
  return out;
}

}  // namespace hashrag
