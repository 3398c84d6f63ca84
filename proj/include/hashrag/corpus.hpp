#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hashrag {

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
};

// An atomic factual sentence; the retrieval unit.
struct Proposition {
  std::string prop_id;
  std::string doc_id;
  std::string text;
  std::uint32_t ordinal = 0;
};

// Documents plus the ordered proposition list. Proposition order defines the
// row order of every code matrix and index built over the corpus.
// Immutable after construction.
class Corpus {
 public:
  // Validates ids, references, ordinals and non-empty text. Throws
  // hashrag::Error on the first violation.
  static Corpus FromRecords(std::vector<Document> documents,
                            std::vector<Proposition> propositions);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<Proposition>& propositions() const { return propositions_; }

  std::size_t size() const { return propositions_.size(); }

  std::optional<std::size_t> PropIndex(std::string_view prop_id) const;
  const Proposition& prop(std::size_t row) const { return propositions_[row]; }

  // Parent document of a proposition. Throws on unknown ids.
  const std::string& DocOf(std::string_view prop_id) const;
  const Document& document(std::string_view doc_id) const;

  std::vector<std::string> PropIds() const;

 private:
  Corpus() = default;

  std::vector<Document> documents_;
  std::vector<Proposition> propositions_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::unordered_map<std::string, std::size_t> prop_index_;
};

// JSONL, one record per line with "kind" = "doc" | "prop". Documents and
// propositions may interleave; reference checks run after the last line.
Corpus ParseCorpus(std::istream& in);
Corpus LoadCorpus(const std::string& path);

// Canonical form: all documents first, then all propositions, fixed key order.
void WriteCorpus(std::ostream& out, const Corpus& corpus);

// Parent documents of the given propositions, duplicates removed, first
// occurrence order kept.
std::vector<std::string> DocsOf(const Corpus& corpus,
                                std::span<const std::string> prop_ids);

}  // namespace hashrag
