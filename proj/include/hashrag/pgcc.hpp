#pragma once

// Chunk-to-context assembly: maps ranked propositions back to their source
// documents and renders the generator prompt.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hashrag/corpus.hpp"

namespace hashrag {

// alpha_mix * doc_score + (1 - alpha_mix) * sum_k w_k x_k.
// Weights must be non-negative and sum to 1 within 1e-9.
double HybridScore(double doc_score, std::span<const double> prop_scores,
                   std::span<const double> weights, double alpha_mix);

struct RankedProposition {
  std::string prop_id;
  double score = 0.0;  // raw re-ranking score
};

struct ScoredProposition {
  std::string prop_id;
  double prop_score = 0.0;   // min-max normalized retrieval score
  std::string doc_id;
  double final_score = 0.0;  // hybrid score of the parent document
};

// Normalizes the scores of one query's ranking to [0,1] (all 1 when they are
// equal), takes a document's score as the max over its retained
// propositions, and blends with uniform weights over those propositions.
// Output keeps the input order.
std::vector<ScoredProposition> ScorePropositions(const Corpus& corpus,
                                                 std::span<const RankedProposition> ranked,
                                                 double alpha_mix);

struct Segment {
  std::string idx_id;  // parent document id
  std::string title;
  std::string text;
};

struct IndexedDocument {
  std::string id;
  std::string title;
  std::string text;
};

struct PromptBundle {
  std::string additional_prompt;
  std::vector<Segment> segments;
  std::vector<IndexedDocument> documents;
  std::string question;

  nlohmann::json ToJson() const;
};

extern const char* const kDefaultInstruction;

// Keeps the first k_docs distinct parents in rank order, and the segments
// (in rank order) whose parent survived.
PromptBundle AssembleContext(const Corpus& corpus, std::span<const std::string> ranked_props,
                             std::size_t k_docs);

// Template text with {ADDITIONAL_PROMPT}, {SEGMENTS}, {DOCUMENTS} and
// {QUESTION}, each exactly once and in that order.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);
  static PromptTemplate Load(const std::string& path);

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

// Segment block:   "IdxID:<id> Title: <title>\nPropositions: <text>\n"
// Document block:  "ID=<id> Title: <title>\nDoc: <text>\n"
// Blocks are separated by one blank line.
std::string RenderPrompt(const PromptBundle& bundle, const PromptTemplate& tmpl);

}  // namespace hashrag
