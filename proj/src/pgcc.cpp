#include "hashrag/pgcc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hashrag/error.hpp"

namespace hashrag {

const char* const kDefaultInstruction =
    "Answer the question using the retrieved segments below. Each segment names "
    "the document it was taken from; read the matching indexed document when a "
    "segment lacks context. Reply with a short phrase.";

double HybridScore(double doc_score, std::span<const double> prop_scores,
                   std::span<const double> weights, double alpha_mix) {
  if (prop_scores.size() != weights.size()) {
    throw InputError("hybrid score: " + std::to_string(prop_scores.size()) +
                     " scores but " + std::to_string(weights.size()) + " weights");
  }
  if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0)) {
    throw InputError("hybrid score: alpha_mix must lie in [0,1]");
  }
  double weight_sum = 0.0;
  double blended = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] < 0.0) throw InputError("hybrid score: negative weight");
    weight_sum += weights[k];
    blended += weights[k] * prop_scores[k];
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw InputError("hybrid score: weights sum to " + std::to_string(weight_sum) +
                     ", expected 1");
  }
  return alpha_mix * doc_score + (1.0 - alpha_mix) * blended;
}

std::vector<ScoredProposition> ScorePropositions(const Corpus& corpus,
                                                 std::span<const RankedProposition> ranked,
                                                 double alpha_mix) {
  std::vector<ScoredProposition> out;
  if (ranked.empty()) return out;
  auto [lo, hi] = std::minmax_element(
      ranked.begin(), ranked.end(),
      [](const auto& a, const auto& b) { return a.score < b.score; });
  const double min = lo->score, span = hi->score - lo->score;

  std::unordered_map<std::string, std::vector<double>> children;
  for (const auto& r : ranked) {
    ScoredProposition s;
    s.prop_id = r.prop_id;
    s.doc_id = corpus.DocOf(r.prop_id);
    s.prop_score = span > 0.0 ? (r.score - min) / span : 1.0;
    children[s.doc_id].push_back(s.prop_score);
    out.push_back(std::move(s));
  }
  std::unordered_map<std::string, double> doc_score;
  for (const auto& [doc, scores] : children) {
    const double x_doc = *std::max_element(scores.begin(), scores.end());
    const std::vector<double> w(scores.size(), 1.0 / static_cast<double>(scores.size()));
    doc_score[doc] = HybridScore(x_doc, scores, w, alpha_mix);
  }
  for (auto& s : out) s.final_score = doc_score[s.doc_id];
  return out;
}

nlohmann::json PromptBundle::ToJson() const {
  nlohmann::ordered_json j;
  j["additional_prompt"] = additional_prompt;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& s : segments) {
    segs.push_back({{"idx_id", s.idx_id}, {"title", s.title}, {"text", s.text}});
  }
  j["retrieved_segments"] = segs;
  auto docs = nlohmann::ordered_json::array();
  for (const auto& d : documents) {
    docs.push_back({{"id", d.id}, {"title", d.title}, {"text", d.text}});
  }
  j["indexed_documents"] = docs;
  j["question"] = question;
  return nlohmann::json::parse(j.dump());
}

PromptBundle AssembleContext(const Corpus& corpus, std::span<const std::string> ranked_props,
                             std::size_t k_docs) {
  if (k_docs == 0) throw InputError("k_docs must be at least 1");
  PromptBundle bundle;
  std::vector<std::string> docs = DocsOf(corpus, ranked_props);
  if (docs.size() > k_docs) docs.resize(k_docs);
  const std::unordered_set<std::string> kept(docs.begin(), docs.end());
  for (const auto& prop_id : ranked_props) {
    const auto& p = corpus.prop(*corpus.PropIndex(prop_id));
    if (!kept.contains(p.doc_id)) continue;
    bundle.segments.push_back({p.doc_id, corpus.document(p.doc_id).title, p.text});
  }
  for (const auto& doc_id : docs) {
    const auto& d = corpus.document(doc_id);
    bundle.documents.push_back({d.doc_id, d.title, d.text});
  }
  return bundle;
}

namespace {

constexpr const char* kSlots[] = {"ADDITIONAL_PROMPT", "SEGMENTS", "DOCUMENTS", "QUESTION"};

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  std::size_t last = 0;
  for (const char* slot : kSlots) {
    const std::string token = std::string("{") + slot + "}";
    const std::size_t at = text_.find(token);
    if (at == std::string::npos) {
      throw InputError("template is missing placeholder " + token);
    }
    if (text_.find(token, at + 1) != std::string::npos) {
      throw InputError("template repeats placeholder " + token);
    }
    if (at < last) throw InputError("template placeholder " + token + " out of order");
    last = at;
  }
}

PromptTemplate PromptTemplate::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open template " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(std::move(buf).str());
}

std::string RenderPrompt(const PromptBundle& bundle, const PromptTemplate& tmpl) {
  if (bundle.segments.empty()) throw Error(ErrorKind::kEmptyResult, "no retrieved segments");
  std::unordered_set<std::string> doc_ids;
  for (const auto& d : bundle.documents) doc_ids.insert(d.id);
  for (const auto& s : bundle.segments) {
    if (!doc_ids.contains(s.idx_id)) {
      throw InputError("segment references IdxID " + s.idx_id +
                       " missing from indexed documents");
    }
  }

  std::string segments;
  for (std::size_t i = 0; i < bundle.segments.size(); ++i) {
    const auto& s = bundle.segments[i];
    if (i > 0) segments += '\n';
    segments += "IdxID:" + s.idx_id + " Title: " + s.title + "\nPropositions: " + s.text + "\n";
  }
  std::string documents;
  for (std::size_t i = 0; i < bundle.documents.size(); ++i) {
    const auto& d = bundle.documents[i];
    if (i > 0) documents += '\n';
    documents += "ID=" + d.id + " Title: " + d.title + "\nDoc: " + d.text + "\n";
  }

  // Single pass over the template so substituted text is never rescanned.
  const std::string& t = tmpl.text();
  std::string out;
  std::size_t pos = 0;
  while (pos < t.size()) {
    const std::size_t open = t.find('{', pos);
    if (open == std::string::npos) {
      out.append(t, pos);
      break;
    }
    out.append(t, pos, open - pos);
    const std::size_t close = t.find('}', open);
    const std::string name = close == std::string::npos ? "" : t.substr(open + 1, close - open - 1);
    const bool placeholder =
        !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
          return (c >= 'A' && c <= 'Z') || c == '_';
        });
    if (!placeholder) {
      out += '{';
      pos = open + 1;
      continue;
    }
    if (name == "ADDITIONAL_PROMPT") {
      out += bundle.additional_prompt;
    } else if (name == "SEGMENTS") {
      out += segments;
    } else if (name == "DOCUMENTS") {
      out += documents;
    } else if (name == "QUESTION") {
      out += bundle.question;
    } else {
      throw InputError("unresolved template placeholder {" + name + "}");
    }
    pos = close + 1;
  }
  return out;
}

}  // namespace hashrag
