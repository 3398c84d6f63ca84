#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hashrag/codes.hpp"
#include "hashrag/corpus.hpp"
#include "hashrag/embedding.hpp"
#include "hashrag/hamming_index.hpp"
#include "hashrag/trainer.hpp"

namespace hashrag {

struct Relevance {
  std::set<std::string> docs;
  std::set<std::string> props;  // optional, may be empty
};

using QrelSet = std::map<std::string, Relevance>;

// JSONL: {"query_id":..., "relevant_docs":[...], "relevant_props":[...]?}
QrelSet ParseQrels(std::istream& in);
QrelSet LoadQrels(const std::string& path);
void WriteQrels(std::ostream& out, const QrelSet& qrels);

struct QueryRecord {
  std::string query_id;
  std::string text;
  std::vector<std::string> gold_answers;
};

// JSONL: {"query_id":..., "text":..., "gold_answers":[...]}
std::vector<QueryRecord> ParseQueries(std::istream& in);
std::vector<QueryRecord> LoadQueries(const std::string& path);
void WriteQueries(std::ostream& out, std::span<const QueryRecord> queries);

enum class Level { kDocument, kProposition };

// 1 if any of the first k retrieved items is relevant, else 0.
double RecallAtK(std::span<const std::string> retrieved,
                 const std::set<std::string>& relevant, std::size_t k);

// Sum of precision at each relevant hit, divided by |relevant|.
double AveragePrecision(std::span<const std::string> ranked,
                        const std::set<std::string>& relevant);

// Throws when a run has no qrels entry.
double MeanAveragePrecision(const std::map<std::string, std::vector<std::string>>& runs,
                            const QrelSet& qrels, Level level = Level::kDocument);

// Lowercases, collapses whitespace and strips punctuation at token
// boundaries.
std::string NormalizeAnswer(const std::string& text);

// True iff some normalized gold answer is a substring of the normalized
// prediction.
bool ExactMatch(const std::string& prediction, std::span<const std::string> gold);

// Random-hyperplane hashing: Gaussian bits x dim weights, zero bias.
ProjectionHead LshHyperplanes(std::size_t dim, std::size_t bits, std::uint64_t seed);
// Codes for every row of `embeddings`, in row order. bits % 64 == 0.
CodeMatrix LshBaseline(const EmbeddingMatrix& embeddings, std::size_t bits,
                       std::uint64_t seed);

struct SynthConfig {
  std::size_t n_clusters = 8;
  std::size_t per_cluster = 125;
  std::size_t dim = 256;
  double noise = 0.1;         // per-coordinate standard deviation
  double query_noise = -1.0;  // negative: same as noise
  std::size_t queries = 100;  // test queries, assigned round-robin to clusters
  std::size_t train_queries_per_cluster = 16;
  std::size_t negatives_per_triple = 8;
  std::uint64_t seed = 7;
};

// Clustered benchmark: unit-norm centers, propositions = center + noise, one
// document per cluster, queries = perturbed centers.
struct SynthData {
  Corpus corpus;
  EmbeddingMatrix prop_embeddings;
  std::vector<QueryRecord> queries;
  EmbeddingMatrix query_embeddings;
  QrelSet qrels;
  std::vector<TrainingTriple> triples;
  EmbeddingMatrix train_query_embeddings;
};

SynthData SynthCorpus(const SynthConfig& config);

struct QueryRun {
  std::string query_id;
  std::vector<std::string> props;  // ranked
  std::vector<std::string> docs;   // deduplicated parents, rank order
  QueryStats stats;
};

struct EvalConfig {
  std::size_t alpha = 1000;   // radius-expansion candidate target
  std::size_t j_props = 100;  // propositions kept after re-ranking
  std::vector<std::size_t> ks = {5, 20, 100};
  std::size_t workers = 1;
};

struct EvalReport {
  std::size_t queries = 0;
  std::map<std::size_t, double> recall_at_k;
  double map = 0.0;
  // Present when every query has relevant propositions.
  std::map<std::size_t, double> prop_recall_at_k;
  std::optional<double> prop_map;
  std::optional<double> em;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p99_ns = 0.0;
  std::size_t index_bytes = 0;

  nlohmann::json ToJson() const;
  // Header plus one row: recall@k columns, index bytes, mean query ms.
  std::string ToCsv(const std::string& label) const;
};

struct EvalQuery {
  std::string query_id;
  QueryCode code;
};

// Projects query embeddings through `head` into query codes.
std::vector<EvalQuery> MakeQueries(const ProjectionHead& head,
                                   const EmbeddingMatrix& query_embeddings);

// Retrieves every query (radius expansion + re-ranking). Only the retrieval
// itself is timed.
std::vector<QueryRun> RetrieveAll(const HammingIndex& index, const Corpus& corpus,
                                  std::span<const EvalQuery> queries,
                                  const EvalConfig& config);

// Exact inner-product ranking over float embeddings; the quality ceiling.
std::vector<QueryRun> ExactScanRuns(const Corpus& corpus,
                                    const EmbeddingMatrix& prop_embeddings,
                                    const EmbeddingMatrix& query_embeddings,
                                    std::size_t top);

// Metrics over finished runs; latency is taken from run stats.
EvalReport ScoreRuns(std::span<const QueryRun> runs, const QrelSet& qrels,
                     std::span<const std::size_t> ks);

EvalReport RunEval(const HammingIndex& index, const Corpus& corpus,
                   std::span<const EvalQuery> queries, const QrelSet& qrels,
                   const EvalConfig& config);

}  // namespace hashrag
