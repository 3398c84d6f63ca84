#include "hashrag/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "hashrag/error.hpp"

namespace hashrag {

using nlohmann::json;

namespace {

json ParseLine(const std::string& line, const char* what, std::size_t line_no) {
  try {
    json obj = json::parse(line);
    if (!obj.is_object()) throw InputError(std::string(what) + " line " +
                                           std::to_string(line_no) + ": expected object");
    return obj;
  } catch (const json::parse_error& e) {
    throw InputError(std::string(what) + " line " + std::to_string(line_no) +
                     ": malformed JSON (" + e.what() + ")");
  }
}

std::vector<std::string> Strings(const json& obj, const char* key, const char* what,
                                 std::size_t line_no, bool required) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) {
      throw InputError(std::string(what) + " line " + std::to_string(line_no) +
                       ": missing array \"" + key + "\"");
    }
    return out;
  }
  if (!it->is_array()) {
    throw InputError(std::string(what) + " line " + std::to_string(line_no) + ": \"" +
                     key + "\" must be an array");
  }
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw InputError(std::string(what) + " line " + std::to_string(line_no) + ": \"" +
                       key + "\" must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string QueryId(const json& obj, const char* what, std::size_t line_no) {
  auto it = obj.find("query_id");
  if (it == obj.end() || !it->is_string()) {
    throw InputError(std::string(what) + " line " + std::to_string(line_no) +
                     ": missing string field \"query_id\"");
  }
  return it->get<std::string>();
}

bool Blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

QrelSet ParseQrels(std::istream& in) {
  QrelSet qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Blank(line)) continue;
    const json obj = ParseLine(line, "qrels", line_no);
    const std::string qid = QueryId(obj, "qrels", line_no);
    auto docs = Strings(obj, "relevant_docs", "qrels", line_no, true);
    auto props = Strings(obj, "relevant_props", "qrels", line_no, false);
    if (docs.empty()) {
      throw InputError("qrels line " + std::to_string(line_no) +
                       ": empty relevance set for " + qid);
    }
    auto& rel = qrels[qid];
    rel.docs.insert(docs.begin(), docs.end());
    rel.props.insert(props.begin(), props.end());
  }
  return qrels;
}

QrelSet LoadQrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open qrels " + path);
  return ParseQrels(in);
}

void WriteQrels(std::ostream& out, const QrelSet& qrels) {
  for (const auto& [qid, rel] : qrels) {
    nlohmann::ordered_json j;
    j["query_id"] = qid;
    j["relevant_docs"] = rel.docs;
    if (!rel.props.empty()) j["relevant_props"] = rel.props;
    out << j.dump() << '\n';
  }
}

std::vector<QueryRecord> ParseQueries(std::istream& in) {
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Blank(line)) continue;
    const json obj = ParseLine(line, "queries", line_no);
    QueryRecord q;
    q.query_id = QueryId(obj, "queries", line_no);
    auto text = obj.find("text");
    if (text != obj.end() && text->is_string()) q.text = text->get<std::string>();
    q.gold_answers = Strings(obj, "gold_answers", "queries", line_no, false);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QueryRecord> LoadQueries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open queries " + path);
  return ParseQueries(in);
}

void WriteQueries(std::ostream& out, std::span<const QueryRecord> queries) {
  for (const auto& q : queries) {
    nlohmann::ordered_json j;
    j["query_id"] = q.query_id;
    j["text"] = q.text;
    j["gold_answers"] = q.gold_answers;
    out << j.dump() << '\n';
  }
}

double RecallAtK(std::span<const std::string> retrieved,
                 const std::set<std::string>& relevant, std::size_t k) {
  const std::size_t top = std::min(k, retrieved.size());
  for (std::size_t i = 0; i < top; ++i) {
    if (relevant.contains(retrieved[i])) return 1.0;
  }
  return 0.0;
}

double AveragePrecision(std::span<const std::string> ranked,
                        const std::set<std::string>& relevant) {
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.contains(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double MeanAveragePrecision(const std::map<std::string, std::vector<std::string>>& runs,
                            const QrelSet& qrels, Level level) {
  if (runs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [qid, ranked] : runs) {
    auto it = qrels.find(qid);
    if (it == qrels.end()) throw InputError("query " + qid + " missing from qrels");
    const auto& rel = level == Level::kDocument ? it->second.docs : it->second.props;
    total += AveragePrecision(ranked, rel);
  }
  return total / static_cast<double>(runs.size());
}

std::string NormalizeAnswer(const std::string& text) {
  std::string out;
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    std::size_t b = 0, e = word.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
    if (b == e) continue;
    if (!out.empty()) out += ' ';
    for (std::size_t i = b; i < e; ++i) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
    }
  }
  return out;
}

bool ExactMatch(const std::string& prediction, std::span<const std::string> gold) {
  const std::string pred = NormalizeAnswer(prediction);
  for (const auto& g : gold) {
    const std::string norm = NormalizeAnswer(g);
    if (!norm.empty() && pred.find(norm) != std::string::npos) return true;
  }
  return false;
}

ProjectionHead LshHyperplanes(std::size_t dim, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd w(bits, dim);
  for (std::size_t r = 0; r < bits; ++r)
    for (std::size_t c = 0; c < dim; ++c) w(r, c) = gauss(rng);
  return ProjectionHead(std::move(w), Eigen::VectorXd::Zero(bits));
}

CodeMatrix LshBaseline(const EmbeddingMatrix& embeddings, std::size_t bits,
                       std::uint64_t seed) {
  if (bits == 0 || bits % 64 != 0) {
    throw InputError("code length " + std::to_string(bits) + " is not divisible by 64");
  }
  const ProjectionHead planes = LshHyperplanes(embeddings.dim(), bits, seed);
  return CodeMatrix::FromReal(ProjectRows(planes, embeddings));
}

SynthData SynthCorpus(const SynthConfig& config) {
  if (config.n_clusters == 0 || config.per_cluster == 0 || config.dim == 0) {
    throw InputError("synthetic corpus sizes must be positive");
  }
  const double qnoise = config.query_noise < 0.0 ? config.noise : config.query_noise;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t dim = config.dim;

  auto pad = [](std::size_t v, int width) {
    std::ostringstream s;
    s << std::setw(width) << std::setfill('0') << v;
    return s.str();
  };

  std::vector<std::vector<double>> centers(config.n_clusters, std::vector<double>(dim));
  for (auto& c : centers) {
    double norm = 0.0;
    for (auto& v : c) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : c) v /= norm;
  }
  auto perturb = [&](const std::vector<double>& center, double sigma,
                     std::vector<float>& out) {
    for (std::size_t k = 0; k < dim; ++k) {
      out.push_back(static_cast<float>(center[k] + sigma * gauss(rng)));
    }
  };

  std::vector<Document> docs;
  std::vector<Proposition> props;
  std::vector<std::string> prop_ids;
  std::vector<float> prop_data;
  std::vector<std::vector<std::string>> members(config.n_clusters);
  for (std::size_t c = 0; c < config.n_clusters; ++c) {
    const std::string doc_id = "doc-" + pad(c, 3);
    docs.push_back({doc_id, "Cluster " + std::to_string(c),
                    "Synthetic document for cluster " + std::to_string(c) + "."});
    for (std::size_t i = 0; i < config.per_cluster; ++i) {
      const std::string pid = "c" + pad(c, 3) + "-p" + pad(i, 4);
      props.push_back({pid, doc_id,
                       "Proposition " + std::to_string(i) + " of cluster " +
                           std::to_string(c) + ".",
                       static_cast<std::uint32_t>(i)});
      prop_ids.push_back(pid);
      members[c].push_back(pid);
      perturb(centers[c], config.noise, prop_data);
    }
  }

  SynthData data{Corpus::FromRecords(std::move(docs), std::move(props)),
                 EmbeddingMatrix(prop_ids, dim, std::move(prop_data)),
                 {}, {}, {}, {}, {}};

  std::vector<std::string> qids;
  std::vector<float> qdata;
  for (std::size_t q = 0; q < config.queries; ++q) {
    const std::size_t c = q % config.n_clusters;
    const std::string qid = "q" + pad(q, 5);
    qids.push_back(qid);
    perturb(centers[c], qnoise, qdata);
    data.queries.push_back({qid, "Which cluster is query " + std::to_string(q) + " about?",
                            {"Cluster " + std::to_string(c)}});
    auto& rel = data.qrels[qid];
    rel.docs.insert("doc-" + pad(c, 3));
    rel.props.insert(members[c].begin(), members[c].end());
  }
  data.query_embeddings = EmbeddingMatrix(std::move(qids), dim, std::move(qdata));

  std::vector<std::string> tids;
  std::vector<float> tdata;
  for (std::size_t c = 0; c < config.n_clusters; ++c) {
    for (std::size_t t = 0; t < config.train_queries_per_cluster; ++t) {
      const std::string tid = "t" + pad(c, 3) + "-" + pad(t, 4);
      tids.push_back(tid);
      perturb(centers[c], qnoise, tdata);
      TrainingTriple triple{tid, members[c], {}};
      if (config.n_clusters > 1) {
        std::uniform_int_distribution<std::size_t> other(0, config.n_clusters - 2);
        std::uniform_int_distribution<std::size_t> member(0, config.per_cluster - 1);
        for (std::size_t k = 0; k < config.negatives_per_triple; ++k) {
          std::size_t oc = other(rng);
          if (oc >= c) ++oc;
          triple.negative.push_back(members[oc][member(rng)]);
        }
      }
      data.triples.push_back(std::move(triple));
    }
  }
  data.train_query_embeddings = EmbeddingMatrix(std::move(tids), dim, std::move(tdata));
  return data;
}

std::vector<EvalQuery> MakeQueries(const ProjectionHead& head,
                                   const EmbeddingMatrix& query_embeddings) {
  const Eigen::MatrixXd z = ProjectRows(head, query_embeddings);
  std::vector<EvalQuery> out;
  out.reserve(query_embeddings.rows());
  std::vector<double> row(head.bits());
  for (std::size_t i = 0; i < query_embeddings.rows(); ++i) {
    for (std::size_t k = 0; k < head.bits(); ++k) row[k] = z(i, k);
    out.push_back({query_embeddings.ids()[i], QueryCode::FromReal(row)});
  }
  return out;
}

std::vector<QueryRun> RetrieveAll(const HammingIndex& index, const Corpus& corpus,
                                  std::span<const EvalQuery> queries,
                                  const EvalConfig& config) {
  if (queries.empty()) throw InputError("empty query set");
  if (index.size() != corpus.size()) {
    throw InputError("index has " + std::to_string(index.size()) +
                     " rows, corpus has " + std::to_string(corpus.size()));
  }
  const std::size_t alpha = std::min(config.alpha, index.size());
  std::vector<QueryRun> runs(queries.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      QueryRun& run = runs[i];
      run.query_id = queries[i].query_id;
      const CandidateSet top =
          Retrieve(index, queries[i].code, alpha, config.j_props, &run.stats);
      for (const auto& c : top) run.props.push_back(index.id(c.row));
      run.docs = DocsOf(corpus, run.props);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, queries.size()));
  if (workers == 1) {
    work(0, queries.size());
  } else {
    // Each worker owns a contiguous slice of `runs`.
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(queries.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return runs;
}

std::vector<QueryRun> ExactScanRuns(const Corpus& corpus,
                                    const EmbeddingMatrix& prop_embeddings,
                                    const EmbeddingMatrix& query_embeddings,
                                    std::size_t top) {
  const std::vector<std::string> ids = corpus.PropIds();
  const Eigen::MatrixXd props = AlignedRows(prop_embeddings, ids);
  if (query_embeddings.dim() != prop_embeddings.dim()) {
    throw InputError("query and proposition embeddings differ in dim");
  }
  top = std::min(top, ids.size());
  std::vector<QueryRun> runs;
  std::vector<std::size_t> order(ids.size());
  for (std::size_t q = 0; q < query_embeddings.rows(); ++q) {
    auto row = query_embeddings.row(q);
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t k = 0; k < row.size(); ++k) v(k) = row[k];
    const Eigen::VectorXd scores = props * v;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return scores(a) != scores(b) ? scores(a) > scores(b) : a < b;
                      });
    QueryRun run;
    run.query_id = query_embeddings.ids()[q];
    for (std::size_t i = 0; i < top; ++i) run.props.push_back(ids[order[i]]);
    run.docs = DocsOf(corpus, run.props);
    runs.push_back(std::move(run));
  }
  return runs;
}

EvalReport ScoreRuns(std::span<const QueryRun> runs, const QrelSet& qrels,
                     std::span<const std::size_t> ks) {
  if (runs.empty()) throw InputError("empty query set");
  EvalReport report;
  report.queries = runs.size();
  bool with_props = true;
  std::map<std::string, std::vector<std::string>> doc_runs, prop_runs;
  for (const auto& run : runs) {
    auto it = qrels.find(run.query_id);
    if (it == qrels.end()) throw InputError("query " + run.query_id + " missing from qrels");
    with_props = with_props && !it->second.props.empty();
    for (std::size_t k : ks) {
      report.recall_at_k[k] += RecallAtK(run.docs, it->second.docs, k);
      report.prop_recall_at_k[k] += RecallAtK(run.props, it->second.props, k);
    }
    doc_runs[run.query_id] = run.docs;
    prop_runs[run.query_id] = run.props;
  }
  const double count = static_cast<double>(runs.size());
  for (auto& [k, v] : report.recall_at_k) v /= count;
  for (auto& [k, v] : report.prop_recall_at_k) v /= count;
  report.map = MeanAveragePrecision(doc_runs, qrels, Level::kDocument);
  if (with_props) {
    report.prop_map = MeanAveragePrecision(prop_runs, qrels, Level::kProposition);
  } else {
    report.prop_recall_at_k.clear();
  }

  std::vector<double> ns;
  for (const auto& run : runs) ns.push_back(static_cast<double>(run.stats.nanoseconds));
  std::sort(ns.begin(), ns.end());
  report.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / count;
  const std::size_t mid = ns.size() / 2;
  report.median_ns = ns.size() % 2 ? ns[mid] : 0.5 * (ns[mid - 1] + ns[mid]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * count));
  report.p99_ns = ns[std::max<std::size_t>(rank, 1) - 1];
  return report;
}

EvalReport RunEval(const HammingIndex& index, const Corpus& corpus,
                   std::span<const EvalQuery> queries, const QrelSet& qrels,
                   const EvalConfig& config) {
  const auto runs = RetrieveAll(index, corpus, queries, config);
  EvalReport report = ScoreRuns(runs, qrels, config.ks);
  report.index_bytes = index.ByteSize();
  return report;
}

json EvalReport::ToJson() const {
  json j;
  j["queries"] = queries;
  json recall = json::object();
  for (const auto& [k, v] : recall_at_k) recall[std::to_string(k)] = v;
  j["recall_at_k"] = recall;
  j["map"] = map;
  if (prop_map) {
    json prop_recall = json::object();
    for (const auto& [k, v] : prop_recall_at_k) prop_recall[std::to_string(k)] = v;
    j["prop_recall_at_k"] = prop_recall;
    j["prop_map"] = *prop_map;
  }
  j["em"] = em ? json(*em) : json(nullptr);
  j["latency_ns"] = {{"mean", mean_ns}, {"median", median_ns}, {"p99", p99_ns}};
  j["index_bytes"] = index_bytes;
  return j;
}

std::string EvalReport::ToCsv(const std::string& label) const {
  std::ostringstream out;
  out << "model";
  for (const auto& [k, v] : recall_at_k) out << ",top" << k;
  out << ",index_bytes,query_ms\n";
  out << label;
  out << std::fixed << std::setprecision(1);
  for (const auto& [k, v] : recall_at_k) out << ',' << 100.0 * v;
  out << ',' << index_bytes << std::setprecision(4) << ',' << mean_ns / 1e6 << '\n';
  return out.str();
}

}  // namespace hashrag
