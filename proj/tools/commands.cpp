#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hashrag/codes.hpp"
#include "hashrag/corpus.hpp"
#include "hashrag/embedding.hpp"
#include "hashrag/error.hpp"
#include "hashrag/eval.hpp"
#include "hashrag/hamming_index.hpp"
#include "hashrag/pgcc.hpp"
#include "hashrag/trainer.hpp"

namespace hashrag::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct TrainArgs {
  std::string corpus, embeddings, triples, query_embeddings;
  std::string head_out = "head.hrh", codes_out = "codes.hrc", report_out = "train_report.json";
  std::string mode = "sampled";
  std::string baseline = "none";
  TrainConfig config;
};

struct IndexArgs {
  std::string codes, corpus, index_out = "index.hri";
};

struct RetrievalArgs {
  std::size_t alpha = 1000;
  std::size_t j_props = 100;
  std::size_t k_docs = 20;
  double alpha_mix = 0.5;
};

struct QueryArgs {
  std::string index, corpus, head, query_embeddings, query_id, out;
  RetrievalArgs retrieval;
};

struct EvalArgs {
  std::string index, corpus, head, query_embeddings, queries, qrels, predictions;
  std::string report_out = "eval_report.json", csv_out, label = "hash";
  std::vector<std::size_t> ks = {5, 20, 100};
  std::size_t workers = 1;
  RetrievalArgs retrieval;
};

struct PromptArgs {
  std::string corpus, tmpl, result, queries, question, instruction, out;
  std::size_t k_docs = 20;
  bool k_docs_set = false;
};

struct SynthArgs {
  std::string out_dir = ".";
  SynthConfig config;
};

void RequirePath(const std::string& path, const char* flag) {
  if (path.empty()) throw InputError(std::string("missing required ") + flag);
  if (!fs::exists(path)) throw InputError(std::string(flag) + ": no such file " + path);
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("write failed: " + path);
}

int CmdTrain(const TrainArgs& a, std::ostream& out) {
  RequirePath(a.corpus, "--corpus");
  RequirePath(a.embeddings, "--embeddings");
  const Corpus corpus = LoadCorpus(a.corpus);
  const EmbeddingMatrix props = LoadEmbeddings(a.embeddings);

  if (a.baseline == "lsh") {
    a.config.Validate();
    const ProjectionHead head =
        LshHyperplanes(props.dim(), a.config.bits, DeriveSeed(a.config.seed, 100));
    const Eigen::MatrixXd rows = AlignedRows(props, corpus.PropIds());
    Eigen::MatrixXd z = rows * head.weights().transpose();
    SaveHead(a.head_out, head);
    SaveCodes(a.codes_out, CodeMatrix::FromReal(z));
    json report{{"baseline", "lsh"}, {"bits", a.config.bits}};
    WriteText(a.report_out, report.dump(2) + "\n");
    out << "wrote " << a.head_out << ", " << a.codes_out << ", " << a.report_out << "\n";
    return kOk;
  }

  TrainConfig config = a.config;
  config.mode = a.mode == "labeled" ? SupervisionMode::kLabeled : SupervisionMode::kSampled;
  std::vector<TrainingTriple> triples;
  if (!a.triples.empty()) {
    RequirePath(a.triples, "--triples");
    triples = LoadTriples(a.triples);
  }
  EmbeddingMatrix queries;
  const EmbeddingMatrix* query_ptr = nullptr;
  if (config.mode == SupervisionMode::kLabeled) {
    RequirePath(a.triples, "--triples");
    RequirePath(a.query_embeddings, "--query-embeddings");
    queries = LoadEmbeddings(a.query_embeddings);
    query_ptr = &queries;
  }
  const TrainResult result = Train(corpus, props, config, triples, query_ptr);
  SaveHead(a.head_out, result.head);
  SaveCodes(a.codes_out, result.codes);
  json report = result.report.ToJson();
  report["bits"] = config.bits;
  report["gamma"] = config.gamma;
  report["seed"] = config.seed;
  WriteText(a.report_out, report.dump(2) + "\n");
  out << "wrote " << a.head_out << ", " << a.codes_out << ", " << a.report_out << "\n";
  return kOk;
}

int CmdBuildIndex(const IndexArgs& a, std::ostream& out) {
  RequirePath(a.codes, "--codes");
  RequirePath(a.corpus, "--corpus");
  const Corpus corpus = LoadCorpus(a.corpus);
  const CodeMatrix codes = LoadCodes(a.codes);
  if (codes.rows() != corpus.size()) {
    throw InputError("code file has " + std::to_string(codes.rows()) +
                     " rows, corpus has " + std::to_string(corpus.size()) + " propositions");
  }
  const HammingIndex index = HammingIndex::Build(codes, corpus.PropIds());
  SaveIndex(a.index_out, index);
  out << "wrote " << a.index_out << " (" << index.size() << " codes, " << index.bits()
      << " bits, " << index.ByteSize() << " bytes)\n";
  return kOk;
}

std::size_t SelectQuery(const EmbeddingMatrix& queries, const std::string& query_id) {
  if (!query_id.empty()) {
    auto row = queries.Find(query_id);
    if (!row) throw InputError("query id \"" + query_id + "\" not in query embeddings");
    return *row;
  }
  if (queries.rows() != 1) {
    throw InputError("query embedding file holds " + std::to_string(queries.rows()) +
                     " rows; pass --query-id");
  }
  return 0;
}

int CmdQuery(const QueryArgs& a, std::ostream& out, std::ostream& err) {
  RequirePath(a.index, "--index");
  RequirePath(a.corpus, "--corpus");
  RequirePath(a.head, "--head");
  RequirePath(a.query_embeddings, "--query-embeddings");
  const Corpus corpus = LoadCorpus(a.corpus);
  const HammingIndex index = LoadIndex(a.index);
  const ProjectionHead head = LoadHead(a.head);
  const EmbeddingMatrix queries = LoadEmbeddings(a.query_embeddings);
  if (index.size() != corpus.size()) throw InputError("index and corpus sizes differ");
  if (head.bits() != index.bits()) throw InputError("head and index code lengths differ");
  const std::size_t qrow = SelectQuery(queries, a.query_id);

  json warnings = json::array();
  std::size_t alpha = a.retrieval.alpha, j = a.retrieval.j_props;
  if (alpha > index.size()) {
    warnings.push_back("alpha " + std::to_string(alpha) + " clamped to corpus size " +
                       std::to_string(index.size()));
    alpha = index.size();
  }
  if (j > index.size()) {
    warnings.push_back("j_props " + std::to_string(j) + " clamped to corpus size " +
                       std::to_string(index.size()));
    j = index.size();
  }
  if (alpha == 0 || j == 0) throw InputError("alpha and j_props must be positive");
  for (const auto& w : warnings) err << "warning: " << w.get<std::string>() << "\n";

  const Eigen::VectorXd z = Project(head, queries.row(qrow));
  const QueryCode code = QueryCode::FromReal(std::span<const double>(z.data(), z.size()));
  QueryStats stats;
  const CandidateSet top = Retrieve(index, code, alpha, j, &stats);

  std::vector<RankedProposition> ranked;
  for (const auto& c : top) ranked.push_back({index.id(c.row), c.score});
  const auto scored = ScorePropositions(corpus, ranked, a.retrieval.alpha_mix);

  ordered_json result;
  result["query_id"] = queries.ids()[qrow];
  auto props = ordered_json::array();
  for (std::size_t r = 0; r < top.size(); ++r) {
    props.push_back({{"rank", r + 1},
                     {"prop_id", scored[r].prop_id},
                     {"doc_id", scored[r].doc_id},
                     {"hamming_distance", top[r].distance},
                     {"score", top[r].score},
                     {"prop_score", scored[r].prop_score},
                     {"final_score", scored[r].final_score}});
  }
  result["propositions"] = props;
  std::vector<std::string> prop_ids;
  for (const auto& s : scored) prop_ids.push_back(s.prop_id);
  std::vector<std::string> docs = DocsOf(corpus, prop_ids);
  if (docs.size() > a.retrieval.k_docs) docs.resize(a.retrieval.k_docs);
  auto doc_json = ordered_json::array();
  for (const auto& d : docs) {
    const auto it = std::find_if(scored.begin(), scored.end(),
                                 [&](const auto& s) { return s.doc_id == d; });
    doc_json.push_back({{"doc_id", d},
                        {"title", corpus.document(d).title},
                        {"final_score", it->final_score}});
  }
  result["documents"] = doc_json;
  result["latency_ns"] = stats.nanoseconds;
  result["candidates_examined"] = stats.examined;
  result["radius"] = stats.radius;
  result["warnings"] = warnings;

  const std::string text = result.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    WriteText(a.out, text);
  }
  return kOk;
}

int CmdEvaluate(const EvalArgs& a, std::ostream& out) {
  RequirePath(a.index, "--index");
  RequirePath(a.corpus, "--corpus");
  RequirePath(a.head, "--head");
  RequirePath(a.query_embeddings, "--query-embeddings");
  RequirePath(a.queries, "--queries");
  RequirePath(a.qrels, "--qrels");
  const Corpus corpus = LoadCorpus(a.corpus);
  const HammingIndex index = LoadIndex(a.index);
  const ProjectionHead head = LoadHead(a.head);
  const EmbeddingMatrix embeddings = LoadEmbeddings(a.query_embeddings);
  const auto records = LoadQueries(a.queries);
  const QrelSet qrels = LoadQrels(a.qrels);

  const auto all = MakeQueries(head, embeddings);
  std::vector<EvalQuery> queries;
  for (const auto& r : records) {
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const EvalQuery& q) { return q.query_id == r.query_id; });
    if (it == all.end()) throw InputError("missing embedding for query \"" + r.query_id + "\"");
    queries.push_back(*it);
  }
  EvalConfig config;
  config.alpha = a.retrieval.alpha;
  config.j_props = a.retrieval.j_props;
  config.ks = a.ks;
  config.workers = a.workers;
  EvalReport report = RunEval(index, corpus, queries, qrels, config);

  if (!a.predictions.empty()) {
    RequirePath(a.predictions, "--predictions");
    std::ifstream in(a.predictions);
    std::map<std::string, std::string> predicted;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("query_id") || !j.contains("prediction")) {
        throw InputError("malformed predictions line: " + line);
      }
      predicted[j["query_id"].get<std::string>()] = j["prediction"].get<std::string>();
    }
    std::size_t hits = 0;
    for (const auto& r : records) {
      auto it = predicted.find(r.query_id);
      if (it != predicted.end() && ExactMatch(it->second, r.gold_answers)) ++hits;
    }
    report.em = static_cast<double>(hits) / static_cast<double>(records.size());
  }

  WriteText(a.report_out, report.ToJson().dump(2) + "\n");
  if (!a.csv_out.empty()) WriteText(a.csv_out, report.ToCsv(a.label));
  out << "wrote " << a.report_out << "\n";
  return kOk;
}

int CmdPrompt(const PromptArgs& a, std::ostream& out) {
  RequirePath(a.corpus, "--corpus");
  RequirePath(a.tmpl, "--template");
  RequirePath(a.result, "--result");
  const Corpus corpus = LoadCorpus(a.corpus);
  const PromptTemplate tmpl = PromptTemplate::Load(a.tmpl);

  std::ifstream in(a.result);
  const json result = json::parse(in, nullptr, false);
  if (result.is_discarded() || !result.is_object()) {
    throw InputError("query result " + a.result + " is not a JSON object");
  }
  std::vector<std::string> ranked;
  if (result.contains("propositions")) {
    for (const auto& p : result["propositions"]) ranked.push_back(p.at("prop_id").get<std::string>());
  }
  if (ranked.empty()) throw Error(ErrorKind::kEmptyResult, "query result has no propositions");

  std::string question = a.question;
  if (question.empty() && !a.queries.empty()) {
    RequirePath(a.queries, "--queries");
    const std::string qid = result.value("query_id", "");
    for (const auto& q : LoadQueries(a.queries)) {
      if (q.query_id == qid) question = q.text;
    }
    if (question.empty()) throw InputError("query \"" + qid + "\" not found in " + a.queries);
  }
  if (question.empty()) throw InputError("missing --question or --queries");

  std::size_t k_docs = a.k_docs;
  if (!a.k_docs_set && result.contains("documents") && !result["documents"].empty()) {
    k_docs = result["documents"].size();
  }
  PromptBundle bundle = AssembleContext(corpus, ranked, k_docs);
  bundle.additional_prompt = a.instruction.empty() ? kDefaultInstruction : a.instruction;
  bundle.question = question;
  const std::string prompt = RenderPrompt(bundle, tmpl);
  if (a.out.empty()) {
    out << prompt;
  } else {
    WriteText(a.out, prompt);
  }
  return kOk;
}

int CmdSynth(const SynthArgs& a, std::ostream& out) {
  fs::create_directories(a.out_dir);
  const SynthData data = SynthCorpus(a.config);
  const fs::path dir(a.out_dir);
  {
    std::ofstream f(dir / "corpus.jsonl", std::ios::binary);
    WriteCorpus(f, data.corpus);
  }
  {
    std::ofstream f(dir / "queries.jsonl", std::ios::binary);
    WriteQueries(f, data.queries);
  }
  {
    std::ofstream f(dir / "qrels.jsonl", std::ios::binary);
    WriteQrels(f, data.qrels);
  }
  {
    std::ofstream f(dir / "triples.jsonl", std::ios::binary);
    for (const auto& t : data.triples) {
      ordered_json j;
      j["query_id"] = t.query_id;
      j["positive"] = t.positive;
      j["negative"] = t.negative;
      f << j.dump() << '\n';
    }
  }
  SaveEmbeddings((dir / "props.hre").string(), data.prop_embeddings);
  SaveEmbeddings((dir / "queries.hre").string(), data.query_embeddings);
  SaveEmbeddings((dir / "train_queries.hre").string(), data.train_query_embeddings);
  out << "wrote synthetic corpus (" << data.corpus.size() << " propositions) to "
      << a.out_dir << "\n";
  return kOk;
}

void AddRetrievalOptions(CLI::App* cmd, RetrievalArgs& r) {
  cmd->add_option("--alpha", r.alpha, "Radius-expansion candidate target");
  cmd->add_option("--j-props", r.j_props, "Propositions kept after re-ranking");
  cmd->add_option("--k-docs", r.k_docs, "Documents kept after deduplication");
  cmd->add_option("--alpha-mix", r.alpha_mix, "Document/proposition score blend")
      ->check(CLI::Range(0.0, 1.0));
}

const char* KindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return "input";
    case ErrorKind::kEmptyResult: return "empty-result";
    case ErrorKind::kNumeric: return "numeric";
  }
  return "unknown";
}

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return kInputError;
    case ErrorKind::kEmptyResult: return kEmptyResult;
    case ErrorKind::kNumeric: return kNumericFailure;
  }
  return kInputError;
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hash-based retrieval with proposition-to-document prompt assembly", "hashrag"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();  // --config may follow the subcommand

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Learn proposition codes and the query head");
  train_cmd->add_option("--corpus", train.corpus, "Corpus JSONL");
  train_cmd->add_option("--embeddings", train.embeddings, "Proposition embeddings (HRE1)");
  train_cmd->add_option("--triples", train.triples, "Training triples JSONL");
  train_cmd->add_option("--query-embeddings", train.query_embeddings,
                        "Training query embeddings (labeled mode)");
  train_cmd->add_option("--mode", train.mode, "sampled | labeled")
      ->check(CLI::IsMember({"sampled", "labeled"}));
  train_cmd->add_option("--baseline", train.baseline, "none | lsh (random hyperplanes)")
      ->check(CLI::IsMember({"none", "lsh"}));
  train_cmd->add_option("--bits", train.config.bits, "Code length, multiple of 64");
  train_cmd->add_option("--gamma", train.config.gamma, "Quantization weight");
  train_cmd->add_option("--sigma", train.config.sigma, "Relaxation schedule rate");
  train_cmd->add_option("--epochs", train.config.epochs);
  train_cmd->add_option("--batch-size", train.config.batch_size);
  train_cmd->add_option("--lr", train.config.learning_rate, "SGD learning rate");
  train_cmd->add_option("--samples", train.config.sample_count,
                        "Supervision rows m (0 = all)");
  train_cmd->add_option("--seed", train.config.seed);
  train_cmd->add_flag("--resample", train.config.resample_each_epoch,
                      "Redraw sampled rows every epoch");
  train_cmd->add_option("--head-out", train.head_out);
  train_cmd->add_option("--codes-out", train.codes_out);
  train_cmd->add_option("--report-out", train.report_out);

  IndexArgs index;
  auto* index_cmd = app.add_subcommand("build-index", "Pack a code file into a search index");
  index_cmd->add_option("--codes", index.codes, "Code file (HRC1)");
  index_cmd->add_option("--corpus", index.corpus, "Corpus JSONL");
  index_cmd->add_option("--index-out", index.index_out);

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Retrieve propositions for one query");
  query_cmd->add_option("--index", query.index);
  query_cmd->add_option("--corpus", query.corpus);
  query_cmd->add_option("--head", query.head, "Projection head (HRH1)");
  query_cmd->add_option("--query-embeddings", query.query_embeddings);
  query_cmd->add_option("--query-id", query.query_id);
  query_cmd->add_option("--out", query.out, "Output path (default: stdout)");
  AddRetrievalOptions(query_cmd, query.retrieval);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Recall, MAP, EM and latency report");
  eval_cmd->add_option("--index", eval.index);
  eval_cmd->add_option("--corpus", eval.corpus);
  eval_cmd->add_option("--head", eval.head);
  eval_cmd->add_option("--query-embeddings", eval.query_embeddings);
  eval_cmd->add_option("--queries", eval.queries);
  eval_cmd->add_option("--qrels", eval.qrels);
  eval_cmd->add_option("--predictions", eval.predictions,
                       "Generator outputs JSONL {query_id, prediction}");
  eval_cmd->add_option("--ks", eval.ks, "Recall cutoffs");
  eval_cmd->add_option("--workers", eval.workers);
  eval_cmd->add_option("--report-out", eval.report_out);
  eval_cmd->add_option("--csv-out", eval.csv_out);
  eval_cmd->add_option("--label", eval.label);
  AddRetrievalOptions(eval_cmd, eval.retrieval);

  PromptArgs prompt;
  auto* prompt_cmd = app.add_subcommand("prompt", "Render the generator prompt for a query result");
  prompt_cmd->add_option("--corpus", prompt.corpus);
  prompt_cmd->add_option("--template", prompt.tmpl);
  prompt_cmd->add_option("--result", prompt.result, "JSON written by `query`");
  prompt_cmd->add_option("--queries", prompt.queries, "Queries JSONL for the question text");
  prompt_cmd->add_option("--question", prompt.question);
  prompt_cmd->add_option("--instruction", prompt.instruction);
  auto* k_docs_opt = prompt_cmd->add_option("--k-docs", prompt.k_docs);
  prompt_cmd->add_option("--out", prompt.out);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a clustered synthetic benchmark");
  synth_cmd->add_option("--out-dir", synth.out_dir);
  synth_cmd->add_option("--clusters", synth.config.n_clusters);
  synth_cmd->add_option("--per-cluster", synth.config.per_cluster);
  synth_cmd->add_option("--dim", synth.config.dim);
  synth_cmd->add_option("--noise", synth.config.noise);
  synth_cmd->add_option("--query-noise", synth.config.query_noise);
  synth_cmd->add_option("--queries", synth.config.queries);
  synth_cmd->add_option("--train-per-cluster", synth.config.train_queries_per_cluster);
  synth_cmd->add_option("--seed", synth.config.seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: input: " << OneLine(e.what()) << "\n";
    return kInputError;
  }

  try {
    if (*train_cmd) return CmdTrain(train, out);
    if (*index_cmd) return CmdBuildIndex(index, out);
    if (*query_cmd) return CmdQuery(query, out, err);
    if (*eval_cmd) return CmdEvaluate(eval, out);
    if (*prompt_cmd) {
      prompt.k_docs_set = k_docs_opt->count() > 0;
      return CmdPrompt(prompt, out);
    }
    if (*synth_cmd) return CmdSynth(synth, out);
  } catch (const Error& e) {
    err << "error: " << KindName(e.kind()) << ": " << OneLine(e.what()) << "\n";
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    err << "error: input: " << OneLine(e.what()) << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace hashrag::cli
