#include "hashrag/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

#include "hashrag/error.hpp"

namespace hashrag {

using nlohmann::json;

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

enum SeedStream : std::uint64_t {
  kHeadInit = 0,
  kSupervision = 1,
  kShuffle = 2,
};

std::vector<std::string> StringArray(const json& obj, const char* key,
                                     std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) {
    throw InputError("triples line " + std::to_string(line) + ": missing array \"" +
                     key + "\"");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw InputError("triples line " + std::to_string(line) + ": \"" + key +
                       "\" must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::size_t RowOf(const Corpus& corpus, const std::string& prop_id) {
  auto row = corpus.PropIndex(prop_id);
  if (!row) throw InputError("unknown prop_id \"" + prop_id + "\"");
  return *row;
}

void CheckShapes(const Eigen::MatrixXd& relaxed, std::size_t n, std::size_t bits,
                 const Eigen::MatrixXd& similarity,
                 std::span<const std::size_t> omega) {
  if (static_cast<std::size_t>(relaxed.cols()) != bits) {
    throw InputError("shape mismatch: relaxed codes have " +
                     std::to_string(relaxed.cols()) + " columns, codes have " +
                     std::to_string(bits) + " bits");
  }
  if (similarity.rows() != relaxed.rows() ||
      static_cast<std::size_t>(similarity.cols()) != n) {
    throw InputError("shape mismatch: similarity is " +
                     std::to_string(similarity.rows()) + "x" +
                     std::to_string(similarity.cols()) + ", expected " +
                     std::to_string(relaxed.rows()) + "x" + std::to_string(n));
  }
  if (!omega.empty() && omega.size() != static_cast<std::size_t>(relaxed.rows())) {
    throw InputError("shape mismatch: omega has " + std::to_string(omega.size()) +
                     " entries for " + std::to_string(relaxed.rows()) + " rows");
  }
  for (std::size_t i : omega) {
    if (i >= n) throw InputError("omega index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

std::vector<TrainingTriple> ParseTriples(std::istream& in) {
  std::vector<TrainingTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("triples line " + std::to_string(line_no) +
                       ": malformed JSON (" + e.what() + ")");
    }
    auto qid = obj.find("query_id");
    if (!obj.is_object() || qid == obj.end() || !qid->is_string()) {
      throw InputError("triples line " + std::to_string(line_no) +
                       ": missing string field \"query_id\"");
    }
    out.push_back({qid->get<std::string>(), StringArray(obj, "positive", line_no),
                   StringArray(obj, "negative", line_no)});
  }
  return out;
}

std::vector<TrainingTriple> LoadTriples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open triples " + path);
  return ParseTriples(in);
}

SupervisionSet BuildSupervision(const Corpus& corpus,
                                std::span<const TrainingTriple> triples,
                                SupervisionMode mode, std::size_t m,
                                std::uint64_t seed) {
  const std::size_t n = corpus.size();
  std::mt19937_64 rng(seed);
  SupervisionSet set;
  set.mode = mode;

  if (mode == SupervisionMode::kLabeled) {
    if (triples.empty()) throw InputError("labeled supervision needs triples");
    std::vector<std::size_t> chosen(triples.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    if (m != 0 && m < triples.size()) {
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(m);
      std::sort(chosen.begin(), chosen.end());
    }
    set.similarity = Eigen::MatrixXd::Constant(chosen.size(), n, -1.0);
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const auto& t = triples[chosen[r]];
      set.query_ids.push_back(t.query_id);
      std::vector<std::size_t> pos, neg;
      for (const auto& id : t.positive) pos.push_back(RowOf(corpus, id));
      for (const auto& id : t.negative) neg.push_back(RowOf(corpus, id));
      for (std::size_t j : pos) set.similarity(r, j) = 1.0;
      set.positives.push_back(std::move(pos));
      set.negatives.push_back(std::move(neg));
    }
    return set;
  }

  if (m == 0) m = n;
  if (m > n) {
    throw InputError("sample count m=" + std::to_string(m) +
                     " exceeds proposition count n=" + std::to_string(n));
  }
  // Groups of co-relevant propositions from the triples.
  std::vector<std::vector<std::size_t>> groups_of(n);
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& t : triples) {
    std::vector<std::size_t> g;
    for (const auto& id : t.positive) g.push_back(RowOf(corpus, id));
    for (const auto& id : t.negative) RowOf(corpus, id);
    for (std::size_t j : g) groups_of[j].push_back(groups.size());
    groups.push_back(std::move(g));
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  set.omega.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  set.similarity = Eigen::MatrixXd::Constant(m, n, -1.0);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = set.omega[r];
    std::vector<std::size_t> pos{i};
    for (std::size_t g : groups_of[i]) pos.insert(pos.end(), groups[g].begin(), groups[g].end());
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    for (std::size_t j : pos) set.similarity(r, j) = 1.0;
    set.positives.push_back(std::move(pos));
    set.negatives.emplace_back();
  }
  return set;
}

double PairwiseLoss(const Eigen::MatrixXd& relaxed, const CodeMatrix& codes,
                    const Eigen::MatrixXd& similarity, double gamma,
                    std::span<const std::size_t> omega) {
  CheckShapes(relaxed, codes.rows(), codes.bits(), similarity, omega);
  const Eigen::MatrixXd h = codes.AsReal();
  const double l = static_cast<double>(codes.bits());
  double loss = (relaxed * h.transpose() - l * similarity).squaredNorm();
  for (std::size_t r = 0; r < omega.size(); ++r) {
    loss += gamma * (h.row(omega[r]) - relaxed.row(r)).squaredNorm();
  }
  return loss;
}

double CodeObjective(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& codes,
                     const Eigen::MatrixXd& similarity, double gamma,
                     std::span<const std::size_t> omega) {
  CheckShapes(relaxed, static_cast<std::size_t>(codes.rows()),
              static_cast<std::size_t>(codes.cols()), similarity, omega);
  const double l = static_cast<double>(codes.cols());
  double value = (relaxed * codes.transpose()).squaredNorm();
  value -= 2.0 * l * (codes.transpose() * similarity.transpose() * relaxed).trace();
  double tr = 0.0;
  for (std::size_t r = 0; r < omega.size(); ++r) tr += codes.row(omega[r]).dot(relaxed.row(r));
  return value - 2.0 * gamma * tr;
}

HeadGradient ThetaStepGradient(const ProjectionHead& head, std::span<const float> input,
                               const CodeMatrix& codes,
                               const Eigen::RowVectorXd& similarity_row, double beta,
                               double gamma, std::optional<std::size_t> self_row) {
  if (codes.bits() != head.bits()) {
    throw InputError("shape mismatch: head has " + std::to_string(head.bits()) +
                     " bits, codes have " + std::to_string(codes.bits()));
  }
  if (static_cast<std::size_t>(similarity_row.size()) != codes.rows()) {
    throw InputError("shape mismatch: similarity row length " +
                     std::to_string(similarity_row.size()) + " != n " +
                     std::to_string(codes.rows()));
  }
  if (self_row && *self_row >= codes.rows()) {
    throw InputError("omega index out of range");
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(i) = input[i];
  const Eigen::VectorXd relaxed = (beta * Project(head, x)).array().tanh().matrix();
  const Eigen::MatrixXd h = codes.AsReal();
  const double l = static_cast<double>(codes.bits());

  const Eigen::RowVectorXd residual = relaxed.transpose() * h.transpose() - l * similarity_row;
  Eigen::VectorXd g = 2.0 * (residual * h).transpose();
  if (self_row) g += 2.0 * gamma * (relaxed - h.row(*self_row).transpose());
  // d tanh(beta z) / dz = beta (1 - tanh^2)
  const Eigen::VectorXd gz =
      (g.array() * beta * (1.0 - relaxed.array().square())).matrix();
  return {gz * x.transpose(), gz};
}

ColumnUpdater::ColumnUpdater(const Eigen::MatrixXd& relaxed,
                             const Eigen::MatrixXd& similarity, double gamma,
                             std::span<const std::size_t> omega) {
  const auto n = static_cast<std::size_t>(similarity.cols());
  CheckShapes(relaxed, n, static_cast<std::size_t>(relaxed.cols()), similarity, omega);
  const double l = static_cast<double>(relaxed.cols());
  gram_ = relaxed.transpose() * relaxed;
  linear_ = -2.0 * l * similarity.transpose() * relaxed;
  for (std::size_t r = 0; r < omega.size(); ++r) {
    linear_.row(omega[r]) -= 2.0 * gamma * relaxed.row(r);
  }
}

void ColumnUpdater::UpdateColumn(Eigen::MatrixXd& codes, std::size_t k) const {
  const auto col = static_cast<Eigen::Index>(k);
  // Hhat_k Vhat_k^T V_{*k}: every column but k against the Gram column.
  Eigen::VectorXd coupling = codes * gram_.col(col) - codes.col(col) * gram_(col, col);
  Eigen::VectorXd coef = 2.0 * coupling + linear_.col(col);
  for (Eigen::Index r = 0; r < codes.rows(); ++r) codes(r, col) = -SignOf(coef(r));
}

void ColumnUpdater::Sweep(Eigen::MatrixXd& codes) const {
  if (codes.cols() != gram_.cols() || codes.rows() != linear_.rows()) {
    throw InputError("shape mismatch in code update");
  }
  for (Eigen::Index k = 0; k < codes.cols(); ++k) UpdateColumn(codes, static_cast<std::size_t>(k));
}

CodeMatrix HStep(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& similarity,
                 const CodeMatrix& codes, double gamma,
                 std::span<const std::size_t> omega) {
  CheckShapes(relaxed, codes.rows(), codes.bits(), similarity, omega);
  ColumnUpdater updater(relaxed, similarity, gamma, omega);
  Eigen::MatrixXd h = codes.AsReal();
  updater.Sweep(h);
  return CodeMatrix::FromReal(h);
}

void TrainConfig::Validate() const {
  if (bits == 0 || bits % 64 != 0) {
    throw InputError("code length " + std::to_string(bits) +
                     " must be a positive multiple of 64");
  }
  if (!(gamma >= 0.0)) throw InputError("gamma must be non-negative");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (epochs == 0) throw InputError("epochs must be positive");
  if (batch_size == 0) throw InputError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw InputError("warmup_fraction must lie in [0,1]");
  }
}

json TrainReport::ToJson() const {
  json j;
  j["steps"] = steps;
  j["rows"] = rows;
  json objective = json::array(), flips = json::array(), beta = json::array(),
       seconds = json::array();
  for (const auto& e : epochs) {
    objective.push_back(e.objective);
    flips.push_back(e.flips);
    beta.push_back(e.beta);
    seconds.push_back(e.seconds);
  }
  j["objective"] = objective;
  j["flips"] = flips;
  j["beta"] = beta;
  j["seconds"] = seconds;
  return j;
}

Eigen::MatrixXd AlignedRows(const EmbeddingMatrix& embeddings,
                            std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  row_of.reserve(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) row_of.emplace(embeddings.ids()[i], i);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()),
                      static_cast<Eigen::Index>(embeddings.dim()));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = row_of.find(ids[r]);
    if (it == row_of.end()) throw InputError("missing embedding for \"" + ids[r] + "\"");
    auto src = embeddings.row(it->second);
    for (std::size_t c = 0; c < src.size(); ++c) out(r, c) = src[c];
  }
  return out;
}

namespace {

// Inputs feeding each supervision row: prop embeddings at omega, or query
// embeddings for labeled rows.
Eigen::MatrixXd RowInputs(const SupervisionSet& sup, const Eigen::MatrixXd& props,
                          const EmbeddingMatrix* queries) {
  if (sup.mode == SupervisionMode::kLabeled) {
    if (queries == nullptr) throw InputError("labeled training needs query embeddings");
    return AlignedRows(*queries, sup.query_ids);
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(sup.omega.size()), props.cols());
  for (std::size_t r = 0; r < sup.omega.size(); ++r) x.row(r) = props.row(sup.omega[r]);
  return x;
}

Eigen::MatrixXd RelaxRows(const ProjectionHead& head, const Eigen::MatrixXd& inputs,
                          double beta) {
  Eigen::MatrixXd z = inputs * head.weights().transpose();
  z.rowwise() += head.bias().transpose();
  return (beta * z).array().tanh().matrix();
}

}  // namespace

TrainResult Train(const Corpus& corpus, const EmbeddingMatrix& prop_embeddings,
                  const TrainConfig& config, std::span<const TrainingTriple> triples,
                  const EmbeddingMatrix* query_embeddings,
                  const ProjectionHead* initial_head) {
  config.Validate();
  const std::size_t n = corpus.size();
  const double l = static_cast<double>(config.bits);
  const Eigen::MatrixXd props = AlignedRows(prop_embeddings, corpus.PropIds());
  const std::size_t dim = prop_embeddings.dim();
  if (query_embeddings != nullptr && query_embeddings->dim() != dim) {
    throw InputError("query embeddings have dim " + std::to_string(query_embeddings->dim()) +
                     ", propositions have " + std::to_string(dim));
  }

  ProjectionHead head = initial_head != nullptr
                            ? *initial_head
                            : ProjectionHead::RandomInit(config.bits, dim,
                                                         DeriveSeed(config.seed, kHeadInit));
  if (head.bits() != config.bits || head.dim() != dim) {
    throw InputError("initial head shape does not match config");
  }

  std::uint64_t sup_seed = DeriveSeed(config.seed, kSupervision);
  SupervisionSet sup =
      BuildSupervision(corpus, triples, config.mode, config.sample_count, sup_seed);
  Eigen::MatrixXd inputs = RowInputs(sup, props, query_embeddings);

  // Start from the signs of the initial projections.
  Eigen::MatrixXd z0 = props * head.weights().transpose();
  z0.rowwise() += head.bias().transpose();
  Eigen::MatrixXd codes = z0.unaryExpr([](double v) { return double(SignOf(v)); });

  const std::size_t rows = sup.rows();
  const std::size_t batches_per_epoch = (rows + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  const auto warmup_steps = static_cast<std::size_t>(
      std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

  std::mt19937_64 shuffle_rng(DeriveSeed(config.seed, kShuffle));
  std::vector<std::size_t> order(rows);
  std::uint64_t step = 0;
  TrainReport report;
  report.rows = rows;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (epoch > 0 && config.resample_each_epoch && config.mode == SupervisionMode::kSampled) {
      sup_seed = DeriveSeed(sup_seed, epoch);
      sup = BuildSupervision(corpus, triples, config.mode, config.sample_count, sup_seed);
      inputs = RowInputs(sup, props, query_embeddings);
    }
    const bool use_gamma = !sup.omega.empty();

    // Head update with codes fixed.
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++step) {
      if (config.freeze_head) continue;
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(rows, begin + config.batch_size);
      const auto bs = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd x(bs, inputs.cols());
      Eigen::MatrixXd s(bs, sup.similarity.cols());
      for (Eigen::Index t = 0; t < bs; ++t) {
        x.row(t) = inputs.row(order[begin + t]);
        s.row(t) = sup.similarity.row(order[begin + t]);
      }
      const double beta = BetaSchedule(step, config.sigma);
      const Eigen::MatrixXd relaxed = RelaxRows(head, x, beta);
      Eigen::MatrixXd g = 2.0 * (relaxed * codes.transpose() - l * s) * codes;
      if (use_gamma) {
        for (Eigen::Index t = 0; t < bs; ++t) {
          g.row(t) += 2.0 * config.gamma *
                      (relaxed.row(t) - codes.row(sup.omega[order[begin + t]]));
        }
      }
      const Eigen::MatrixXd gz =
          (g.array() * beta * (1.0 - relaxed.array().square())).matrix();
      // Step on the per-pair mean of the loss.
      const double scale = 1.0 / (static_cast<double>(bs) * static_cast<double>(n));
      double lr = config.learning_rate;
      if (step < warmup_steps) {
        lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
      }
      head.mutable_weights() -= (lr * scale) * (gz.transpose() * x);
      head.mutable_bias() -= (lr * scale) * gz.colwise().sum().transpose();
      if (!head.weights().allFinite() || !head.bias().allFinite()) {
        throw Error(ErrorKind::kNumeric, "non-finite head parameters at step " +
                                             std::to_string(step));
      }
    }

    // Code update with the head fixed.
    const double beta = BetaSchedule(step, config.sigma);
    const Eigen::MatrixXd relaxed = RelaxRows(head, inputs, beta);
    const std::span<const std::size_t> omega =
        use_gamma ? std::span<const std::size_t>(sup.omega) : std::span<const std::size_t>();
    ColumnUpdater updater(relaxed, sup.similarity, config.gamma, omega);
    const Eigen::MatrixXd before = codes;
    updater.Sweep(codes);

    EpochStats stats;
    stats.beta = beta;
    stats.flips = static_cast<std::size_t>((before.array() != codes.array()).count());
    stats.objective = (relaxed * codes.transpose() - l * sup.similarity).squaredNorm();
    for (std::size_t r = 0; r < omega.size(); ++r) {
      stats.objective += config.gamma * (codes.row(omega[r]) - relaxed.row(r)).squaredNorm();
    }
    if (!std::isfinite(stats.objective)) {
      throw Error(ErrorKind::kNumeric,
                  "non-finite loss in epoch " + std::to_string(epoch));
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
  }
  report.steps = step;
  return {std::move(head), CodeMatrix::FromReal(codes), std::move(report)};
}

}  // namespace hashrag
