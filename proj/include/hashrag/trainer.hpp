#pragma once

// Asymmetric alternating optimization of proposition codes.
//
// Rows of the supervision matrix are either labeled queries or propositions
// sampled from the corpus (the index set omega). Each epoch runs SGD on the
// projection head with the codes fixed, then one closed-form column sweep over
// the code matrix with the head fixed.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hashrag/codes.hpp"
#include "hashrag/corpus.hpp"
#include "hashrag/embedding.hpp"

namespace hashrag {

struct TrainingTriple {
  std::string query_id;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

// JSONL: {"query_id":..., "positive":[...], "negative":[...]}
std::vector<TrainingTriple> ParseTriples(std::istream& in);
std::vector<TrainingTriple> LoadTriples(const std::string& path);

enum class SupervisionMode {
  // One row per labeled query; +1 at its positive propositions.
  kLabeled,
  // One row per sampled proposition; +1 at itself and at every proposition
  // that shares a positive list with it in the supplied triples.
  kSampled,
};

struct SupervisionSet {
  SupervisionMode mode = SupervisionMode::kSampled;
  // Proposition rows acting as queries. Empty in labeled mode, which also
  // disables the quantization (gamma) term.
  std::vector<std::size_t> omega;
  // Labeled mode: query id of each row.
  std::vector<std::string> query_ids;
  // rows x n, entries exactly -1 or +1.
  Eigen::MatrixXd similarity;
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;

  std::size_t rows() const { return static_cast<std::size_t>(similarity.rows()); }
};

// Labeled mode uses the first m triples of a seeded shuffle (all of them when
// m == 0 or m >= count), kept in file order. Sampled mode draws omega as the
// first m entries of a seeded permutation of the corpus rows.
SupervisionSet BuildSupervision(const Corpus& corpus,
                                std::span<const TrainingTriple> triples,
                                SupervisionMode mode, std::size_t m,
                                std::uint64_t seed);

// Scalar form of the loss:
//   sum_i sum_j (relaxed_i . h_j - l S_ij)^2 + gamma sum_i |h_{omega_i} - relaxed_i|^2
// where l = codes.bits(). The second sum is skipped when omega is empty.
double PairwiseLoss(const Eigen::MatrixXd& relaxed, const CodeMatrix& codes,
                    const Eigen::MatrixXd& similarity, double gamma,
                    std::span<const std::size_t> omega);

// Matrix form with the H-independent constant dropped:
//   |V H^T|_F^2 - 2 l tr(H^T S^T V) - 2 gamma tr(H^omega V^T)
double CodeObjective(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& codes,
                     const Eigen::MatrixXd& similarity, double gamma,
                     std::span<const std::size_t> omega);

struct HeadGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

// Gradient of one row's loss term w.r.t. the head parameters. `self_row` is
// the proposition paired with this row in the gamma term (omega_i), or
// nullopt for a labeled query.
HeadGradient ThetaStepGradient(const ProjectionHead& head, std::span<const float> input,
                               const CodeMatrix& codes,
                               const Eigen::RowVectorXd& similarity_row, double beta,
                               double gamma, std::optional<std::size_t> self_row);

// Column-wise closed-form minimizer of CodeObjective. Precomputes the Gram
// matrix V^T V and the linear term Q = -2 l S^T V - 2 gamma Vbar once, where
// Vbar scatters the rows of V into the omega positions of an n x l matrix.
class ColumnUpdater {
 public:
  ColumnUpdater(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& similarity,
                double gamma, std::span<const std::size_t> omega);

  // H_{*k} = -sign(2 Hhat_k Vhat_k^T V_{*k} + Q_{*k}) using the current values
  // of every other column.
  void UpdateColumn(Eigen::MatrixXd& codes, std::size_t k) const;

  // Ascending k.
  void Sweep(Eigen::MatrixXd& codes) const;

  const Eigen::MatrixXd& linear_term() const { return linear_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd linear_;
};

// One full sweep over all columns.
CodeMatrix HStep(const Eigen::MatrixXd& relaxed, const Eigen::MatrixXd& similarity,
                 const CodeMatrix& codes, double gamma,
                 std::span<const std::size_t> omega);

struct TrainConfig {
  std::size_t bits = 256;
  double gamma = 200.0;
  double sigma = 0.1;
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  // Supervision rows; 0 means all propositions (sampled) or all triples.
  std::size_t sample_count = 0;
  std::uint64_t seed = 42;
  SupervisionMode mode = SupervisionMode::kSampled;
  bool resample_each_epoch = false;
  double warmup_fraction = 0.1;
  // Skip the head update entirely; only the code matrix is optimized.
  bool freeze_head = false;

  void Validate() const;
};

struct EpochStats {
  double objective = 0.0;  // PairwiseLoss after the H-step
  std::size_t flips = 0;   // code entries changed by the H-step
  double beta = 1.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t steps = 0;
  std::size_t rows = 0;

  nlohmann::json ToJson() const;
};

struct TrainResult {
  ProjectionHead head;
  CodeMatrix codes;
  TrainReport report;
};

// `prop_embeddings` must contain every corpus prop_id; rows are matched by id.
// Labeled mode additionally needs `query_embeddings` covering the triples.
// `initial_head` overrides the seeded random initialization.
TrainResult Train(const Corpus& corpus, const EmbeddingMatrix& prop_embeddings,
                  const TrainConfig& config,
                  std::span<const TrainingTriple> triples = {},
                  const EmbeddingMatrix* query_embeddings = nullptr,
                  const ProjectionHead* initial_head = nullptr);

// Reorders embedding rows into corpus order. Throws naming the first missing id.
Eigen::MatrixXd AlignedRows(const EmbeddingMatrix& embeddings,
                            std::span<const std::string> ids);

// Deterministic sub-seed for a named purpose.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hashrag
