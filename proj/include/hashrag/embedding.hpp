#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hashrag {

// Dense float32 vectors, one row per id. All values finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Throws on shape mismatch or non-finite values.
  EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                  std::vector<float> data);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> Find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

// "HRE1" file: u32 count, u32 dim, count*dim float32, then u16-prefixed ids.
EmbeddingMatrix ParseEmbeddings(std::string_view bytes);
EmbeddingMatrix LoadEmbeddings(const std::string& path);
std::string SerializeEmbeddings(const EmbeddingMatrix& m);
void SaveEmbeddings(const std::string& path, const EmbeddingMatrix& m);

// Trainable affine tail of the encoder: z = W v + b, W is bits x dim.
// Parameters are held in double precision and stored as float32 on disk.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(Eigen::MatrixXd weights, Eigen::VectorXd bias);

  // W ~ U[-1/sqrt(dim), 1/sqrt(dim)], b = 0.
  static ProjectionHead RandomInit(std::size_t bits, std::size_t dim,
                                   std::uint64_t seed);

  std::size_t bits() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(weights_.cols()); }

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  Eigen::MatrixXd& mutable_weights() { return weights_; }
  Eigen::VectorXd& mutable_bias() { return bias_; }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

// "HRH1" file: u32 bits, u32 dim, weights row-major, bias; all float32.
ProjectionHead ParseHead(std::string_view bytes);
ProjectionHead LoadHead(const std::string& path);
std::string SerializeHead(const ProjectionHead& head);
void SaveHead(const std::string& path, const ProjectionHead& head);

Eigen::VectorXd Project(const ProjectionHead& head, std::span<const float> v);
Eigen::VectorXd Project(const ProjectionHead& head, const Eigen::VectorXd& v);

// Projects every row of `m`; result is rows x bits.
Eigen::MatrixXd ProjectRows(const ProjectionHead& head, const EmbeddingMatrix& m);

// tanh(beta * z). Requires beta > 0.
Eigen::VectorXd RelaxedCode(const ProjectionHead& head, std::span<const float> v,
                            double beta);

// sqrt(sigma * step + 1)
double BetaSchedule(std::uint64_t step, double sigma);

// Componentwise sign with sign(0) = +1.
std::vector<std::int8_t> Binarize(std::span<const double> v);

inline std::int8_t SignOf(double x) { return x < 0.0 ? -1 : 1; }

}  // namespace hashrag
