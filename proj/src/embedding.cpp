#include "hashrag/embedding.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "hashrag/error.hpp"

namespace hashrag {

namespace {

constexpr std::string_view kEmbeddingMagic = "HRE1";
constexpr std::string_view kHeadMagic = "HRH1";

void CheckFinite(std::span<const float> data, std::size_t dim) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw InputError("non-finite embedding value at row " +
                       std::to_string(i / dim) + ", column " +
                       std::to_string(i % dim));
    }
  }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                                 std::vector<float> data)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw InputError("embedding dim must be positive");
  if (data_.size() != ids_.size() * dim_) {
    throw InputError("embedding payload has " + std::to_string(data_.size()) +
                     " values, expected " + std::to_string(ids_.size() * dim_));
  }
  CheckFinite(data_, dim_);
}

std::optional<std::size_t> EmbeddingMatrix::Find(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  return std::nullopt;
}

EmbeddingMatrix ParseEmbeddings(std::string_view bytes) {
  detail::ByteReader r(bytes, "embedding file");
  r.ExpectMagic(kEmbeddingMagic);
  const std::uint32_t count = r.U32();
  const std::uint32_t dim = r.U32();
  if (dim == 0) throw InputError("embedding file: dim must be positive");
  const std::size_t values = static_cast<std::size_t>(count) * dim;
  r.Require(values * 4);
  std::vector<float> data(values);
  for (auto& v : data) v = r.F32();
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) ids.push_back(r.ShortString());
  if (r.remaining() != 0) {
    throw InputError("embedding file: " + std::to_string(r.remaining()) +
                     " trailing bytes");
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(data));
}

EmbeddingMatrix LoadEmbeddings(const std::string& path) {
  return ParseEmbeddings(detail::ReadFile(path));
}

std::string SerializeEmbeddings(const EmbeddingMatrix& m) {
  std::ostringstream out;
  detail::WriteMagic(out, kEmbeddingMagic);
  detail::WriteU32(out, static_cast<std::uint32_t>(m.rows()));
  detail::WriteU32(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) detail::WriteF32(out, v);
  for (const auto& id : m.ids()) detail::WriteShortString(out, id);
  return std::move(out).str();
}

void SaveEmbeddings(const std::string& path, const EmbeddingMatrix& m) {
  detail::WriteFile(path, SerializeEmbeddings(m));
}

ProjectionHead::ProjectionHead(Eigen::MatrixXd weights, Eigen::VectorXd bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw InputError("projection head must have positive shape");
  }
  if (bias_.size() != weights_.rows()) {
    throw InputError("projection head bias length " + std::to_string(bias_.size()) +
                     " != bits " + std::to_string(weights_.rows()));
  }
  if (!weights_.allFinite() || !bias_.allFinite()) {
    throw InputError("projection head has non-finite parameters");
  }
}

ProjectionHead ProjectionHead::RandomInit(std::size_t bits, std::size_t dim,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::MatrixXd w(bits, dim);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (std::size_t r = 0; r < bits; ++r)
    for (std::size_t c = 0; c < dim; ++c) w(r, c) = u(rng);
  return ProjectionHead(std::move(w), Eigen::VectorXd::Zero(bits));
}

ProjectionHead ParseHead(std::string_view bytes) {
  detail::ByteReader r(bytes, "head file");
  r.ExpectMagic(kHeadMagic);
  const std::uint32_t bits = r.U32();
  const std::uint32_t dim = r.U32();
  r.Require((static_cast<std::size_t>(bits) * dim + bits) * 4);
  Eigen::MatrixXd w(bits, dim);
  for (std::uint32_t i = 0; i < bits; ++i)
    for (std::uint32_t j = 0; j < dim; ++j) w(i, j) = r.F32();
  Eigen::VectorXd b(bits);
  for (std::uint32_t i = 0; i < bits; ++i) b(i) = r.F32();
  if (r.remaining() != 0) throw InputError("head file: trailing bytes");
  return ProjectionHead(std::move(w), std::move(b));
}

ProjectionHead LoadHead(const std::string& path) {
  return ParseHead(detail::ReadFile(path));
}

std::string SerializeHead(const ProjectionHead& head) {
  std::ostringstream out;
  detail::WriteMagic(out, kHeadMagic);
  detail::WriteU32(out, static_cast<std::uint32_t>(head.bits()));
  detail::WriteU32(out, static_cast<std::uint32_t>(head.dim()));
  for (std::size_t i = 0; i < head.bits(); ++i)
    for (std::size_t j = 0; j < head.dim(); ++j)
      detail::WriteF32(out, static_cast<float>(head.weights()(i, j)));
  for (std::size_t i = 0; i < head.bits(); ++i)
    detail::WriteF32(out, static_cast<float>(head.bias()(i)));
  return std::move(out).str();
}

void SaveHead(const std::string& path, const ProjectionHead& head) {
  detail::WriteFile(path, SerializeHead(head));
}

Eigen::VectorXd Project(const ProjectionHead& head, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != head.dim()) {
    throw InputError("dimension mismatch: vector has " + std::to_string(v.size()) +
                     " entries, head expects " + std::to_string(head.dim()));
  }
  return head.weights() * v + head.bias();
}

Eigen::VectorXd Project(const ProjectionHead& head, std::span<const float> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(i) = v[i];
  return Project(head, x);
}

Eigen::MatrixXd ProjectRows(const ProjectionHead& head, const EmbeddingMatrix& m) {
  if (m.dim() != head.dim()) {
    throw InputError("dimension mismatch: embeddings have dim " +
                     std::to_string(m.dim()) + ", head expects " +
                     std::to_string(head.dim()));
  }
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorF> x(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                                static_cast<Eigen::Index>(m.dim()));
  Eigen::MatrixXd z = x.cast<double>() * head.weights().transpose();
  z.rowwise() += head.bias().transpose();
  return z;
}

Eigen::VectorXd RelaxedCode(const ProjectionHead& head, std::span<const float> v,
                            double beta) {
  if (!(beta > 0.0)) throw InputError("beta must be positive");
  return (beta * Project(head, v)).array().tanh().matrix();
}

double BetaSchedule(std::uint64_t step, double sigma) {
  return std::sqrt(sigma * static_cast<double>(step) + 1.0);
}

std::vector<std::int8_t> Binarize(std::span<const double> v) {
  std::vector<std::int8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = SignOf(v[i]);
  return out;
}

}  // namespace hashrag
