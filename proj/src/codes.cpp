#include "hashrag/codes.hpp"

#include <sstream>

#include "binary_io.hpp"
#include "hashrag/embedding.hpp"
#include "hashrag/error.hpp"

namespace hashrag {

namespace {
constexpr std::string_view kCodeMagic = "HRC1";
}

CodeMatrix::CodeMatrix(std::size_t rows, std::size_t bits,
                       std::vector<std::int8_t> signs)
    : rows_(rows), bits_(bits), signs_(std::move(signs)) {
  if (signs_.size() != rows_ * bits_) {
    throw InputError("code matrix payload has " + std::to_string(signs_.size()) +
                     " entries, expected " + std::to_string(rows_ * bits_));
  }
  for (std::int8_t s : signs_) {
    if (s != 1 && s != -1) throw InputError("code matrix entries must be +1 or -1");
  }
}

CodeMatrix CodeMatrix::FromReal(const Eigen::MatrixXd& m) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto bits = static_cast<std::size_t>(m.cols());
  std::vector<std::int8_t> signs(rows * bits);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < bits; ++c) signs[r * bits + c] = SignOf(m(r, c));
  return CodeMatrix(rows, bits, std::move(signs));
}

Eigen::MatrixXd CodeMatrix::AsReal() const {
  Eigen::MatrixXd m(rows_, bits_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < bits_; ++c) m(r, c) = signs_[r * bits_ + c];
  return m;
}

std::size_t CodeMatrix::CountFlips(const CodeMatrix& other) const {
  if (other.rows_ != rows_ || other.bits_ != bits_) {
    throw InputError("code matrix shape mismatch");
  }
  std::size_t flips = 0;
  for (std::size_t i = 0; i < signs_.size(); ++i) flips += signs_[i] != other.signs_[i];
  return flips;
}

std::string SerializeCodes(const CodeMatrix& codes) {
  if (codes.bits() % 8 != 0) throw InputError("code length must be a multiple of 8");
  std::ostringstream out;
  detail::WriteMagic(out, kCodeMagic);
  detail::WriteU32(out, static_cast<std::uint32_t>(codes.rows()));
  detail::WriteU32(out, static_cast<std::uint32_t>(codes.bits()));
  for (std::size_t r = 0; r < codes.rows(); ++r) {
    auto row = codes.row(r);
    for (std::size_t b = 0; b < codes.bits(); b += 8) {
      unsigned char byte = 0;
      for (std::size_t t = 0; t < 8; ++t) {
        if (row[b + t] > 0) byte |= static_cast<unsigned char>(0x80u >> t);
      }
      out.put(static_cast<char>(byte));
    }
  }
  return std::move(out).str();
}

CodeMatrix ParseCodes(std::string_view bytes) {
  detail::ByteReader r(bytes, "code file");
  r.ExpectMagic(kCodeMagic);
  const std::uint32_t n = r.U32();
  const std::uint32_t bits = r.U32();
  if (bits == 0 || bits % 8 != 0) {
    throw InputError("code file: bit length " + std::to_string(bits) +
                     " is not a positive multiple of 8");
  }
  const std::size_t row_bytes = bits / 8;
  auto payload = r.Bytes(static_cast<std::size_t>(n) * row_bytes);
  if (r.remaining() != 0) throw InputError("code file: trailing bytes");
  std::vector<std::int8_t> signs(static_cast<std::size_t>(n) * bits);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto byte = static_cast<unsigned char>(payload[i]);
    for (std::size_t t = 0; t < 8; ++t) {
      signs[i * 8 + t] = (byte & (0x80u >> t)) ? 1 : -1;
    }
  }
  return CodeMatrix(n, bits, std::move(signs));
}

void SaveCodes(const std::string& path, const CodeMatrix& codes) {
  detail::WriteFile(path, SerializeCodes(codes));
}

CodeMatrix LoadCodes(const std::string& path) {
  return ParseCodes(detail::ReadFile(path));
}

}  // namespace hashrag
