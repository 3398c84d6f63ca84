#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hashrag {

// Binary codes in {-1,+1}, one row per proposition in corpus order.
class CodeMatrix {
 public:
  CodeMatrix() = default;
  // Every entry must be exactly -1 or +1.
  CodeMatrix(std::size_t rows, std::size_t bits, std::vector<std::int8_t> signs);

  // Signs of a real matrix, sign(0) = +1.
  static CodeMatrix FromReal(const Eigen::MatrixXd& m);

  std::size_t rows() const { return rows_; }
  std::size_t bits() const { return bits_; }

  std::int8_t at(std::size_t r, std::size_t c) const { return signs_[r * bits_ + c]; }
  std::span<const std::int8_t> row(std::size_t r) const {
    return {signs_.data() + r * bits_, bits_};
  }
  const std::vector<std::int8_t>& signs() const { return signs_; }

  Eigen::MatrixXd AsReal() const;

  // Number of entries that differ; shapes must agree.
  std::size_t CountFlips(const CodeMatrix& other) const;

  bool operator==(const CodeMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::vector<std::int8_t> signs_;
};

// "HRC1" file: u32 n, u32 bits, then n rows of bits/8 bytes, bit 1 = +1,
// most significant bit first within each byte. Requires bits % 8 == 0.
std::string SerializeCodes(const CodeMatrix& codes);
CodeMatrix ParseCodes(std::string_view bytes);
void SaveCodes(const std::string& path, const CodeMatrix& codes);
CodeMatrix LoadCodes(const std::string& path);

}  // namespace hashrag
