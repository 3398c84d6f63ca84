#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hashrag/codes.hpp"

namespace hashrag {

// Bit position t of a code lives in word t / 64 at bit 63 - t % 64, so the
// big-endian bytes of each word reproduce the code-file layout.
std::vector<std::uint64_t> PackSigns(std::span<const std::int8_t> signs);

// Number of differing bit positions. Throws on length mismatch.
std::uint32_t HammingDistance(std::span<const std::uint64_t> a,
                              std::span<const std::uint64_t> b);

// Query side of the asymmetric search: packed signs plus, optionally, the
// real projection they were taken from.
struct QueryCode {
  std::vector<std::uint64_t> bits;
  std::size_t length = 0;
  std::optional<std::vector<double>> real;

  static QueryCode FromReal(std::span<const double> projection);
  static QueryCode FromSigns(std::span<const std::int8_t> signs);
};

struct Candidate {
  std::size_t row = 0;
  std::uint32_t distance = 0;
  double score = 0.0;
};

using CandidateSet = std::vector<Candidate>;

// Per-query counters.
struct QueryStats {
  std::uint64_t nanoseconds = 0;
  std::size_t examined = 0;
  std::uint32_t radius = 0;
};

// Immutable packed index over proposition codes.
class HammingIndex {
 public:
  // Requires bits % 64 == 0 and one id per row.
  static HammingIndex Build(const CodeMatrix& codes, std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  std::size_t bits() const { return bits_; }
  std::size_t words_per_row() const { return bits_ / 64; }

  std::span<const std::uint64_t> row(std::size_t r) const {
    return {words_.data() + r * words_per_row(), words_per_row()};
  }
  const std::string& id(std::size_t r) const { return ids_[r]; }
  const std::vector<std::string>& ids() const { return ids_; }

  CodeMatrix Unpack() const;

  // Packed codes (n * bits / 8) plus the id table (u16 length + bytes per id).
  std::size_t ByteSize() const;

  // Smallest radius r* whose cumulative count reaches alpha; returns every row
  // within r*, ordered by (distance, row). Requires 1 <= alpha <= size().
  CandidateSet RadiusExpand(const QueryCode& q, std::size_t alpha,
                            QueryStats* stats = nullptr) const;

  // Exact k nearest under the same (distance, row) order. Requires k <= size().
  CandidateSet FullScanTopK(const QueryCode& q, std::size_t k) const;

 private:
  void CheckQuery(const QueryCode& q) const;

  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::string> ids_;
};

// "HRI1" file: u32 n, u32 bits, the packed rows as in the code file, then
// u16-prefixed ids.
std::string SerializeIndex(const HammingIndex& index);
HammingIndex ParseIndex(std::string_view bytes);
void SaveIndex(const std::string& path, const HammingIndex& index);
HammingIndex LoadIndex(const std::string& path);

// Top j by descending <q.real, h_p>; ties by ascending distance then row.
// Fills Candidate::score. Throws if q.real is absent or j > |candidates|.
CandidateSet RerankTop(const HammingIndex& index, CandidateSet candidates,
                       const QueryCode& q, std::size_t j);

// Bits-only fallback: score = <h_q, h_p> = l - 2 * distance.
CandidateSet RerankByBits(const HammingIndex& index, CandidateSet candidates,
                          std::size_t j);

// Radius expansion followed by re-ranking (real when available, bits
// otherwise). Stats cover both stages.
CandidateSet Retrieve(const HammingIndex& index, const QueryCode& q, std::size_t alpha,
                      std::size_t j, QueryStats* stats = nullptr);

}  // namespace hashrag
