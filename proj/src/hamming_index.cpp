#include "hashrag/hamming_index.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "hashrag/embedding.hpp"
#include "hashrag/error.hpp"

namespace hashrag {

namespace {

constexpr std::string_view kIndexMagic = "HRI1";

bool ByDistanceThenRow(const Candidate& a, const Candidate& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
}

bool ByScoreThenDistance(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return ByDistanceThenRow(a, b);
}

// <v, s> for the +-1 vector s encoded in `words`.
double SignedDot(std::span<const std::uint64_t> words, std::span<const double> v,
                 double v_sum) {
  double positive = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::uint64_t x = words[w];
    while (x != 0) {
      const int lead = std::countl_zero(x);
      positive += v[w * 64 + static_cast<std::size_t>(lead)];
      x &= ~(std::uint64_t{1} << (63 - lead));
    }
  }
  return 2.0 * positive - v_sum;
}

}  // namespace

std::vector<std::uint64_t> PackSigns(std::span<const std::int8_t> signs) {
  std::vector<std::uint64_t> words((signs.size() + 63) / 64, 0);
  for (std::size_t t = 0; t < signs.size(); ++t) {
    if (signs[t] > 0) words[t / 64] |= std::uint64_t{1} << (63 - t % 64);
  }
  return words;
}

std::uint32_t HammingDistance(std::span<const std::uint64_t> a,
                              std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) {
    throw InputError("code length mismatch: " + std::to_string(a.size() * 64) +
                     " vs " + std::to_string(b.size() * 64) + " bits");
  }
  std::uint32_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

QueryCode QueryCode::FromReal(std::span<const double> projection) {
  QueryCode q = FromSigns(Binarize(projection));
  q.real.emplace(projection.begin(), projection.end());
  return q;
}

QueryCode QueryCode::FromSigns(std::span<const std::int8_t> signs) {
  QueryCode q;
  q.bits = PackSigns(signs);
  q.length = signs.size();
  return q;
}

HammingIndex HammingIndex::Build(const CodeMatrix& codes, std::vector<std::string> ids) {
  if (codes.bits() == 0 || codes.bits() % 64 != 0) {
    throw InputError("code length " + std::to_string(codes.bits()) +
                     " is not divisible by 64");
  }
  if (ids.size() != codes.rows()) {
    throw InputError("index has " + std::to_string(codes.rows()) + " codes but " +
                     std::to_string(ids.size()) + " ids");
  }
  HammingIndex index;
  index.bits_ = codes.bits();
  index.ids_ = std::move(ids);
  index.words_.reserve(codes.rows() * index.words_per_row());
  for (std::size_t r = 0; r < codes.rows(); ++r) {
    auto packed = PackSigns(codes.row(r));
    index.words_.insert(index.words_.end(), packed.begin(), packed.end());
  }
  return index;
}

CodeMatrix HammingIndex::Unpack() const {
  std::vector<std::int8_t> signs(size() * bits_);
  for (std::size_t r = 0; r < size(); ++r) {
    auto words = row(r);
    for (std::size_t t = 0; t < bits_; ++t) {
      signs[r * bits_ + t] = (words[t / 64] >> (63 - t % 64)) & 1 ? 1 : -1;
    }
  }
  return CodeMatrix(size(), bits_, std::move(signs));
}

std::size_t HammingIndex::ByteSize() const {
  std::size_t bytes = size() * bits_ / 8;
  for (const auto& id : ids_) bytes += 2 + id.size();
  return bytes;
}

void HammingIndex::CheckQuery(const QueryCode& q) const {
  if (q.length != bits_ || q.bits.size() != words_per_row()) {
    throw InputError("query code has " + std::to_string(q.length) +
                     " bits, index has " + std::to_string(bits_));
  }
  if (q.real && q.real->size() != bits_) {
    throw InputError("query projection length does not match code length");
  }
}

CandidateSet HammingIndex::RadiusExpand(const QueryCode& q, std::size_t alpha,
                                        QueryStats* stats) const {
  CheckQuery(q);
  const std::size_t n = size();
  if (alpha < 1 || alpha > n) {
    throw InputError("alpha=" + std::to_string(alpha) + " outside [1, " +
                     std::to_string(n) + "]");
  }
  const std::size_t wpr = words_per_row();
  std::vector<std::uint16_t> dist(n);
  std::vector<std::size_t> histogram(bits_ + 1, 0);
  const std::uint64_t* base = words_.data();
  for (std::size_t r = 0; r < n; ++r) {
    std::uint32_t d = 0;
    const std::uint64_t* w = base + r * wpr;
    for (std::size_t i = 0; i < wpr; ++i) d += std::popcount(w[i] ^ q.bits[i]);
    dist[r] = static_cast<std::uint16_t>(d);
    ++histogram[d];
  }
  // Grow the radius until the ball holds alpha rows.
  std::size_t radius = 0;
  std::size_t total = histogram[0];
  while (total < alpha) total += histogram[++radius];

  // Bucket offsets give (distance, row) order without a comparison sort.
  std::vector<std::size_t> offset(radius + 2, 0);
  for (std::size_t d = 0; d <= radius; ++d) offset[d + 1] = offset[d] + histogram[d];
  CandidateSet out(total);
  for (std::size_t r = 0; r < n; ++r) {
    if (dist[r] <= radius) out[offset[dist[r]]++] = {r, dist[r], 0.0};
  }
  if (stats != nullptr) {
    stats->examined = n;
    stats->radius = static_cast<std::uint32_t>(radius);
  }
  return out;
}

CandidateSet HammingIndex::FullScanTopK(const QueryCode& q, std::size_t k) const {
  CheckQuery(q);
  if (k < 1 || k > size()) {
    throw InputError("k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(size()) + "]");
  }
  CandidateSet all(size());
  for (std::size_t r = 0; r < size(); ++r) {
    all[r] = {r, HammingDistance(row(r), q.bits), 0.0};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    ByDistanceThenRow);
  all.resize(k);
  return all;
}

CandidateSet RerankTop(const HammingIndex& index, CandidateSet candidates,
                       const QueryCode& q, std::size_t j) {
  if (!q.real) throw InputError("re-ranking needs the real-valued query projection");
  if (q.real->size() != index.bits()) {
    throw InputError("query projection length does not match code length");
  }
  if (j > candidates.size()) {
    throw InputError("j=" + std::to_string(j) + " exceeds " +
                     std::to_string(candidates.size()) + " candidates");
  }
  const std::span<const double> v(*q.real);
  const double v_sum = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& c : candidates) c.score = SignedDot(index.row(c.row), v, v_sum);
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(j),
                    candidates.end(), ByScoreThenDistance);
  candidates.resize(j);
  return candidates;
}

CandidateSet RerankByBits(const HammingIndex& index, CandidateSet candidates,
                          std::size_t j) {
  if (j > candidates.size()) {
    throw InputError("j=" + std::to_string(j) + " exceeds " +
                     std::to_string(candidates.size()) + " candidates");
  }
  const double l = static_cast<double>(index.bits());
  for (auto& c : candidates) c.score = l - 2.0 * c.distance;
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(j),
                    candidates.end(), ByScoreThenDistance);
  candidates.resize(j);
  return candidates;
}

CandidateSet Retrieve(const HammingIndex& index, const QueryCode& q, std::size_t alpha,
                      std::size_t j, QueryStats* stats) {
  const auto t0 = std::chrono::steady_clock::now();
  CandidateSet candidates = index.RadiusExpand(q, alpha, stats);
  j = std::min(j, candidates.size());
  CandidateSet top = q.real ? RerankTop(index, std::move(candidates), q, j)
                            : RerankByBits(index, std::move(candidates), j);
  if (stats != nullptr) {
    stats->nanoseconds = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - t0)
            .count());
  }
  return top;
}

std::string SerializeIndex(const HammingIndex& index) {
  std::ostringstream out;
  detail::WriteMagic(out, kIndexMagic);
  detail::WriteU32(out, static_cast<std::uint32_t>(index.size()));
  detail::WriteU32(out, static_cast<std::uint32_t>(index.bits()));
  for (std::size_t r = 0; r < index.size(); ++r) {
    for (std::uint64_t w : index.row(r)) {
      for (int b = 7; b >= 0; --b) out.put(static_cast<char>((w >> (8 * b)) & 0xff));
    }
  }
  for (const auto& id : index.ids()) detail::WriteShortString(out, id);
  return std::move(out).str();
}

HammingIndex ParseIndex(std::string_view bytes) {
  detail::ByteReader r(bytes, "index file");
  r.ExpectMagic(kIndexMagic);
  const std::uint32_t n = r.U32();
  const std::uint32_t bits = r.U32();
  if (bits == 0 || bits % 64 != 0) {
    throw InputError("index file: code length " + std::to_string(bits) +
                     " is not divisible by 64");
  }
  auto payload = r.Bytes(static_cast<std::size_t>(n) * bits / 8);
  std::vector<std::int8_t> signs(static_cast<std::size_t>(n) * bits);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto byte = static_cast<unsigned char>(payload[i]);
    for (std::size_t t = 0; t < 8; ++t) signs[i * 8 + t] = (byte & (0x80u >> t)) ? 1 : -1;
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(r.ShortString());
  if (r.remaining() != 0) throw InputError("index file: trailing bytes");
  return HammingIndex::Build(CodeMatrix(n, bits, std::move(signs)), std::move(ids));
}

void SaveIndex(const std::string& path, const HammingIndex& index) {
  detail::WriteFile(path, SerializeIndex(index));
}

HammingIndex LoadIndex(const std::string& path) {
  return ParseIndex(detail::ReadFile(path));
}

}  // namespace hashrag
