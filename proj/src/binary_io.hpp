#pragma once

// Little-endian primitives shared by the binary file formats.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "hashrag/error.hpp"

namespace hashrag::detail {

inline void WriteU16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

inline void WriteU32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void WriteF32(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, sizeof(v));
  WriteU32(out, v);
}

inline void WriteMagic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

// Length-prefixed (u16) UTF-8 string.
inline void WriteShortString(std::ostream& out, std::string_view s) {
  if (s.size() > 0xffff) throw InputError("identifier longer than 65535 bytes");
  WriteU16(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Bounds-checked cursor over an in-memory file image.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void Require(std::size_t n) const {
    if (remaining() < n) {
      throw InputError(what_ + ": truncated payload at byte " +
                       std::to_string(pos_) + " (need " + std::to_string(n) +
                       ", have " + std::to_string(remaining()) + ")");
    }
  }

  void ExpectMagic(std::string_view magic) {
    Require(magic.size());
    if (bytes_.substr(pos_, magic.size()) != magic) {
      throw InputError(what_ + ": bad magic, expected \"" + std::string(magic) +
                       "\"");
    }
    pos_ += magic.size();
  }

  std::uint16_t U16() {
    Require(2);
    auto p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t U32() {
    Require(4);
    auto p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float F32() {
    const std::uint32_t v = U32();
    float f;
    std::memcpy(&f, &v, sizeof(f));
    return f;
  }

  std::string_view Bytes(std::size_t n) {
    Require(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string ShortString() {
    const std::uint16_t len = U16();
    return std::string(Bytes(len));
  }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view bytes);

}  // namespace hashrag::detail
