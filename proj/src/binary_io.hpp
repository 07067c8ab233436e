#pragma once

// Little-endian primitives shared by the container and checkpoint codecs.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "seqcls/errors.hpp"

namespace seqcls::binio {

template <typename U>
void put_le(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_str16(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw FormatError("string too long for a u16 length prefix");
  put_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Bounds-checked reader; every short read surfaces as a FormatError.
class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(what_ + ": truncated file");
  }

  template <typename U>
  U le() {
    unsigned char b[sizeof(U)];
    bytes(reinterpret_cast<char*>(b), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
    return v;
  }

  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

  std::string str(std::size_t n) {
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

  std::string str16() { return str(le<std::uint16_t>()); }

  void floats(std::vector<float>& dst, std::size_t n) {
    std::vector<unsigned char> raw(n * 4);
    if (n) bytes(reinterpret_cast<char*>(raw.data()), raw.size());
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = std::uint32_t(raw[4 * i]) | std::uint32_t(raw[4 * i + 1]) << 8 |
                              std::uint32_t(raw[4 * i + 2]) << 16 | std::uint32_t(raw[4 * i + 3]) << 24;
      dst[i] = std::bit_cast<float>(u);
    }
  }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

inline void put_floats(std::ostream& out, const std::vector<float>& v) {
  std::vector<char> raw(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) raw[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

}  // namespace seqcls::binio
