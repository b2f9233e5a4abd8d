#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "c2v/common/error.hpp"

namespace c2v::io {

// Little-endian primitive I/O for the binary container formats.

template <class T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
  requires std::is_arithmetic_v<T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw ValidationError("unexpected end of binary stream");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <class T>
void write_le_array(std::ostream& os, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (T v : values) write_le(os, v);
  }
}

template <class T>
void read_le_array(std::istream& is, std::span<T> out) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()))) {
      throw ValidationError("unexpected end of binary stream");
    }
  } else {
    for (T& v : out) v = read_le<T>(is);
  }
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw ValidationError(std::string(what) + ": bad magic (expected '" + std::string(magic) + "')");
  }
}

inline void write_string(std::ostream& os, std::string_view s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t max_len = 1u << 24) {
  const auto n = read_le<std::uint32_t>(is);
  if (n > max_len) throw ValidationError("string length out of range");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw ValidationError("unexpected end of binary stream");
  return s;
}

}  // namespace c2v::io
