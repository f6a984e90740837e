#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "fdcnet/errors.hpp"

// Little-endian fixed-width I/O for the FDCN/FDCD containers.
namespace fdcnet::binio {

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

inline void put_f64s(std::ostream& os, std::span<const double> values) {
  for (double v : values) put(os, v);
}

template <typename T>
T get(std::istream& is, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw FormatError(std::string("truncated file while reading ") + what);
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void get_f64s(std::istream& is, std::span<double> out, const char* what) {
  for (auto& v : out) v = get<double>(is, what);
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4];
  if (!is.read(got, 4)) throw FormatError(std::string("truncated file: missing ") + magic + " magic");
  if (std::memcmp(got, magic, 4) != 0) throw FormatError(std::string("bad magic: expected ") + magic);
}

// Bytes left in a seekable stream.
inline std::uint64_t remaining(std::istream& is) {
  const auto here = is.tellg();
  is.seekg(0, std::ios::end);
  const auto end = is.tellg();
  is.seekg(here);
  return static_cast<std::uint64_t>(end - here);
}

}  // namespace fdcnet::binio
