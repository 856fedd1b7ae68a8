#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "facediff/errors.hpp"

namespace facediff::detail {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written as raw little-endian values");

template <typename T>
void write_pod(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of binary file");
  return value;
}

template <typename T>
void write_array(std::ostream& os, std::span<const T> values) {
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
std::vector<T> read_array(std::istream& is, std::size_t count) {
  std::vector<T> out(count);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!is) throw IoError("unexpected end of binary file");
  return out;
}

inline void write_floats(std::ostream& os, std::span<const double> values) {
  std::vector<float> f(values.begin(), values.end());
  write_array<float>(os, f);
}

}  // namespace facediff::detail
