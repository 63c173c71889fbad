// Copyright 2026 the tus authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "tus/common.hpp"

namespace tus::io {

template <typename T>
concept Scalar = std::is_arithmetic_v<T>;

namespace detail {

template <Scalar T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

}  // namespace detail

/// Append-only little-endian byte buffer.
class Writer {
 public:
  template <Scalar T>
  void put(T value) {
    value = detail::byteswap_if_big(value);
    const auto* p = reinterpret_cast<const unsigned char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <Scalar T>
  void put_span(std::span<const T> values) {
    for (T v : values) put(v);
  }

  void put_bytes(std::string_view raw) {
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

/// Bounds-checked little-endian reader over an in-memory buffer.
class Reader {
 public:
  Reader(std::span<const unsigned char> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <Scalar T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw DataError("truncated", "unexpected end of data in " + source_);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return detail::byteswap_if_big(value);
  }

  template <Scalar T>
  std::vector<T> get_vector(std::size_t count) {
    if (count > (bytes_.size() - pos_) / sizeof(T)) {
      throw DataError("truncated", "unexpected end of data in " + source_);
    }
    std::vector<T> out(count);
    for (auto& v : out) v = get<T>();
    return out;
  }

  std::string get_bytes(std::size_t count) {
    if (pos_ + count > bytes_.size()) {
      throw DataError("truncated", "unexpected end of data in " + source_);
    }
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), count);
    pos_ += count;
    return out;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("missing_file", "cannot open " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(size);
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw DataError("io", "failed reading " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("io", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("io", "failed writing " + path.string());
}

inline std::uint32_t crc32(std::span<const unsigned char> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  // zlib takes uInt lengths.
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace tus::io
