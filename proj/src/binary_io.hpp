// Copyright 2026 The PKRE Authors.
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

#ifndef PKRE_SRC_BINARY_IO_HPP_
#define PKRE_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "pkre/error.hpp"

namespace pkre::io {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }

  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void floats(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    T value{};
    bytes(&value, sizeof(T));
    return value;
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::kFormat, what_ + ": truncated file");
    }
  }

  std::string str(std::size_t max_len = 1u << 24) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw Error(ErrorCode::kFormat, what_ + ": corrupt length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void floats(std::span<float> v) { bytes(v.data(), v.size_bytes()); }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace pkre::io

#endif  // PKRE_SRC_BINARY_IO_HPP_
