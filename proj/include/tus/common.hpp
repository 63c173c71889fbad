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

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace tus {

using SetId = std::uint32_t;
using CentroidId = std::uint32_t;

// Error taxonomy; the CLI maps each kind onto a distinct exit code.
enum class ErrorKind { usage, data, internal };

// Every error carries a short machine-readable code such as "zero_vector".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class UsageError : public Error {
 public:
  UsageError(std::string code, const std::string& what)
      : Error(ErrorKind::usage, std::move(code), what) {}
};

class DataError : public Error {
 public:
  DataError(std::string code, const std::string& what)
      : Error(ErrorKind::data, std::move(code), what) {}
};

class InvariantError : public Error {
 public:
  InvariantError(std::string code, const std::string& what)
      : Error(ErrorKind::internal, std::move(code), what) {}
};

/// A column vector addressed by its owning set and its position in that set.
struct Handle {
  SetId set_id = 0;
  std::uint32_t index = 0;

  friend bool operator==(const Handle&, const Handle&) = default;
  friend auto operator<=>(const Handle&, const Handle&) = default;
};

/// Lower and upper estimates sandwiching an exact score.
struct BoundPair {
  double lb = 0.0;
  double ub = 0.0;
};

/// Runs body(i) for i in [0, n) over up to `threads` workers. Work is split
/// into contiguous blocks so results written by index are deterministic.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
}

inline unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace tus
