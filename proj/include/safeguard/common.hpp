// Copyright 2026 The Safeguard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace safeguard {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (model, demonstration store, prompt set).
class FormatError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, 64 bit. Used wherever a hash must be stable across platforms and
// standard library implementations (std::hash is neither).
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a_u64(std::uint64_t value,
                               std::uint64_t state = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffU;
    state *= kFnvPrime;
  }
  return state;
}

struct TokenSeqHash {
  std::size_t operator()(const TokenSeq& seq) const noexcept {
    std::uint64_t h = kFnvOffset;
    for (TokenId t : seq) h = fnv1a_u64(t, h);
    return static_cast<std::size_t>(h);
  }
};

// Seeded generator used for every random decision in the library.
// std::mt19937_64 output is fixed by the standard; the distributions in
// <random> are not, so bounded draws go through uniform_index below.
using Rng = std::mt19937_64;

// Unbiased draw from [0, n) by rejection. n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Picks `count` distinct positions of [0, n) uniformly at random (partial
// Fisher-Yates). Result is sorted ascending.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng,
                                                           std::size_t n,
                                                           std::size_t count) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (count > n) count = n;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace safeguard
