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

// Deterministic text embedder: signed feature hashing of TF-IDF weighted
// token unigrams and bigrams, followed by L2 normalization.
//
// Feature strings are "u\x1f<tok>" for unigrams and "b\x1f<a>\x1f<b>" for
// adjacent pairs. Each is hashed with FNV-1a 64 starting from
// fnv1a_u64(hash_seed); the bucket is h % dimension and the sign is taken
// from bit 32 of h (set -> negative).
//
// IDF uses the smoothed form ln((1 + N) / (1 + df)) + 1 over a reference
// document set (the demonstration store). Features never seen in the
// reference set get df = 0. Without a reference set every weight is 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "safeguard/common.hpp"

namespace safeguard {

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values)
      : values_(std::move(values)) {
    double ss = 0.0;
    for (double x : values_) ss += x * x;
    norm_ = std::sqrt(ss);
  }

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }
  double norm() const { return norm_; }
  bool is_zero() const { return norm_ == 0.0; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

// dot(a, b) / (|a| |b|), clamped to [-1, 1]; 0 when either side is zero.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw std::invalid_argument("cosine: dimension mismatch (" +
                                std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()) + ")");
  if (a.is_zero() || b.is_zero()) return 0.0;
  const auto x = a.values();
  const auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

class Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;
  static constexpr std::uint64_t kDefaultHashSeed = 0x5afe9a4dULL;

  explicit Embedder(std::size_t dimension = kDefaultDimension,
                    std::uint64_t hash_seed = kDefaultHashSeed)
      : dim_(dimension), seed_(hash_seed), seed_state_(fnv1a_u64(hash_seed)) {
    if (dimension < 2) throw std::invalid_argument("embedding dimension must be >= 2");
  }

  std::size_t dimension() const { return dim_; }
  std::uint64_t hash_seed() const { return seed_; }
  std::size_t reference_documents() const { return n_docs_; }

  // Freezes document frequencies from `documents` (each a token list).
  // Replaces any earlier table.
  void fit_idf(std::span<const std::vector<std::string>> documents) {
    df_.clear();
    n_docs_ = documents.size();
    std::unordered_set<std::uint64_t> seen;
    for (const auto& doc : documents) {
      seen.clear();
      for_each_feature(doc, [&](std::uint64_t h) { seen.insert(h); });
      for (std::uint64_t h : seen) ++df_[h];
    }
  }

  double idf(std::uint64_t feature_hash) const {
    if (n_docs_ == 0) return 1.0;
    std::size_t df = 0;
    if (auto it = df_.find(feature_hash); it != df_.end()) df = it->second;
    return std::log((1.0 + static_cast<double>(n_docs_)) /
                    (1.0 + static_cast<double>(df))) +
           1.0;
  }

  // Unit-normalized embedding; the zero vector for empty input (or, in
  // the degenerate case, when hashed contributions cancel exactly).
  EmbeddingVector embed(std::span<const std::string> tokens) const {
    std::vector<double> v(dim_, 0.0);
    for_each_feature(tokens, [&](std::uint64_t h) {
      const double w = idf(h);
      v[h % dim_] += (h >> 32) & 1U ? -w : w;
    });
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (ss > 0.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (double& x : v) x *= inv;
    }
    return EmbeddingVector(std::move(v));
  }

  std::uint64_t unigram_hash(const std::string& a) const {
    std::uint64_t h = fnv1a("u\x1f", seed_state_);
    return fnv1a(a, h);
  }

  std::uint64_t bigram_hash(const std::string& a, const std::string& b) const {
    std::uint64_t h = fnv1a("b\x1f", seed_state_);
    h = fnv1a(a, h);
    h = fnv1a("\x1f", h);
    return fnv1a(b, h);
  }

 private:
  template <typename F>
  void for_each_feature(std::span<const std::string> tokens, F&& f) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      f(unigram_hash(tokens[i]));
      if (i + 1 < tokens.size()) f(bigram_hash(tokens[i], tokens[i + 1]));
    }
  }

  std::size_t dim_;
  std::uint64_t seed_;
  std::uint64_t seed_state_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::uint64_t, std::size_t> df_;
};

}  // namespace safeguard
