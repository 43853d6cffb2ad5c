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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "safeguard/demo_store.hpp"
#include "safeguard/embedding.hpp"

namespace safeguard {

// Length of the longest common subsequence. Two-row DP, O(|a||b|) time,
// O(min(|a|,|b|)) memory.
template <typename T>
std::size_t lcs(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : std::max(prev[j + 1], cur[j]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
std::size_t lcs(const std::vector<T>& a, const std::vector<T>& b) {
  return lcs(std::span<const T>(a), std::span<const T>(b));
}

// Full DP table, (|a|+1) x (|b|+1), for traceback and debugging.
template <typename T>
std::vector<std::vector<std::size_t>> lcs_table(std::span<const T> a,
                                                std::span<const T> b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1,
                                           std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp;
}

// One longest common subsequence, recovered from the full table.
template <typename T>
std::vector<T> lcs_traceback(std::span<const T> a, std::span<const T> b) {
  const auto dp = lcs_table(a, b);
  std::vector<T> out;
  std::size_t i = a.size(), j = b.size();
  while (i > 0 && j > 0) {
    if (a[i - 1] == b[j - 1]) {
      out.push_back(a[i - 1]);
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Length of the longest common contiguous run.
template <typename T>
std::size_t longest_common_substring(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : 0;
      best = std::max(best, cur[j + 1]);
    }
    std::swap(prev, cur);
  }
  return best;
}

inline double lcs_norm(std::size_t lcs_value, std::size_t completion_length) {
  if (completion_length == 0)
    throw std::invalid_argument("lcs_norm: zero-length completion");
  return static_cast<double>(lcs_value) / static_cast<double>(completion_length);
}

// Max cosine between the output's embedding and any example of the store
// (pass the full store, not the sampled subset). 0 for an empty store.
inline double violation_score(std::span<const std::string> output,
                              const Embedder& embedder, const DemoStore& full_store) {
  return full_store.max_similarity(embedder.embed(output)).score;
}

}  // namespace safeguard
