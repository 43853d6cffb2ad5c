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

// Test-only models and oracles. Nothing here calls into the search code.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "safeguard/common.hpp"
#include "safeguard/embedding.hpp"
#include "safeguard/ngram.hpp"
#include "safeguard/text.hpp"

namespace safeguard::testing {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Vocabulary "</s>", "w1", ..., "w<words>".
inline Vocabulary small_vocabulary(std::size_t words) {
  Vocabulary v;
  for (std::size_t i = 1; i <= words; ++i) v.add("w" + std::to_string(i));
  return v;
}

// A language model given by a function of the full context. Log
// probabilities are derived from the function's probabilities; zero maps
// to -inf.
class FunctionModel {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId>)>;

  FunctionModel(Vocabulary v, Fn fn) : vocab_(std::move(v)), fn_(std::move(fn)) {}

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  TokenId eos() const { return vocab_.eos(); }

  std::vector<double> next_distribution(std::span<const TokenId> ctx) const {
    return fn_(ctx);
  }
  std::vector<double> next_log_distribution(std::span<const TokenId> ctx) const {
    auto p = fn_(ctx);
    for (double& x : p) x = x > 0.0 ? std::log(x) : kNegInf;
    return p;
  }

 private:
  Vocabulary vocab_;
  Fn fn_;
};

// Random distributions keyed by context: each distinct context draws its
// own distribution from a generator seeded by (seed, context). Roughly
// `zero_rate` of the entries are zero (never all of them).
inline FunctionModel random_model(std::size_t words, std::uint64_t seed,
                                  double zero_rate = 0.0) {
  const std::size_t v = words + 1;
  return FunctionModel(small_vocabulary(words), [=](std::span<const TokenId> ctx) {
    std::uint64_t h = fnv1a_u64(seed);
    for (TokenId t : ctx) h = fnv1a_u64(t, h);
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> p(v);
    double sum = 0.0;
    for (auto& x : p) {
      x = u(rng);
      if (u(rng) < 0.05 + 0.95 * zero_rate) x = 0.0;
      sum += x;
    }
    if (sum == 0.0) {
      p[rng() % v] = 1.0;
      sum = 1.0;
    }
    for (auto& x : p) x /= sum;
    return p;
  });
}

// Wraps a model and removes banned continuations from its support: after
// `prompt_len` prompt tokens, token t is impossible when (continuation + t)
// is banned.
template <typename M>
class BannedSupport {
 public:
  BannedSupport(const M& inner, std::size_t prompt_len, std::set<TokenSeq> banned)
      : inner_(&inner), prompt_len_(prompt_len), banned_(std::move(banned)) {}

  const Vocabulary& vocabulary() const { return inner_->vocabulary(); }
  std::size_t vocab_size() const { return inner_->vocab_size(); }
  TokenId eos() const { return inner_->eos(); }

  std::vector<double> next_log_distribution(std::span<const TokenId> ctx) const {
    auto lp = inner_->next_log_distribution(ctx);
    TokenSeq cont(ctx.begin() + static_cast<std::ptrdiff_t>(prompt_len_), ctx.end());
    cont.push_back(0);
    for (std::size_t t = 0; t < lp.size(); ++t) {
      cont.back() = static_cast<TokenId>(t);
      if (banned_.contains(cont)) lp[t] = kNegInf;
    }
    return lp;
  }

 private:
  const M* inner_;
  std::size_t prompt_len_;
  std::set<TokenSeq> banned_;
};

struct Scored {
  TokenSeq tokens;
  double loglik = 0.0;
  bool finished = false;
};

inline bool better(const Scored& a, const Scored& b) {
  if (a.loglik != b.loglik) return a.loglik > b.loglik;
  return a.tokens < b.tokens;
}

// Plain beam search: keeps `width` hypotheses, finished ones carried over
// unchanged, full sort of all extensions each step, top `k` returned.
template <typename M>
std::vector<Scored> reference_beam_search(const M& model, const TokenSeq& prompt,
                                          std::size_t k, std::size_t width,
                                          int max_tokens, int min_tokens = 0) {
  std::vector<Scored> beam{Scored{}};
  for (int t = 0; t < max_tokens; ++t) {
    bool any_alive = false;
    for (const auto& s : beam) any_alive = any_alive || !s.finished;
    if (!any_alive) break;
    std::vector<Scored> all;
    for (const auto& s : beam) {
      if (s.finished) {
        all.push_back(s);
        continue;
      }
      TokenSeq ctx = prompt;
      ctx.insert(ctx.end(), s.tokens.begin(), s.tokens.end());
      const auto lp = model.next_log_distribution(ctx);
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        if (lp[tok] == kNegInf) continue;
        if (tok == model.eos() && static_cast<int>(s.tokens.size()) < min_tokens) continue;
        Scored e = s;
        e.tokens.push_back(static_cast<TokenId>(tok));
        e.loglik += lp[tok];
        e.finished = tok == model.eos();
        all.push_back(std::move(e));
      }
    }
    std::sort(all.begin(), all.end(), better);
    if (all.size() > width) all.resize(width);
    beam = std::move(all);
  }
  if (beam.size() > k) beam.resize(k);
  return beam;
}

// Every continuation the search could emit: sequences ending in the end
// marker within `max_tokens` tokens, plus all length-`max_tokens` sequences
// without it. Zero-probability steps are skipped.
template <typename M>
std::vector<Scored> enumerate_all(const M& model, const TokenSeq& prompt, int max_tokens) {
  std::vector<Scored> out;
  std::function<void(Scored&)> rec = [&](Scored& s) {
    if (s.finished || static_cast<int>(s.tokens.size()) == max_tokens) {
      out.push_back(s);
      return;
    }
    TokenSeq ctx = prompt;
    ctx.insert(ctx.end(), s.tokens.begin(), s.tokens.end());
    const auto lp = model.next_log_distribution(ctx);
    for (std::size_t tok = 0; tok < lp.size(); ++tok) {
      if (lp[tok] == kNegInf) continue;
      Scored e = s;
      e.tokens.push_back(static_cast<TokenId>(tok));
      e.loglik += lp[tok];
      e.finished = tok == model.eos();
      rec(e);
    }
  };
  Scored root;
  rec(root);
  std::sort(out.begin(), out.end(), better);
  return out;
}

// Cosine by explicit loops over raw values.
inline double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Max cosine of `v` over raw example vectors; 0 for none.
inline double plain_max_similarity(const std::vector<double>& v,
                                   const std::vector<std::vector<double>>& examples) {
  double best = examples.empty() ? 0.0 : -2.0;
  for (const auto& e : examples) best = std::max(best, plain_cosine(v, e));
  return best;
}

inline std::string data_path(const std::string& rel) {
#ifdef SAFEGUARD_DATA_DIR
  return std::string(SAFEGUARD_DATA_DIR) + "/" + rel;
#else
  return "data/" + rel;
#endif
}

}  // namespace safeguard::testing
