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

// Add-k smoothed n-gram language model.
//
// The model answers "distribution of the next token given a context" and is
// the next-token provider for the guarded beam search. Counts are kept for
// every context length 0..order-1 so that contexts shorter than order-1
// (the first few tokens of a prompt) are answered from the matching
// lower-order table. Longer contexts are truncated to their last order-1
// tokens.
//
//   P(t | ctx) = (count(ctx, t) + k) / (count(ctx) + k * |V|)
//
// An unseen context has count(ctx) = 0 and yields the uniform distribution,
// for k = 0 as well as k > 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeguard/common.hpp"
#include "safeguard/text.hpp"

namespace safeguard {

// Anything that can drive the search: a vocabulary, an end marker, and
// log-probabilities of the next token given a full context.
template <typename M>
concept LanguageModel = requires(const M& m, std::span<const TokenId> ctx) {
  { m.vocabulary() } -> std::convertible_to<const Vocabulary&>;
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.eos() } -> std::convertible_to<TokenId>;
  { m.next_log_distribution(ctx) } -> std::convertible_to<std::vector<double>>;
};

class InfinitePerplexity : public Error {
 public:
  using Error::Error;
};

class NgramModel {
 public:
  static constexpr int kFormatVersion = 1;

  struct Row {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> counts;
  };

  NgramModel() = default;

  // Counts every (context, token) pair of `stream` for context lengths
  // 0..order-1. Throws std::invalid_argument for order < 1, for tokens
  // outside the vocabulary, and for an empty stream with k = 0.
  static NgramModel train(Vocabulary vocabulary, std::span<const TokenId> stream,
                          int order, double smoothing_k) {
    if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
    if (!(smoothing_k >= 0.0))
      throw std::invalid_argument("smoothing k must be non-negative");
    if (stream.empty() && smoothing_k == 0.0)
      throw std::invalid_argument(
          "empty corpus with k = 0 gives an undefined distribution");
    NgramModel m;
    m.order_ = order;
    m.k_ = smoothing_k;
    m.vocab_ = std::move(vocabulary);
    m.tables_.resize(static_cast<std::size_t>(order));
    TokenSeq ctx;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (stream[i] >= m.vocab_.size())
        throw std::invalid_argument("corpus token outside vocabulary");
      for (int len = 0; len < order; ++len) {
        if (static_cast<std::size_t>(len) > i) break;
        ctx.assign(stream.begin() + static_cast<std::ptrdiff_t>(i - len),
                   stream.begin() + static_cast<std::ptrdiff_t>(i));
        Row& row = m.tables_[static_cast<std::size_t>(len)][ctx];
        ++row.total;
        ++row.counts[stream[i]];
      }
    }
    return m;
  }

  static NgramModel train(const Corpus& corpus, int order, double smoothing_k) {
    return train(corpus.vocabulary, corpus.stream, order, smoothing_k);
  }

  int order() const { return order_; }
  double smoothing_k() const { return k_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  TokenId eos() const { return vocab_.eos(); }

  // Probability vector over the vocabulary; sums to 1.
  std::vector<double> next_distribution(std::span<const TokenId> context) const {
    const std::size_t v = vocab_.size();
    const Row* row = lookup(context);
    const double total = row ? static_cast<double>(row->total) : 0.0;
    const double denom = total + k_ * static_cast<double>(v);
    if (denom == 0.0) return std::vector<double>(v, 1.0 / static_cast<double>(v));
    std::vector<double> p(v, k_ / denom);
    if (row != nullptr)
      for (const auto& [tok, c] : row->counts)
        p[tok] = (static_cast<double>(c) + k_) / denom;
    return p;
  }

  // Natural-log probabilities; -inf for zero-probability tokens.
  std::vector<double> next_log_distribution(
      std::span<const TokenId> context) const {
    const std::size_t v = vocab_.size();
    const Row* row = lookup(context);
    const double total = row ? static_cast<double>(row->total) : 0.0;
    const double denom = total + k_ * static_cast<double>(v);
    if (denom == 0.0)
      return std::vector<double>(v, -std::log(static_cast<double>(v)));
    const double log_denom = std::log(denom);
    const double floor = k_ > 0.0 ? std::log(k_) - log_denom
                                   : -std::numeric_limits<double>::infinity();
    std::vector<double> lp(v, floor);
    if (row != nullptr)
      for (const auto& [tok, c] : row->counts)
        lp[tok] = std::log(static_cast<double>(c) + k_) - log_denom;
    return lp;
  }

  double log_prob(std::span<const TokenId> context, TokenId token) const {
    const std::size_t v = vocab_.size();
    const Row* row = lookup(context);
    const double total = row ? static_cast<double>(row->total) : 0.0;
    const double denom = total + k_ * static_cast<double>(v);
    if (denom == 0.0) return -std::log(static_cast<double>(v));
    double c = 0.0;
    if (row != nullptr)
      if (auto it = row->counts.find(token); it != row->counts.end())
        c = static_cast<double>(it->second);
    if (c + k_ == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(c + k_) - std::log(denom);
  }

  // exp(-(1/N) * sum log P(t_j | t_<j)) over positions j >= first_scored.
  // Earlier positions only condition. Throws InfinitePerplexity when any
  // scored token has probability zero.
  double perplexity(std::span<const TokenId> text,
                    std::size_t first_scored = 0) const {
    if (first_scored >= text.size())
      throw std::invalid_argument("perplexity needs at least one scored token");
    double sum = 0.0;
    for (std::size_t j = first_scored; j < text.size(); ++j) {
      const double lp = log_prob(text.first(j), text[j]);
      if (std::isinf(lp))
        throw InfinitePerplexity("infinite perplexity: token '" +
                                 vocab_.token(text[j]) + "' has probability 0");
      sum += lp;
    }
    return std::exp(-sum / static_cast<double>(text.size() - first_scored));
  }

  // Serialized form:
  //   {"format": "safeguard-ngram", "version": 1, "order": int,
  //    "smoothing_k": real, "vocabulary": [string, ...],
  //    "tables": [{"context": [id, ...], "total": int,
  //                "counts": [[id, count], ...]}, ...]}
  // Tables are sorted by (context length, context ids); counts by token id.
  nlohmann::json to_json() const {
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& table : tables_) {
      std::map<TokenSeq, const Row*> sorted;
      for (const auto& [ctx, row] : table) sorted.emplace(ctx, &row);
      for (const auto& [ctx, row] : sorted) {
        std::vector<std::pair<TokenId, std::uint64_t>> counts(
            row->counts.begin(), row->counts.end());
        std::sort(counts.begin(), counts.end());
        nlohmann::json jc = nlohmann::json::array();
        for (const auto& [t, c] : counts) jc.push_back({t, c});
        tables.push_back(
            {{"context", ctx}, {"total", row->total}, {"counts", std::move(jc)}});
      }
    }
    return {{"format", "safeguard-ngram"},
            {"version", kFormatVersion},
            {"order", order_},
            {"smoothing_k", k_},
            {"vocabulary", vocab_.tokens()},
            {"tables", std::move(tables)}};
  }

  static NgramModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "safeguard-ngram")
        throw FormatError("not a safeguard n-gram model");
      if (j.at("version").get<int>() != kFormatVersion)
        throw FormatError("unsupported n-gram model version");
      NgramModel m;
      m.order_ = j.at("order").get<int>();
      m.k_ = j.at("smoothing_k").get<double>();
      if (m.order_ < 1 || m.k_ < 0.0) throw FormatError("bad order or k");
      const auto words = j.at("vocabulary").get<std::vector<std::string>>();
      if (words.empty() || words.front() != Vocabulary::kEos)
        throw FormatError("vocabulary must start with the end marker");
      for (const auto& w : words) m.vocab_.add(w);
      if (m.vocab_.size() != words.size())
        throw FormatError("duplicate vocabulary entries");
      m.tables_.resize(static_cast<std::size_t>(m.order_));
      for (const auto& jt : j.at("tables")) {
        auto ctx = jt.at("context").get<TokenSeq>();
        if (ctx.size() >= m.tables_.size()) throw FormatError("context too long");
        Row row;
        row.total = jt.at("total").get<std::uint64_t>();
        std::uint64_t sum = 0;
        for (const auto& jc : jt.at("counts")) {
          const auto t = jc.at(0).get<TokenId>();
          const auto c = jc.at(1).get<std::uint64_t>();
          if (t >= m.vocab_.size()) throw FormatError("token id out of range");
          row.counts[t] = c;
          sum += c;
        }
        if (sum != row.total) throw FormatError("row total mismatch");
        m.tables_[ctx.size()].emplace(std::move(ctx), std::move(row));
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("n-gram model: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json().dump() << '\n';
  }

  static NgramModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
    return from_json(j);
  }

 private:
  const Row* lookup(std::span<const TokenId> context) const {
    if (tables_.empty()) return nullptr;
    const std::size_t len =
        std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    const auto& table = tables_[len];
    TokenSeq key(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    auto it = table.find(key);
    return it == table.end() ? nullptr : &it->second;
  }

  int order_ = 1;
  double k_ = 0.0;
  Vocabulary vocab_;
  std::vector<std::unordered_map<TokenSeq, Row, TokenSeqHash>> tables_;
};

static_assert(LanguageModel<NgramModel>);

}  // namespace safeguard
