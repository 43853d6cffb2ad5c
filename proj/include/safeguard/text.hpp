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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "safeguard/common.hpp"

namespace safeguard {

namespace internal {

// Byte length of a Unicode whitespace code point starting at s[i], or 0.
// Covers ASCII whitespace and the White_Space code points above U+007F in
// their UTF-8 encodings.
inline std::size_t whitespace_length(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) -> unsigned char {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0;
  };
  switch (b(0)) {
    case ' ': case '\t': case '\n': case '\v': case '\f': case '\r':
      return 1;
    case 0xC2:  // U+0085, U+00A0
      return (b(1) == 0x85 || b(1) == 0xA0) ? 2 : 0;
    case 0xE1:  // U+1680
      return (b(1) == 0x9A && b(2) == 0x80) ? 3 : 0;
    case 0xE2:
      if (b(1) == 0x80 &&
          ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 ||
           b(2) == 0xAF))
        return 3;  // U+2000..U+200A, U+2028, U+2029, U+202F
      if (b(1) == 0x81 && b(2) == 0x9F) return 3;  // U+205F
      return 0;
    case 0xE3:  // U+3000
      return (b(1) == 0x80 && b(2) == 0x80) ? 3 : 0;
    default:
      return 0;
  }
}

}  // namespace internal

// Splits on Unicode whitespace and lowercases ASCII letters. Bytes outside
// ASCII pass through unchanged.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t w = internal::whitespace_length(text, i); w > 0) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      i += w;
      continue;
    }
    char c = text[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    cur.push_back(c);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Dense bijection between token strings and ids 0..size()-1. Id 0 is always
// the end-of-sequence marker.
class Vocabulary {
 public:
  static constexpr std::string_view kEos = "</s>";

  Vocabulary() { add(std::string(kEos)); }

  // Returns the id of `token`, inserting it if new.
  TokenId add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  std::optional<TokenId> find(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end())
      return it->second;
    return std::nullopt;
  }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  TokenId eos() const { return 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Maps tokens to ids, dropping tokens that are not in the vocabulary.
  // `dropped` (optional) receives the number of tokens skipped.
  TokenSeq encode(const std::vector<std::string>& words,
                  std::size_t* dropped = nullptr) const {
    TokenSeq ids;
    ids.reserve(words.size());
    std::size_t miss = 0;
    for (const auto& w : words) {
      if (auto id = find(w)) {
        ids.push_back(*id);
      } else {
        ++miss;
      }
    }
    if (dropped != nullptr) *dropped = miss;
    return ids;
  }

  // Inverse of encode for display: joins tokens with single spaces, leaving
  // out the end-of-sequence marker.
  std::string decode(std::span<const TokenId> ids) const {
    std::string s;
    for (TokenId id : ids) {
      if (id == eos()) continue;
      if (!s.empty()) s.push_back(' ');
      s += token(id);
    }
    return s;
  }

  // Token strings of `ids` without the end-of-sequence marker.
  std::vector<std::string> words(std::span<const TokenId> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids)
      if (id != eos()) out.push_back(token(id));
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// A training corpus: documents tokenized into one stream, each document
// terminated by the end-of-sequence marker.
struct Corpus {
  Vocabulary vocabulary;
  TokenSeq stream;
};

inline Corpus build_corpus(const std::vector<std::string>& documents) {
  Corpus corpus;
  for (const auto& doc : documents) {
    auto words = tokenize(doc);
    if (words.empty()) continue;
    for (const auto& w : words) corpus.stream.push_back(corpus.vocabulary.add(w));
    corpus.stream.push_back(corpus.vocabulary.eos());
  }
  return corpus;
}

}  // namespace safeguard
