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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "safeguard/demo_store.hpp"
#include "safeguard/embedding.hpp"

namespace safeguard {

// Partition of one candidate batch. Indices refer to the input order.
struct ValidationOutcome {
  std::vector<std::size_t> valid;
  std::vector<std::size_t> invalid;
  std::vector<double> scores;      // max similarity per candidate
  std::vector<double> min_scores;  // min similarity per candidate
  std::vector<std::optional<std::string>> nearest;

  std::size_t size() const { return scores.size(); }
};

inline void check_threshold(double thrv) {
  if (!(thrv > 0.0 && thrv <= 1.0))
    throw std::invalid_argument("validation threshold must lie in (0, 1]");
}

// A candidate is valid iff its max similarity to the store is strictly
// below `thrv`.
inline ValidationOutcome validate(std::span<const EmbeddingVector> candidates,
                                  double thrv, const DemoStore& store) {
  check_threshold(thrv);
  if (candidates.empty()) throw std::invalid_argument("validate: no candidates");
  ValidationOutcome out;
  out.scores.reserve(candidates.size());
  out.min_scores.reserve(candidates.size());
  out.nearest.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto hit = store.max_similarity(candidates[i]);
    (hit.score < thrv ? out.valid : out.invalid).push_back(i);
    out.scores.push_back(hit.score);
    out.min_scores.push_back(hit.min_score);
    out.nearest.push_back(std::move(hit.nearest_id));
  }
  return out;
}

// Embeds token texts and validates them against a fixed store subset.
class Validator {
 public:
  Validator(const Embedder& embedder, const DemoStore& store, double thrv)
      : embedder_(&embedder), store_(&store), thrv_(thrv) {
    check_threshold(thrv);
  }

  double threshold() const { return thrv_; }
  const DemoStore& store() const { return *store_; }
  const Embedder& embedder() const { return *embedder_; }

  ValidationOutcome validate(std::span<const std::vector<std::string>> texts) const {
    std::vector<EmbeddingVector> vecs;
    vecs.reserve(texts.size());
    for (const auto& t : texts) vecs.push_back(embedder_->embed(t));
    return safeguard::validate(vecs, thrv_, *store_);
  }

 private:
  const Embedder* embedder_;
  const DemoStore* store_;
  double thrv_;
};

// Running invalid / examined counts within one time step.
struct StepTally {
  std::size_t examined = 0;
  std::size_t invalid = 0;

  void add(const ValidationOutcome& outcome) {
    examined += outcome.size();
    invalid += outcome.invalid.size();
  }

  double invalid_proportion() const {
    if (examined == 0)
      throw std::logic_error("invalid_proportion before any validation");
    return static_cast<double>(invalid) / static_cast<double>(examined);
  }
};

}  // namespace safeguard
