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

// Validation timing policies.
//
// ContextWise picks the gap to the next validation from how close the
// current candidates are to the demonstration store:
//
//   next = cur + ceil(2^(lambda * (thrv - s)))
//
// where s aggregates candidate/example similarities. Close candidates
// (s near or above thrv) are re-checked on the next step; distant ones let
// the search run ahead. The fixed policies validate every step, every k
// steps, or on the powers of a base.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace safeguard {

enum class SimilarityAggregation {
  kMinPairs,  // min over every (candidate, example) pair
  kMaxOfMax,  // max over candidates of the per-candidate max
};

struct ContextWise {
  double lambda = 200.0;
  double thrv = 0.3;
  SimilarityAggregation aggregation = SimilarityAggregation::kMinPairs;
};
struct EveryStep {};
struct EveryK {
  int k = 5;
};
struct PowersOf {
  int base = 2;
};

using SchedulePolicy = std::variant<ContextWise, EveryStep, EveryK, PowersOf>;

// Similarity summary of one accepted candidate.
struct CandidateSimilarity {
  double max_score = 0.0;
  double min_score = 0.0;
};

inline void validate_policy(const SchedulePolicy& policy) {
  if (const auto* c = std::get_if<ContextWise>(&policy)) {
    if (!(c->lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  } else if (const auto* k = std::get_if<EveryK>(&policy)) {
    if (k->k < 1) throw std::invalid_argument("step interval must be >= 1");
  } else if (const auto* p = std::get_if<PowersOf>(&policy)) {
    if (p->base < 2) throw std::invalid_argument("exponential base must be >= 2");
  }
}

inline double aggregate_similarity(std::span<const CandidateSimilarity> stats,
                                   SimilarityAggregation how) {
  if (stats.empty()) throw std::invalid_argument("no similarity statistics");
  if (how == SimilarityAggregation::kMinPairs) {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& c : stats) s = std::min(s, c.min_score);
    return s;
  }
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& c : stats) s = std::max(s, c.max_score);
  return s;
}

// ceil(2^(lambda * (thrv - s))), at least 1. The exponent is capped at 62.
// Exponents and powers within 1e-9 of an integer are treated as that
// integer so that, e.g., 200 * (0.3 - 0.28) = 4.0000000000000036 gives 16.
inline std::int64_t context_wise_gap(double lambda, double thrv, double s) {
  double e = std::min(lambda * (thrv - s), 62.0);
  if (const double r = std::round(e); std::abs(e - r) < 1e-9) e = r;
  const double gap = std::ceil(std::exp2(e) - 1e-9);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(gap));
}

// First step on which a policy validates.
inline int first_validation_step(const SchedulePolicy& policy, int max_token) {
  const int first = std::holds_alternative<PowersOf>(policy) ? 1 : 0;
  return std::min(first, std::max(max_token - 1, 0));
}

// Step of the next validation after `cur_step`. The result is > cur_step and
// at most max_token - 1; once cur_step >= max_token - 1 there is no later
// step and max_token is returned. `stats` is required for ContextWise only.
inline int next_validation_step(const SchedulePolicy& policy, int cur_step,
                                std::span<const CandidateSimilarity> stats,
                                int max_token) {
  if (cur_step < 0) throw std::invalid_argument("negative step");
  if (cur_step >= max_token - 1) return max_token;
  std::int64_t next = 0;
  if (const auto* c = std::get_if<ContextWise>(&policy)) {
    if (stats.empty())
      throw std::invalid_argument("context-wise schedule needs similarity statistics");
    next = cur_step + context_wise_gap(c->lambda, c->thrv,
                                       aggregate_similarity(stats, c->aggregation));
  } else if (std::holds_alternative<EveryStep>(policy)) {
    next = cur_step + 1;
  } else if (const auto* k = std::get_if<EveryK>(&policy)) {
    next = static_cast<std::int64_t>(cur_step) + k->k;
  } else {
    const auto base = static_cast<std::int64_t>(std::get<PowersOf>(policy).base);
    std::int64_t p = 1;
    while (p <= cur_step) p *= base;
    next = p;
  }
  return static_cast<int>(std::min<std::int64_t>(next, max_token - 1));
}

// Parses "contextwise", "step1", "stepk:K", "exp:B". ContextWise takes its
// lambda/threshold/aggregation from `context_defaults`.
inline SchedulePolicy parse_schedule(const std::string& text,
                                     const ContextWise& context_defaults = {}) {
  auto number_after = [&](std::size_t pos) {
    const std::string tail = text.substr(pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tail, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tail.size())
      throw std::invalid_argument("bad schedule '" + text + "'");
    return v;
  };
  SchedulePolicy p;
  if (text == "contextwise") {
    p = context_defaults;
  } else if (text == "step1") {
    p = EveryStep{};
  } else if (text.rfind("stepk:", 0) == 0) {
    p = EveryK{number_after(6)};
  } else if (text.rfind("exp:", 0) == 0) {
    p = PowersOf{number_after(4)};
  } else {
    throw std::invalid_argument("unknown schedule '" + text + "'");
  }
  validate_policy(p);
  return p;
}

inline std::string schedule_name(const SchedulePolicy& policy) {
  if (std::holds_alternative<ContextWise>(policy)) return "contextwise";
  if (std::holds_alternative<EveryStep>(policy)) return "step1";
  if (const auto* k = std::get_if<EveryK>(&policy)) return "stepk:" + std::to_string(k->k);
  return "exp:" + std::to_string(std::get<PowersOf>(policy).base);
}

}  // namespace safeguard
