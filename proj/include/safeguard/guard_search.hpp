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

// Beam search with an external similarity validator in the loop.
//
// The search keeps 2K live candidates. On every time step the beam is
// extended by one token. On validation steps (chosen by the schedule, plus
// the final step) the extensions are checked against the demonstration
// store; rejected ones are banned and the next most likely extensions are
// drawn until 2K valid candidates are collected. If the running share of
// invalid candidates at a step reaches thr_rb, the search rolls back to the
// most recent successful validation step, banning the prefixes that led to
// the dead end, and replays from there.
//
// Snapshot discipline: a snapshot holds the beam as it was at the start of a
// validation step and is pushed once that step validates successfully.
// A rollback pops the top snapshot, so repeated failures without an
// intervening success walk further back. Banned sequences persist for the
// rest of the run.
//
// Ties are broken on token ids everywhere: equal likelihoods rank the
// lexicographically smaller sequence first.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "safeguard/common.hpp"
#include "safeguard/embedding.hpp"
#include "safeguard/ngram.hpp"
#include "safeguard/scheduler.hpp"
#include "safeguard/validator.hpp"

namespace safeguard {

struct Candidate {
  TokenSeq tokens;  // continuation only
  double cum_loglik = 0.0;
  bool alive = true;  // false once the end marker was emitted

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Beam order: higher likelihood first, then smaller token sequence.
inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.cum_loglik != b.cum_loglik) return a.cum_loglik > b.cum_loglik;
  return a.tokens < b.tokens;
}

using SequenceSet = std::unordered_set<TokenSeq, TokenSeqHash>;

struct GuardConfig {
  int beam_k = 1;
  int max_tokens = 20;
  int min_tokens = 0;  // end marker suppressed before this many tokens
  double thrv = 0.3;
  double thr_rb = 1.0;
  double lambda = 200.0;
  SimilarityAggregation aggregation = SimilarityAggregation::kMinPairs;
  // ContextWise here is a tag; its lambda/thrv/aggregation come from the
  // fields above (see policy()).
  SchedulePolicy schedule = ContextWise{};
  int attempt_budget = 0;  // 0: 16 * beam_k
  int rollback_budget = 8;
  std::uint64_t seed = 0;
  bool guard = true;  // false: plain beam search, validator never called

  int beam_width() const { return 2 * beam_k; }
  int attempts() const { return attempt_budget > 0 ? attempt_budget : 16 * beam_k; }

  SchedulePolicy policy() const {
    if (std::holds_alternative<ContextWise>(schedule))
      return ContextWise{lambda, thrv, aggregation};
    return schedule;
  }

  void validate() const {
    if (beam_k < 1) throw std::invalid_argument("beam size K must be >= 1");
    if (max_tokens < 1) throw std::invalid_argument("max tokens must be >= 1");
    if (min_tokens < 0 || min_tokens > max_tokens)
      throw std::invalid_argument("min tokens must lie in [0, max tokens]");
    check_threshold(thrv);
    if (!(thr_rb > 0.0 && thr_rb <= 1.0))
      throw std::invalid_argument("rollback threshold must lie in (0, 1]");
    if (attempt_budget < 0 || rollback_budget < 1)
      throw std::invalid_argument("budgets must be >= 1");
    validate_policy(policy());
  }
};

struct SearchCounters {
  int steps_validated = 0;  // step executions with at least one validation
  int validations = 0;      // validator calls
  int rollbacks = 0;
  int steps_executed = 0;   // step executions, replays included
};

struct SearchSnapshot {
  std::vector<Candidate> beam;
  int step = 0;
  int next_validation = 0;
};

struct SearchResult {
  std::vector<Candidate> outputs;    // top K, best first
  std::vector<double> final_scores;  // max similarity at the last validation
  SearchCounters counters;
  std::vector<int> validated_steps;  // in execution order
  std::vector<TokenSeq> banned;      // banned set at the end, sorted
};

class SearchError : public Error {
 public:
  SearchError(const std::string& what, SearchCounters counters, int step)
      : Error(what), counters_(counters), step_(step) {}
  const SearchCounters& counters() const { return counters_; }
  int step() const { return step_; }

 private:
  SearchCounters counters_;
  int step_;
};

// No 2K valid candidates could be assembled within the attempt budget, or
// every extension was rejected with nowhere to roll back to.
class SafetyExhausted : public SearchError {
 public:
  using SearchError::SearchError;
};

// The rollback budget ran out.
class RollbackExhausted : public SearchError {
 public:
  using SearchError::SearchError;
};

// Lazily expands a fixed beam. Each parent's next-token ranking is computed
// once and reused across refill rounds of the same step.
template <LanguageModel M>
class Expander {
 public:
  Expander(const M& model, std::span<const TokenId> prompt,
           std::span<const Candidate> beam, std::size_t min_tokens = 0)
      : model_(&model), prompt_(prompt), beam_(beam), min_tokens_(min_tokens),
        ranked_(beam.size()), ready_(beam.size(), false) {}

  // The `need` best one-token extensions (finished parents extend to
  // themselves) for which `excluded(tokens)` is false. Returns fewer when
  // the beam runs out of extensions.
  template <typename Excluded>
  std::vector<Candidate> next(std::size_t need, Excluded&& excluded) {
    std::vector<Candidate> pool;
    for (std::size_t p = 0; p < beam_.size(); ++p) {
      const Candidate& parent = beam_[p];
      if (!parent.alive) {
        if (!excluded(parent.tokens)) pool.push_back(parent);
        continue;
      }
      const auto& ranked = ranking(p);
      const bool eos_ok = parent.tokens.size() >= min_tokens_;
      std::size_t taken = 0;
      Candidate ext;
      ext.tokens = parent.tokens;
      ext.tokens.push_back(0);
      for (const auto& [lp, tok] : ranked) {
        if (taken == need) break;
        if (!eos_ok && tok == model_->eos()) continue;
        ext.tokens.back() = tok;
        if (excluded(ext.tokens)) continue;
        ext.cum_loglik = parent.cum_loglik + lp;
        ext.alive = tok != model_->eos();
        pool.push_back(ext);
        ++taken;
      }
    }
    const std::size_t n = std::min(need, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n),
                      pool.end(), ranks_before);
    pool.resize(n);
    return pool;
  }

 private:
  const std::vector<std::pair<double, TokenId>>& ranking(std::size_t p) {
    if (!ready_[p]) {
      TokenSeq ctx(prompt_.begin(), prompt_.end());
      ctx.insert(ctx.end(), beam_[p].tokens.begin(), beam_[p].tokens.end());
      const auto lp = model_->next_log_distribution(ctx);
      auto& r = ranked_[p];
      r.reserve(lp.size());
      for (std::size_t t = 0; t < lp.size(); ++t)
        if (lp[t] != -std::numeric_limits<double>::infinity())
          r.emplace_back(lp[t], static_cast<TokenId>(t));
      std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      ready_[p] = true;
    }
    return ranked_[p];
  }

  const M* model_;
  std::span<const TokenId> prompt_;
  std::span<const Candidate> beam_;
  std::size_t min_tokens_;
  std::vector<std::vector<std::pair<double, TokenId>>> ranked_;
  std::vector<bool> ready_;
};

// The `need` highest-likelihood one-token extensions of `beam` whose token
// sequence is not in `banned`. Zero-probability tokens are never proposed.
// `exhausted`, when given, is set if fewer than `need` exist.
template <LanguageModel M>
std::vector<Candidate> generate_next_candidates(const M& model,
                                                std::span<const TokenId> prompt,
                                                std::span<const Candidate> beam,
                                                std::size_t need,
                                                const SequenceSet& banned,
                                                bool* exhausted = nullptr) {
  if (need == 0) throw std::invalid_argument("need must be >= 1");
  Expander<M> ex(model, prompt, beam);
  auto out = ex.next(need, [&](const TokenSeq& s) { return banned.contains(s); });
  if (exhausted != nullptr) *exhausted = out.size() < need;
  return out;
}

// Pops the most recent snapshot and bans every alive member of the abandoned
// beam, cut to the length the restored step produces, so that replaying that
// step cannot take the same path. Returns the popped snapshot.
inline SearchSnapshot rollback(std::vector<SearchSnapshot>& snapshots,
                               std::span<const Candidate> abandoned,
                               SequenceSet& banned) {
  if (snapshots.empty()) throw std::logic_error("rollback without a snapshot");
  SearchSnapshot snap = std::move(snapshots.back());
  snapshots.pop_back();
  const auto keep = static_cast<std::size_t>(snap.step) + 1;
  for (const auto& c : abandoned) {
    if (!c.alive) continue;
    TokenSeq prefix(c.tokens.begin(),
                    c.tokens.begin() + static_cast<std::ptrdiff_t>(
                                           std::min(keep, c.tokens.size())));
    banned.insert(std::move(prefix));
  }
  return snap;
}

template <LanguageModel M>
class GuardedSearch {
 public:
  // `validator` may be null only when config.guard is false.
  GuardedSearch(const M& model, const Validator* validator, GuardConfig config)
      : model_(&model), validator_(validator), config_(std::move(config)) {
    config_.validate();
    if (config_.guard && validator_ == nullptr)
      throw std::invalid_argument("guarded search needs a validator");
    policy_ = config_.policy();
  }

  // Pre-banned sequences, excluded from the start of the run.
  void ban(TokenSeq seq) { banned_init_.insert(std::move(seq)); }

  SearchResult run(std::span<const TokenId> prompt) const {
    State s;
    s.banned = banned_init_;
    s.beam.push_back(Candidate{});
    s.next_v = config_.guard ? first_validation_step(policy_, config_.max_tokens)
                             : config_.max_tokens;
    while (s.t < config_.max_tokens) {
      if (std::none_of(s.beam.begin(), s.beam.end(),
                       [](const Candidate& c) { return c.alive; }))
        break;
      step(prompt, s);
    }
    const std::size_t k = std::min(s.beam.size(), static_cast<std::size_t>(config_.beam_k));
    s.result.outputs.assign(s.beam.begin(), s.beam.begin() + static_cast<std::ptrdiff_t>(k));
    s.result.final_scores.assign(s.scores.begin(),
                                 s.scores.begin() + static_cast<std::ptrdiff_t>(k));
    s.result.banned.assign(s.banned.begin(), s.banned.end());
    std::sort(s.result.banned.begin(), s.result.banned.end());
    return std::move(s.result);
  }

 private:
  struct State {
    SearchResult result;
    SequenceSet banned;
    std::vector<SearchSnapshot> snapshots;
    std::vector<Candidate> beam;
    std::vector<double> scores;  // similarity at the last validation, per member
    int t = 0;
    int next_v = 0;
    bool force = false;  // replaying a restored step
  };

  // Executes time step s.t: either advances to s.t + 1 or rolls back.
  void step(std::span<const TokenId> prompt, State& s) const {
    const auto width = static_cast<std::size_t>(config_.beam_width());
    const int mt = config_.max_tokens;
    SearchCounters& ctr = s.result.counters;
    ++ctr.steps_executed;
    bool validate_now = config_.guard && (s.force || s.t == s.next_v || s.t == mt - 1);

    Expander<M> expander(*model_, prompt, s.beam,
                         static_cast<std::size_t>(config_.min_tokens));
    SequenceSet taken;
    auto excluded = [&](const TokenSeq& seq) {
      return s.banned.contains(seq) || taken.contains(seq);
    };
    std::vector<Candidate> cand;
    std::vector<CandidateSimilarity> sims;
    std::vector<double> scores;
    StepTally tally;
    int attempts = 0;
    bool validated = false;

    const int t = s.t;  // a rollback moves s.t
    auto note_validated = [&] {
      if (validated) {
        ++ctr.steps_validated;
        s.result.validated_steps.push_back(t);
      }
    };

    while (cand.size() < width) {
      if (attempts == config_.attempts())
        throw SafetyExhausted("no " + std::to_string(width) +
                                  " valid candidates within the attempt budget at step " +
                                  std::to_string(s.t),
                              ctr, s.t);
      ++attempts;
      auto temp = expander.next(width - cand.size(), excluded);
      // A step after which every candidate has finished ends the search and
      // must be checked.
      if (config_.guard && !validate_now && cand.empty() && !temp.empty() &&
          std::none_of(temp.begin(), temp.end(),
                       [](const Candidate& c) { return c.alive; }))
        validate_now = true;
      if (temp.empty()) {
        if (!cand.empty()) break;
        if (config_.guard && try_rollback(s)) {
          note_validated();
          return;
        }
        throw SafetyExhausted("no acceptable extension at step " + std::to_string(s.t),
                              ctr, s.t);
      }
      if (!validate_now) {
        for (auto& c : temp) {
          taken.insert(c.tokens);
          cand.push_back(std::move(c));
          scores.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        continue;
      }
      std::vector<std::vector<std::string>> texts;
      texts.reserve(temp.size());
      for (const auto& c : temp) texts.push_back(model_->vocabulary().words(c.tokens));
      const auto outcome = validator_->validate(texts);
      ++ctr.validations;
      validated = true;
      tally.add(outcome);
      for (std::size_t i : outcome.invalid) s.banned.insert(temp[i].tokens);
      if (tally.invalid_proportion() >= config_.thr_rb && try_rollback(s)) {
        note_validated();
        return;
      }
      for (std::size_t i : outcome.valid) {
        taken.insert(temp[i].tokens);
        cand.push_back(std::move(temp[i]));
        sims.push_back({outcome.scores[i], outcome.min_scores[i]});
        scores.push_back(outcome.scores[i]);
      }
    }
    note_validated();
    if (validated) {
      s.snapshots.push_back({s.beam, s.t, s.next_v});
      s.next_v = next_validation_step(policy_, s.t, sims, mt);
    }
    s.force = false;

    std::vector<std::size_t> order(cand.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ranks_before(cand[a], cand[b]);
    });
    s.beam.clear();
    s.scores.clear();
    for (std::size_t i : order) {
      s.beam.push_back(std::move(cand[i]));
      s.scores.push_back(scores[i]);
    }
    ++s.t;
  }

  // Rolls back to the top snapshot. Returns false when there is none;
  // throws RollbackExhausted when the budget is spent.
  bool try_rollback(State& s) const {
    if (s.snapshots.empty()) return false;
    if (s.result.counters.rollbacks >= config_.rollback_budget)
      throw RollbackExhausted("rollback budget of " +
                                  std::to_string(config_.rollback_budget) +
                                  " exhausted at step " + std::to_string(s.t),
                              s.result.counters, s.t);
    SearchSnapshot snap = rollback(s.snapshots, s.beam, s.banned);
    ++s.result.counters.rollbacks;
    s.t = snap.step;
    s.beam = std::move(snap.beam);
    s.scores.assign(s.beam.size(), std::numeric_limits<double>::quiet_NaN());
    s.force = true;
    return true;
  }

  const M* model_;
  const Validator* validator_;
  GuardConfig config_;
  SchedulePolicy policy_;
  SequenceSet banned_init_;
};

// One guarded decoding run.
template <LanguageModel M>
SearchResult guarded_search(const M& model, const Validator* validator,
                            const GuardConfig& config, std::span<const TokenId> prompt) {
  return GuardedSearch<M>(model, validator, config).run(prompt);
}

}  // namespace safeguard
