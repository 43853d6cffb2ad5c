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

// Experiment harness: loads inputs, runs guarded (or plain) decoding over a
// prompt set for several repetitions, scores the outputs and aggregates.
//
// Repetition r (0-based) uses seed `seed + r` for everything random in that
// repetition (bandwidth sample, representative sampling). Prompts may run on
// several threads; results land in fixed slots, so reports do not depend on
// the thread count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeguard/demo_store.hpp"
#include "safeguard/embedding.hpp"
#include "safeguard/guard_search.hpp"
#include "safeguard/metrics.hpp"
#include "safeguard/ngram.hpp"
#include "safeguard/scheduler.hpp"
#include "safeguard/text.hpp"

namespace safeguard {

inline constexpr int kReportVersion = 1;

enum class Task { kDetox, kCopyright };

inline std::string task_name(Task t) { return t == Task::kDetox ? "detox" : "copyright"; }

inline Task parse_task(const std::string& s) {
  if (s == "detox") return Task::kDetox;
  if (s == "copyright") return Task::kCopyright;
  throw std::invalid_argument("unknown task '" + s + "'");
}

// One line of a prompt file: {"id": string, "prompt": string} with an
// optional "reference" holding the text the LCS metric compares against.
struct PromptRecord {
  std::string id;
  std::string prompt;
  std::optional<std::string> reference;
};

inline std::vector<PromptRecord> read_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<PromptRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PromptRecord p;
      p.id = j.at("id").get<std::string>();
      p.prompt = j.at("prompt").get<std::string>();
      if (j.contains("reference")) p.reference = j.at("reference").get<std::string>();
      if (!ids.insert(p.id).second) throw FormatError("duplicate prompt id '" + p.id + "'");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Newline-delimited documents from plain-text files; blank lines skipped.
inline std::vector<std::string> read_documents(const std::vector<std::string>& paths) {
  std::vector<std::string> docs;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    while (std::getline(in, line))
      if (line.find_first_not_of(" \t\r") != std::string::npos) docs.push_back(line);
  }
  return docs;
}

struct ExperimentSpec {
  Task task = Task::kDetox;
  std::vector<std::string> corpus_paths;
  std::string model_path;     // load instead of training when set
  std::string examples_path;  // empty: no demonstration examples
  std::string prompts_path;
  int ngram_order = 3;
  double smoothing_k = 0.0;
  GuardConfig guard;
  StoreConfig store;
  std::size_t embed_dim = Embedder::kDefaultDimension;
  std::uint64_t hash_seed = Embedder::kDefaultHashSeed;
  int repetitions = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir;

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (corpus_paths.empty() && model_path.empty())
      throw std::invalid_argument("need a corpus or a saved model");
    if (prompts_path.empty()) throw std::invalid_argument("need a prompt file");
    guard.validate();
    store.validate();
  }
};

// Inputs shared by every run of an experiment (and every value of a sweep).
struct Workbench {
  NgramModel model;
  std::vector<DemoRecord> records;
  Embedder embedder;
  DemoStore full_store;
  std::vector<PromptRecord> prompts;
  std::vector<TokenSeq> prompt_ids;
  std::vector<std::size_t> prompt_oov;
  std::vector<std::vector<std::string>> references;  // empty when absent
};

inline Workbench load_workbench(const ExperimentSpec& spec) {
  for (const auto& p : spec.corpus_paths)
    if (!std::filesystem::exists(p)) throw Error("corpus not found: " + p);
  if (!spec.examples_path.empty() && !std::filesystem::exists(spec.examples_path))
    throw Error("examples not found: " + spec.examples_path);
  if (!std::filesystem::exists(spec.prompts_path))
    throw Error("prompts not found: " + spec.prompts_path);

  Workbench wb;
  if (!spec.model_path.empty()) {
    wb.model = NgramModel::load(spec.model_path);
  } else {
    wb.model = NgramModel::train(build_corpus(read_documents(spec.corpus_paths)),
                                 spec.ngram_order, spec.smoothing_k);
  }
  if (!spec.examples_path.empty()) wb.records = read_demo_records(spec.examples_path);
  wb.embedder = fit_embedder(wb.records, spec.embed_dim, spec.hash_seed);
  wb.full_store = build_store(wb.records, wb.embedder);
  wb.prompts = read_prompts(spec.prompts_path);
  for (const auto& p : wb.prompts) {
    std::size_t oov = 0;
    wb.prompt_ids.push_back(wb.model.vocabulary().encode(tokenize(p.prompt), &oov));
    wb.prompt_oov.push_back(oov);
    wb.references.push_back(p.reference ? tokenize(*p.reference)
                                        : std::vector<std::string>{});
  }
  return wb;
}

struct OutputReport {
  std::string text;
  std::size_t length = 0;  // tokens, end marker excluded
  double cum_loglik = 0.0;
  std::optional<double> ppl;  // nullopt: infinite or empty output
  std::size_t lcs = 0;
  std::size_t lcs_substring = 0;
  std::optional<double> lcs_norm;
  double violation = 0.0;     // vs the full store
  double subset_score = 0.0;  // vs the subset the search used
};

enum class RunStatus { kOk, kSafetyExhausted, kRollbackExhausted };

inline std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kOk: return "ok";
    case RunStatus::kSafetyExhausted: return "safety_exhausted";
    case RunStatus::kRollbackExhausted: return "rollback_exhausted";
  }
  return "?";
}

struct RunReport {
  std::string prompt_id;
  int repetition = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kOk;
  std::string error;
  std::vector<OutputReport> outputs;
  SearchCounters counters;
  std::size_t subset_size = 0;
  std::size_t cluster_count = 0;
  std::size_t prompt_oov = 0;
  double wall_time_s = 0.0;

  bool ok() const { return status == RunStatus::kOk; }

  // Means over outputs; nullopt when no output contributes.
  std::optional<double> mean(double OutputReport::*field) const {
    if (outputs.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& o : outputs) s += o.*field;
    return s / static_cast<double>(outputs.size());
  }
  std::optional<double> mean_opt(std::optional<double> OutputReport::*field) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& o : outputs)
      if (o.*field) {
        s += *(o.*field);
        ++n;
      }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
  }
  std::optional<double> mean_count(std::size_t OutputReport::*field) const {
    if (outputs.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& o : outputs) s += static_cast<double>(o.*field);
    return s / static_cast<double>(outputs.size());
  }
};

// Aggregate over prompts and repetitions; failed runs are counted and left
// out of every mean.
struct AggregateRow {
  std::string label;
  std::size_t prompts = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t safety_exhausted = 0;
  std::size_t rollback_exhausted = 0;
  std::optional<double> ppl;
  std::size_t ppl_infinite = 0;
  std::optional<double> lcs;
  std::optional<double> lcs_norm;
  std::optional<double> lcs_substring;
  std::optional<double> violation;
  std::optional<double> violation_max;
  std::optional<double> steps_validated;
  std::optional<double> validations;
  std::optional<double> rollbacks;
  std::optional<double> subset_size;
  double wall_time_mean_s = 0.0;
  double wall_time_median_s = 0.0;
};

struct ExperimentResult {
  std::vector<RunReport> runs;  // prompt-major: runs[p * reps + r]
  AggregateRow aggregate;
  int repetitions = 1;
};

namespace internal {

inline double rounded_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline std::optional<double> mean_or_none(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  return rounded_mean(xs);
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size();
  return m % 2 == 1 ? xs[m / 2] : 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
}

}  // namespace internal

inline OutputReport score_output(const Workbench& wb, std::size_t prompt_index,
                                 const Candidate& c, double subset_score) {
  const Vocabulary& vocab = wb.model.vocabulary();
  OutputReport o;
  const auto words = vocab.words(c.tokens);
  o.text = vocab.decode(c.tokens);
  o.length = words.size();
  o.cum_loglik = c.cum_loglik;
  o.subset_score = subset_score;
  if (!c.tokens.empty()) {
    TokenSeq full = wb.prompt_ids[prompt_index];
    full.insert(full.end(), c.tokens.begin(), c.tokens.end());
    try {
      o.ppl = wb.model.perplexity(full, wb.prompt_ids[prompt_index].size());
    } catch (const InfinitePerplexity&) {
      o.ppl.reset();
    }
  }
  const std::span<const std::string> out_span(words);
  if (!wb.references[prompt_index].empty()) {
    const std::span<const std::string> ref(wb.references[prompt_index]);
    o.lcs = lcs(out_span, ref);
    o.lcs_substring = longest_common_substring(out_span, ref);
  } else {
    for (const auto& ex : wb.full_store.examples()) {
      const std::span<const std::string> ref(ex.text);
      o.lcs = std::max(o.lcs, lcs(out_span, ref));
      o.lcs_substring = std::max(o.lcs_substring, longest_common_substring(out_span, ref));
    }
  }
  if (o.length > 0) o.lcs_norm = lcs_norm(o.lcs, o.length);
  o.violation = violation_score(words, wb.embedder, wb.full_store);
  return o;
}

inline AggregateRow aggregate(const std::vector<RunReport>& runs, std::size_t n_prompts,
                              int reps, const std::string& label) {
  AggregateRow row;
  row.label = label;
  row.prompts = n_prompts;
  row.runs = runs.size();
  std::vector<double> ppl, lcs_v, lcs_n, lcs_s, viol, steps, vals, rbs, subset, walls;
  double vmax = -std::numeric_limits<double>::infinity();
  // Per prompt: mean over its successful repetitions; then mean over prompts.
  for (std::size_t p = 0; p < n_prompts; ++p) {
    std::vector<double> pp, pl, pn, ps, pv, pst, pva, prb, psub;
    for (int r = 0; r < reps; ++r) {
      const auto& run = runs[p * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
      walls.push_back(run.wall_time_s);
      if (!run.ok()) {
        ++row.failed;
        (run.status == RunStatus::kSafetyExhausted ? row.safety_exhausted
                                                   : row.rollback_exhausted)++;
        continue;
      }
      for (const auto& o : run.outputs)
        if (!o.ppl && o.length > 0) ++row.ppl_infinite;
      if (auto v = run.mean_opt(&OutputReport::ppl)) pp.push_back(*v);
      if (auto v = run.mean_count(&OutputReport::lcs)) pl.push_back(*v);
      if (auto v = run.mean_opt(&OutputReport::lcs_norm)) pn.push_back(*v);
      if (auto v = run.mean_count(&OutputReport::lcs_substring)) ps.push_back(*v);
      if (auto v = run.mean(&OutputReport::violation)) pv.push_back(*v);
      for (const auto& o : run.outputs) vmax = std::max(vmax, o.violation);
      pst.push_back(run.counters.steps_validated);
      pva.push_back(run.counters.validations);
      prb.push_back(run.counters.rollbacks);
      psub.push_back(static_cast<double>(run.subset_size));
    }
    auto push = [](std::vector<double>& dst, const std::vector<double>& src) {
      if (!src.empty()) dst.push_back(internal::rounded_mean(src));
    };
    push(ppl, pp);
    push(lcs_v, pl);
    push(lcs_n, pn);
    push(lcs_s, ps);
    push(viol, pv);
    push(steps, pst);
    push(vals, pva);
    push(rbs, prb);
    push(subset, psub);
  }
  row.ppl = internal::mean_or_none(ppl);
  row.lcs = internal::mean_or_none(lcs_v);
  row.lcs_norm = internal::mean_or_none(lcs_n);
  row.lcs_substring = internal::mean_or_none(lcs_s);
  row.violation = internal::mean_or_none(viol);
  if (vmax > -std::numeric_limits<double>::infinity()) row.violation_max = vmax;
  row.steps_validated = internal::mean_or_none(steps);
  row.validations = internal::mean_or_none(vals);
  row.rollbacks = internal::mean_or_none(rbs);
  row.subset_size = internal::mean_or_none(subset);
  if (!walls.empty()) {
    row.wall_time_mean_s = internal::rounded_mean(walls);
    row.wall_time_median_s = internal::median(walls);
  }
  return row;
}

// Runs every prompt for every repetition under `spec` using the already
// loaded inputs in `wb`.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const Workbench& wb,
                                       const std::string& label = "") {
  spec.guard.validate();
  spec.store.validate();
  const int reps = spec.repetitions;
  const std::size_t n = wb.prompts.size();

  std::vector<PreparedStore> stores;
  stores.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r)
    stores.push_back(prepare_store(wb.full_store, spec.store, spec.seed + static_cast<std::uint64_t>(r)));

  ExperimentResult result;
  result.repetitions = reps;
  result.runs.resize(n * static_cast<std::size_t>(reps));

  auto run_one = [&](std::size_t slot) {
    const std::size_t p = slot / static_cast<std::size_t>(reps);
    const int r = static_cast<int>(slot % static_cast<std::size_t>(reps));
    const PreparedStore& ps = stores[static_cast<std::size_t>(r)];
    RunReport rep;
    rep.prompt_id = wb.prompts[p].id;
    rep.repetition = r;
    rep.seed = spec.seed + static_cast<std::uint64_t>(r);
    rep.subset_size = ps.subset.size();
    rep.cluster_count = ps.clusters.cluster_count;
    rep.prompt_oov = wb.prompt_oov[p];
    GuardConfig cfg = spec.guard;
    cfg.seed = rep.seed;
    const Validator validator(wb.embedder, ps.subset, cfg.thrv);
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto res = guarded_search(wb.model, cfg.guard ? &validator : nullptr, cfg,
                                      wb.prompt_ids[p]);
      rep.counters = res.counters;
      for (std::size_t i = 0; i < res.outputs.size(); ++i)
        rep.outputs.push_back(score_output(wb, p, res.outputs[i], res.final_scores[i]));
    } catch (const SafetyExhausted& e) {
      rep.status = RunStatus::kSafetyExhausted;
      rep.error = e.what();
      rep.counters = e.counters();
    } catch (const RollbackExhausted& e) {
      rep.status = RunStatus::kRollbackExhausted;
      rep.error = e.what();
      rep.counters = e.counters();
    }
    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.runs[slot] = std::move(rep);
  };

  const std::size_t total = result.runs.size();
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(spec.threads), std::max<std::size_t>(total, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  result.aggregate = aggregate(result.runs, n, reps, label);
  return result;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_experiment(spec, load_workbench(spec));
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParameter { kThrv, kLambda, kRatio, kSchedule };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "thrv") return SweepParameter::kThrv;
  if (s == "lambda") return SweepParameter::kLambda;
  if (s == "ratio" || s == "ratio_R") return SweepParameter::kRatio;
  if (s == "schedule") return SweepParameter::kSchedule;
  throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

inline std::string sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::kThrv: return "thrv";
    case SweepParameter::kLambda: return "lambda";
    case SweepParameter::kRatio: return "ratio";
    case SweepParameter::kSchedule: return "schedule";
  }
  return "?";
}

inline ExperimentSpec with_parameter(ExperimentSpec spec, SweepParameter p,
                                     const std::string& value) {
  auto number = [&] {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size())
      throw std::invalid_argument("bad sweep value '" + value + "'");
    return v;
  };
  switch (p) {
    case SweepParameter::kThrv: spec.guard.thrv = number(); break;
    case SweepParameter::kLambda: spec.guard.lambda = number(); break;
    case SweepParameter::kRatio: spec.store.ratio = number(); break;
    case SweepParameter::kSchedule: spec.guard.schedule = parse_schedule(value); break;
  }
  return spec;
}

struct SweepResult {
  SweepParameter parameter = SweepParameter::kThrv;
  std::vector<std::string> values;
  std::vector<ExperimentResult> results;  // one per value, same order
};

// One experiment per value; every value sees the same prompts, order and
// seeds.
inline SweepResult sweep(const ExperimentSpec& spec, const Workbench& wb,
                         SweepParameter parameter, const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  SweepResult out;
  out.parameter = parameter;
  out.values = values;
  for (const auto& v : values) {
    const auto s = with_parameter(spec, parameter, v);
    out.results.push_back(run_experiment(s, wb, sweep_parameter_name(parameter) + "=" + v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
//
// report.json  {"format": "safeguard-report", "version": 1, "config": {...},
//               "aggregate": {...}, "prompts": [{per-prompt summary}, ...]}
// report.csv   one row per prompt, means over successful repetitions
// per_prompt/<id>.json  {"prompt_id": ..., "runs": [RunReport, ...]}
// sweep.json / sweep.csv  one aggregate row per swept value
//
// Fields named wall_time_* carry timing and are the only non-deterministic
// content.

namespace internal {

inline nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace internal

inline nlohmann::json to_json(const SearchCounters& c) {
  return {{"steps_validated", c.steps_validated},
          {"validations", c.validations},
          {"rollbacks", c.rollbacks},
          {"steps_executed", c.steps_executed}};
}

inline nlohmann::json to_json(const OutputReport& o) {
  return {{"text", o.text},
          {"length", o.length},
          {"cum_loglik", o.cum_loglik},
          {"ppl", internal::opt(o.ppl)},
          {"lcs", o.lcs},
          {"lcs_substring", o.lcs_substring},
          {"lcs_norm", internal::opt(o.lcs_norm)},
          {"violation_score", o.violation},
          {"subset_score", std::isnan(o.subset_score) ? nlohmann::json(nullptr)
                                                      : nlohmann::json(o.subset_score)}};
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : r.outputs) outs.push_back(to_json(o));
  return {{"prompt_id", r.prompt_id},
          {"repetition", r.repetition},
          {"seed", r.seed},
          {"status", status_name(r.status)},
          {"error", r.error},
          {"outputs", std::move(outs)},
          {"counters", to_json(r.counters)},
          {"subset_size", r.subset_size},
          {"cluster_count", r.cluster_count},
          {"prompt_oov", r.prompt_oov},
          {"wall_time_s", r.wall_time_s}};
}

inline nlohmann::json to_json(const AggregateRow& a) {
  return {{"label", a.label},
          {"prompts", a.prompts},
          {"runs", a.runs},
          {"failed", a.failed},
          {"safety_exhausted", a.safety_exhausted},
          {"rollback_exhausted", a.rollback_exhausted},
          {"ppl", internal::opt(a.ppl)},
          {"ppl_infinite", a.ppl_infinite},
          {"lcs", internal::opt(a.lcs)},
          {"lcs_norm", internal::opt(a.lcs_norm)},
          {"lcs_substring", internal::opt(a.lcs_substring)},
          {"violation_score", internal::opt(a.violation)},
          {"violation_score_max", internal::opt(a.violation_max)},
          {"steps_validated", internal::opt(a.steps_validated)},
          {"validations", internal::opt(a.validations)},
          {"rollbacks", internal::opt(a.rollbacks)},
          {"subset_size", internal::opt(a.subset_size)},
          {"wall_time_mean_s", a.wall_time_mean_s},
          {"wall_time_median_s", a.wall_time_median_s}};
}

inline nlohmann::json config_json(const ExperimentSpec& s) {
  const auto& g = s.guard;
  return {{"task", task_name(s.task)},
          {"corpus", s.corpus_paths},
          {"model", s.model_path},
          {"examples", s.examples_path},
          {"prompts", s.prompts_path},
          {"ngram_order", s.ngram_order},
          {"smoothing_k", s.smoothing_k},
          {"beam_size", g.beam_k},
          {"max_tokens", g.max_tokens},
          {"min_tokens", g.min_tokens},
          {"thrv", g.thrv},
          {"thr_rb", g.thr_rb},
          {"lambda", g.lambda},
          {"ratio", s.store.ratio},
          {"schedule", schedule_name(g.schedule)},
          {"sched_agg", g.aggregation == SimilarityAggregation::kMinPairs ? "min" : "maxmax"},
          {"attempt_budget", g.attempts()},
          {"rollback_budget", g.rollback_budget},
          {"guard", g.guard},
          {"embed_dim", s.embed_dim},
          {"hash_seed", s.hash_seed},
          {"repetitions", s.repetitions},
          {"seed", s.seed}};
}

// Per-prompt summary: means over successful repetitions.
inline AggregateRow prompt_summary(const ExperimentResult& res, std::size_t p) {
  const auto reps = static_cast<std::size_t>(res.repetitions);
  std::vector<RunReport> slice(res.runs.begin() + static_cast<std::ptrdiff_t>(p * reps),
                               res.runs.begin() + static_cast<std::ptrdiff_t>((p + 1) * reps));
  return aggregate(slice, 1, res.repetitions, slice.front().prompt_id);
}

inline nlohmann::json report_json(const ExperimentSpec& spec, const ExperimentResult& res) {
  nlohmann::json prompts = nlohmann::json::array();
  const std::size_t n = res.runs.size() / static_cast<std::size_t>(res.repetitions);
  for (std::size_t p = 0; p < n; ++p) prompts.push_back(to_json(prompt_summary(res, p)));
  return {{"format", "safeguard-report"},
          {"version", kReportVersion},
          {"config", config_json(spec)},
          {"aggregate", to_json(res.aggregate)},
          {"prompts", std::move(prompts)}};
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "label", "prompts", "runs", "failed", "safety_exhausted", "rollback_exhausted",
      "ppl", "ppl_infinite", "lcs", "lcs_norm", "lcs_substring", "violation_score",
      "violation_score_max", "steps_validated", "validations", "rollbacks",
      "subset_size", "wall_time_mean_s", "wall_time_median_s"};
  return cols;
}

inline std::string csv_field(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return v.dump();
}

inline std::string csv_row(const AggregateRow& row) {
  const auto j = to_json(row);
  std::string line;
  for (const auto& c : csv_columns()) {
    if (!line.empty()) line += ',';
    line += csv_field(j.at(c));
  }
  return line;
}

inline std::string csv_header() {
  std::string line;
  for (const auto& c : csv_columns()) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line;
}

inline std::string safe_file_name(const std::string& id) {
  std::string s;
  for (char c : id)
    s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return s.empty() ? "_" : s;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline void write_reports(const ExperimentSpec& spec, const ExperimentResult& res,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "per_prompt");
  write_text(dir / "report.json", report_json(spec, res).dump(2) + "\n");
  const std::size_t reps = static_cast<std::size_t>(res.repetitions);
  const std::size_t n = res.runs.size() / reps;
  std::string csv = csv_header() + "\n";
  for (std::size_t p = 0; p < n; ++p) {
    csv += csv_row(prompt_summary(res, p)) + "\n";
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t r = 0; r < reps; ++r) runs.push_back(to_json(res.runs[p * reps + r]));
    const auto& id = res.runs[p * reps].prompt_id;
    write_text(dir / "per_prompt" / (safe_file_name(id) + ".json"),
               nlohmann::json{{"prompt_id", id}, {"runs", std::move(runs)}}.dump(2) + "\n");
  }
  write_text(dir / "report.csv", csv);
}

inline void write_sweep(const ExperimentSpec& spec, const SweepResult& sw,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json rows = nlohmann::json::array();
  std::string csv = "value," + csv_header() + "\n";
  for (std::size_t i = 0; i < sw.values.size(); ++i) {
    auto row = to_json(sw.results[i].aggregate);
    row["value"] = sw.values[i];
    rows.push_back(row);
    csv += csv_field(sw.values[i]) + "," + csv_row(sw.results[i].aggregate) + "\n";
  }
  write_text(dir / "sweep.json",
             nlohmann::json{{"format", "safeguard-sweep"},
                            {"version", kReportVersion},
                            {"parameter", sweep_parameter_name(sw.parameter)},
                            {"config", config_json(spec)},
                            {"rows", std::move(rows)}}
                     .dump(2) +
                 "\n");
  write_text(dir / "sweep.csv", csv);
}

}  // namespace safeguard
