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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Tolerances and fixture settings are
// fixed below.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "safeguard/safeguard.hpp"
#include "test_support.hpp"

namespace sg = safeguard;
namespace st = safeguard::testing;

namespace {

// Runtime limits in seconds.
constexpr double kLimit1 = 120.0;
constexpr double kLimit2 = 10.0;
constexpr double kLimit3 = 30.0;
constexpr double kLimit5 = 300.0;
constexpr double kLimit6 = 300.0;

constexpr int kRandomInstances = 200;    // criteria 2 and 3
constexpr double kViolationRatio = 1.3;  // criterion 5
constexpr double kLcsReduction = 0.40;   // criterion 6

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt(const std::optional<double>& v, int digits = 4) {
  return v ? fmt(*v, digits) : std::string("-");
}

sg::ExperimentSpec detox_spec() {
  sg::ExperimentSpec s;
  s.task = sg::Task::kDetox;
  s.corpus_paths = {st::data_path("detox/corpus.txt")};
  s.examples_path = st::data_path("detox/examples.jsonl");
  s.prompts_path = st::data_path("detox/prompts.jsonl");
  s.ngram_order = 3;
  s.smoothing_k = 0.0;
  s.guard.beam_k = 1;
  s.guard.max_tokens = 12;
  s.repetitions = 1;
  return s;
}

sg::ExperimentSpec copyright_spec() {
  sg::ExperimentSpec s;
  s.task = sg::Task::kCopyright;
  s.corpus_paths = {st::data_path("copyright/corpus.txt")};
  s.examples_path = st::data_path("copyright/examples.jsonl");
  s.prompts_path = st::data_path("copyright/prompts.jsonl");
  s.ngram_order = 3;
  s.smoothing_k = 1e-4;
  s.guard.beam_k = 2;
  s.guard.max_tokens = 30;
  s.guard.min_tokens = 30;
  s.repetitions = 1;
  return s;
}

sg::ExperimentSpec hostile_spec() {
  sg::ExperimentSpec s;
  s.corpus_paths = {st::data_path("hostile/corpus.txt")};
  s.examples_path = st::data_path("hostile/examples.jsonl");
  s.prompts_path = st::data_path("hostile/prompts.jsonl");
  s.guard.max_tokens = 8;
  s.repetitions = 1;
  return s;
}

bool same(const std::vector<sg::Candidate>& got, const std::vector<st::Scored>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i)
    if (got[i].tokens != want[i].tokens || got[i].cum_loglik != want[i].loglik ||
        got[i].alive == want[i].finished)
      return false;
  return true;
}

bool same(const std::vector<st::Scored>& a, const std::vector<st::Scored>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].tokens != b[i].tokens || a[i].loglik != b[i].loglik) return false;
  return true;
}

// Random instance parameters shared by criteria 2 and 3.
struct Instance {
  std::size_t words;
  int max_tokens;
  int k;
};

Instance instance(std::uint64_t seed, std::size_t max_words) {
  std::mt19937_64 rng(seed * 7919);
  return {2 + static_cast<std::size_t>(rng() % (max_words - 1)), 1 + static_cast<int>(rng() % 4),
          1 + static_cast<int>(rng() % 2)};
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  Clock clock;
  const auto spec = detox_spec();
  const auto wb = sg::load_workbench(spec);
  const auto res = sg::run_experiment(spec, wb);
  // Independent re-validation: fresh embedder, plain cosine scan over raw
  // vectors of every example.
  std::vector<std::vector<std::string>> docs;
  for (const auto& r : wb.records) docs.push_back(sg::tokenize(r.text));
  sg::Embedder fresh(spec.embed_dim, spec.hash_seed);
  fresh.fit_idf(docs);
  std::vector<std::vector<double>> raw;
  for (const auto& d : docs) {
    const auto v = fresh.embed(d);
    raw.emplace_back(v.values().begin(), v.values().end());
  }
  std::size_t outputs = 0, violations = 0, failed = 0;
  double worst = 0.0;
  for (const auto& run : res.runs) {
    if (!run.ok()) ++failed;
    for (const auto& out : run.outputs) {
      const auto v = fresh.embed(sg::tokenize(out.text));
      const double s =
          st::plain_max_similarity(std::vector<double>(v.values().begin(), v.values().end()), raw);
      worst = std::max(worst, s);
      ++outputs;
      if (!(s < spec.guard.thrv)) ++violations;
    }
  }
  const double t = clock.seconds();
  o.pass = wb.prompts.size() >= 100 && outputs >= 100 && violations == 0 && t < kLimit1;
  o.detail << wb.prompts.size() << " prompts, " << outputs << " outputs, " << violations
           << " violations, max similarity " << fmt(worst) << " < " << spec.guard.thrv
           << ", " << failed << " runs without output, " << fmt(t, 1) << "s";
  return o;
}

Outcome criterion2() {
  Outcome o;
  Clock clock;
  const sg::DemoStore empty;
  const sg::Embedder embedder;
  const sg::Validator validator(embedder, empty, 0.3);
  int guarded_equal = 0, exhaustive_equal = 0;
  std::vector<std::uint64_t> misses;
  for (std::uint64_t seed = 1; seed <= kRandomInstances; ++seed) {
    const auto in = instance(seed, 5);  // up to 5 words + end marker = 6 tokens
    const auto m = st::random_model(in.words, seed, 0.2);
    sg::GuardConfig c;
    c.beam_k = in.k;
    c.max_tokens = in.max_tokens;
    const sg::TokenSeq prompt{1};
    const auto ref = st::reference_beam_search(m, prompt, in.k, 2 * in.k, in.max_tokens);
    if (same(sg::guarded_search(m, &validator, c, prompt).outputs, ref)) ++guarded_equal;
    auto all = st::enumerate_all(m, prompt, in.max_tokens);
    if (all.size() > static_cast<std::size_t>(in.k)) all.resize(in.k);
    if (same(ref, all)) {
      ++exhaustive_equal;
    } else {
      misses.push_back(seed);
    }
  }
  const double t = clock.seconds();
  o.pass = guarded_equal == kRandomInstances && exhaustive_equal == kRandomInstances &&
           t < kLimit2;
  o.detail << "guarded == reference beam on " << guarded_equal << "/" << kRandomInstances
           << "; reference == exhaustive top-K on " << exhaustive_equal << "/"
           << kRandomInstances;
  if (!misses.empty()) {
    o.detail << " (first differing seeds:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, misses.size()); ++i)
      o.detail << " " << misses[i];
    o.detail << ")";
  }
  o.detail << ", " << fmt(t, 2) << "s";
  return o;
}

struct RandomStore {
  sg::Embedder embedder{512};
  sg::DemoStore store;

  RandomStore(std::size_t words, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      sg::DemonstrationExample ex;
      ex.id = "ex" + std::to_string(i);
      for (std::size_t j = 0, len = 1 + rng() % 3; j < len; ++j)
        ex.text.push_back("w" + std::to_string(1 + rng() % words));
      ex.vector = embedder.embed(ex.text);
      store.add(std::move(ex));
    }
  }
};

Outcome criterion3() {
  Outcome o;
  Clock clock;
  int equal = 0, exhausted = 0, with_invalid = 0;
  std::vector<std::uint64_t> misses;
  for (std::uint64_t seed = 1; seed <= kRandomInstances; ++seed) {
    const auto in = instance(seed + 100000, 4);  // up to 4 words + end marker = 5 tokens
    const auto m = st::random_model(in.words, seed, 0.2);
    const RandomStore rs(in.words, 2, seed);
    const sg::Validator v(rs.embedder, rs.store, 0.3);
    sg::GuardConfig c;
    c.beam_k = in.k;
    c.max_tokens = in.max_tokens;
    c.schedule = sg::EveryStep{};
    const sg::TokenSeq prompt{1};

    // Brute force: every sequence whose every prefix passes the validator,
    // sorted by likelihood.
    const auto all = st::enumerate_all(m, prompt, in.max_tokens);
    std::vector<st::Scored> valid;
    for (const auto& s : all) {
      std::vector<std::vector<std::string>> prefixes;
      for (std::size_t len = 1; len <= s.tokens.size(); ++len)
        prefixes.push_back(
            m.vocabulary().words(std::span<const sg::TokenId>(s.tokens).first(len)));
      if (v.validate(prefixes).invalid.empty()) valid.push_back(s);
    }
    if (valid.size() < all.size()) ++with_invalid;
    if (valid.size() > static_cast<std::size_t>(in.k)) valid.resize(in.k);

    std::vector<sg::Candidate> got;
    try {
      got = sg::guarded_search(m, &v, c, prompt).outputs;
    } catch (const sg::SearchError&) {
      ++exhausted;
    }
    if (same(got, valid)) {
      ++equal;
    } else {
      misses.push_back(seed);
    }
  }
  const double t = clock.seconds();
  o.pass = equal == kRandomInstances && kRandomInstances >= 50 && t < kLimit3;
  o.detail << "emitted top-K == brute-force valid top-K on " << equal << "/" << kRandomInstances
           << " instances (" << with_invalid << " with invalid sequences, " << exhausted
           << " search errors)";
  if (!misses.empty()) {
    o.detail << " (first differing seeds:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, misses.size()); ++i)
      o.detail << " " << misses[i];
    o.detail << ")";
  }
  o.detail << ", " << fmt(t, 2) << "s";
  return o;
}

Outcome criterion4() {
  Outcome o;
  const sg::SchedulePolicy cw = sg::ContextWise{200.0, 0.3, sg::SimilarityAggregation::kMinPairs};
  auto next = [&](double s, int cur) {
    const std::vector<sg::CandidateSimilarity> stats{{s, s}};
    return sg::next_validation_step(cw, cur, stats, 1000);
  };
  const int at_thr = next(0.3, 10), at_028 = next(0.28, 10), at_05 = next(0.5, 10);
  std::vector<int> k5, exp2;
  const int mt = 100;
  for (int s = sg::first_validation_step(sg::EveryK{5}, mt); s < mt;
       s = sg::next_validation_step(sg::EveryK{5}, s, {}, mt))
    k5.push_back(s);
  for (int s = sg::first_validation_step(sg::PowersOf{2}, 129); s < 129;
       s = sg::next_validation_step(sg::PowersOf{2}, s, {}, 129))
    exp2.push_back(s);
  std::vector<int> want_k5;
  for (int s = 0; s < mt - 1; s += 5) want_k5.push_back(s);
  want_k5.push_back(mt - 1);  // the last step always validates
  const std::vector<int> want_exp2{1, 2, 4, 8, 16, 32, 64, 128};
  o.pass = at_thr == 11 && at_028 == 26 && at_05 == 11 && k5 == want_k5 && exp2 == want_exp2 &&
           sg::next_validation_step(sg::EveryK{5}, 7, {}, 1000) == 12;
  o.detail << "s=ThrV -> cur+" << at_thr - 10 << ", s=0.28 -> cur+" << at_028 - 10
           << ", s=0.5 -> cur+" << at_05 - 10 << ", stepk:5 from 7 -> "
           << sg::next_validation_step(sg::EveryK{5}, 7, {}, 1000) << ", stepk:5 "
           << (k5 == want_k5 ? "matches" : "differs") << " {0,5,10,...}, exp:2 "
           << (exp2 == want_exp2 ? "matches" : "differs") << " {1,2,4,...,128}";
  return o;
}

Outcome criterion5() {
  Outcome o;
  Clock clock;
  const auto spec = detox_spec();
  const auto wb = sg::load_workbench(spec);
  const auto sw = sg::sweep(spec, wb, sg::SweepParameter::kSchedule, {"contextwise", "step1"});
  const auto& cw = sw.results[0].aggregate;
  const auto& s1 = sw.results[1].aggregate;
  const double t = clock.seconds();
  const bool fewer = cw.validations && s1.validations && *cw.validations < *s1.validations;
  const bool close = cw.violation && s1.violation &&
                     *cw.violation <= kViolationRatio * *s1.violation;
  o.pass = fewer && close && cw.failed == 0 && s1.failed == 0 && t < kLimit5;
  o.detail << "#V contextwise " << fmt(cw.validations, 2) << " vs step1 " << fmt(s1.validations, 2)
           << "; violation " << fmt(cw.violation) << " vs " << fmt(s1.violation) << " (ratio "
           << (cw.violation && s1.violation ? fmt(*cw.violation / *s1.violation, 3) : "-")
           << " <= " << kViolationRatio << "); failed " << cw.failed << "/" << s1.failed << ", "
           << fmt(t, 1) << "s";
  return o;
}

Outcome criterion6(std::string& info) {
  Outcome o;
  Clock clock;
  auto spec = copyright_spec();
  const auto wb = sg::load_workbench(spec);
  spec.guard.guard = false;
  const auto plain = sg::run_experiment(spec, wb, "no-guard");
  spec.guard.guard = true;
  spec.guard.schedule = sg::EveryStep{};
  const auto guarded = sg::run_experiment(spec, wb, "step1");
  const double t = clock.seconds();
  const auto& p = plain.aggregate;
  const auto& g = guarded.aggregate;
  double reduction = 0.0;
  if (p.lcs && g.lcs && *p.lcs > 0.0) reduction = 1.0 - *g.lcs / *p.lcs;
  o.pass = p.lcs && g.lcs && g.failed == 0 && reduction >= kLcsReduction && t < kLimit6;
  o.detail << "mean LCS no-guard " << fmt(p.lcs, 2) << " -> guarded (step1) " << fmt(g.lcs, 2)
           << ", reduction " << fmt(100.0 * reduction, 1) << "% (>= " << 100.0 * kLcsReduction
           << "%), failed " << g.failed << "/" << g.runs << ", ppl " << fmt(p.ppl, 2) << " -> "
           << fmt(g.ppl, 2) << ", " << fmt(t, 1) << "s";

  // Same comparison under the context-wise schedule, reported only.
  spec.guard.schedule = sg::ContextWise{};
  const auto cw = sg::run_experiment(spec, wb, "contextwise");
  const auto& c = cw.aggregate;
  std::ostringstream s;
  s << "contextwise on the same fixture: mean LCS " << fmt(c.lcs, 2) << " over "
    << (c.runs - c.failed) << "/" << c.runs << " completed runs (" << c.safety_exhausted
    << " safety-exhausted, " << c.rollback_exhausted << " rollback-exhausted)";
  info = s.str();
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(20260101);
  int agree = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    auto draw = [&] {
      std::vector<int> s(rng() % 13);
      for (auto& x : s) x = static_cast<int>(rng() % 4);
      return s;
    };
    const auto a = draw(), b = draw();
    // Brute force over all subsequences of a.
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
      const auto bits = static_cast<std::size_t>(std::popcount(mask));
      if (bits <= best) continue;
      std::size_t j = 0, matched = 0;
      for (std::size_t q = 0; q < a.size() && j <= b.size(); ++q) {
        if (!(mask & (1u << q))) continue;
        while (j < b.size() && b[j] != a[q]) ++j;
        if (j == b.size()) break;
        ++j;
        ++matched;
      }
      if (matched == bits) best = bits;
    }
    if (sg::lcs(a, b) == best) ++agree;
  }
  const double norm = sg::lcs_norm(20, 50);
  o.pass = agree == trials && norm == 0.4;
  o.detail << "DP == brute force on " << agree << "/" << trials
           << " random pairs (length <= 12); lcs_norm(20, 50) = " << norm;
  return o;
}

Outcome criterion8() {
  Outcome o;
  sg::MeanShiftParams p;
  p.bandwidth = 1.0;
  const std::vector<sg::Point> pts{{0.0}, {0.1}, {5.0}, {5.1}};
  const auto ms = sg::mean_shift(pts, p);
  const bool two = ms.cluster_count() == 2 && ms.labels == std::vector<int>{0, 0, 1, 1};

  const auto spec = detox_spec();
  const auto wb = sg::load_workbench(spec);
  const auto clusters = sg::cluster(wb.full_store, spec.store, 1);
  std::map<int, int> sizes;
  for (int l : clusters.labels) ++sizes[l];
  // Three separated blobs of uneven size.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<sg::Point> blobs;
  for (auto [cx, n] : {std::pair{0.0, 7}, std::pair{3.0, 13}, std::pair{6.0, 23}})
    for (int i = 0; i < n; ++i) blobs.push_back({cx + noise(rng), noise(rng)});
  const auto blob_ms = sg::mean_shift(blobs, p);
  std::map<int, int> blob_sizes;
  for (int l : blob_ms.labels) ++blob_sizes[l];

  // Integer oracle: ceil(tenths * s / 10).
  auto check = [](const std::vector<int>& labels, const std::map<int, int>& sz,
                  std::ostringstream& out) {
    bool ok = true;
    for (int tenths : {1, 3, 5, 7, 10}) {
      const auto picked = sg::sample_representatives(labels, tenths / 10.0, 7);
      std::size_t want = 0;
      for (const auto& [l, s] : sz) want += static_cast<std::size_t>((tenths * s + 9) / 10);
      ok = ok && picked.size() == want;
      out << " R=" << tenths / 10.0 << ":" << picked.size() << "/" << want;
    }
    return ok;
  };
  std::ostringstream store_out, blob_out;
  const bool exact = check(clusters.labels, sizes, store_out) &
                     check(blob_ms.labels, blob_sizes, blob_out);
  o.pass = two && blob_ms.cluster_count() == 3 && exact;
  o.detail << ms.cluster_count() << " clusters on {0,0.1,5,5.1}; " << blob_ms.cluster_count()
           << " clusters on blobs of 7/13/23, |subset| vs sum ceil(R*s):" << blob_out.str()
           << "; detox store " << wb.full_store.size() << " examples in "
           << clusters.cluster_count << " clusters:" << store_out.str();
  return o;
}

Outcome criterion9() {
  Outcome o;
  const auto spec = detox_spec();
  const auto wb = sg::load_workbench(spec);
  const std::vector<std::string> values{"0.3", "0.4", "0.5", "0.6"};
  const auto sw = sg::sweep(spec, wb, sg::SweepParameter::kThrv, values);
  bool viol_ok = true, v_ok = true;
  std::ostringstream rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& a = sw.results[i].aggregate;
    rows << " " << values[i] << ":viol " << fmt(a.violation, 3) << " #V "
         << fmt(a.validations, 2) << " failed " << a.failed << ";";
    if (i == 0) continue;
    const auto& b = sw.results[i - 1].aggregate;
    viol_ok = viol_ok && a.violation && b.violation && *a.violation >= *b.violation;
    v_ok = v_ok && a.validations && b.validations && *a.validations <= *b.validations;
  }

  bool hostile_ok = true;
  std::ostringstream hostile;
  auto hspec = hostile_spec();
  const auto hwb = sg::load_workbench(hspec);
  for (const char* thr : {"0.1", "0.2"}) {
    const auto h = sg::run_experiment(sg::with_parameter(hspec, sg::SweepParameter::kThrv, thr), hwb);
    hostile << " ThrV " << thr << ": " << h.aggregate.safety_exhausted << "/" << h.aggregate.runs
            << " SafetyExhausted;";
    hostile_ok = hostile_ok && h.aggregate.safety_exhausted == h.aggregate.runs;
  }
  o.pass = viol_ok && v_ok && hostile_ok;
  o.detail << "violation non-decreasing " << (viol_ok ? "yes" : "NO") << ", #V non-increasing "
           << (v_ok ? "yes" : "NO") << ";" << rows.str() << " hostile" << hostile.str();
  return o;
}

nlohmann::json strip_wall_time(const nlohmann::json& j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key().rfind("wall_time", 0) != 0) out[it.key()] = strip_wall_time(it.value());
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& x : j) out.push_back(strip_wall_time(x));
    return out;
  }
  return j;
}

Outcome criterion10() {
  Outcome o;
  auto spec = detox_spec();
  spec.repetitions = 3;
  spec.store.ratio = 0.5;
  spec.threads = 4;
  const auto root = std::filesystem::temp_directory_path() / "safeguard_acceptance_c10";
  std::filesystem::remove_all(root);
  std::string dumps[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = root / ("run" + std::to_string(i));
    const auto res = sg::run_experiment(spec);
    sg::write_reports(spec, res, dir);
    std::ifstream in(dir / "report.json");
    dumps[i] = strip_wall_time(nlohmann::json::parse(in)).dump(2);
  }
  std::filesystem::remove_all(root);
  o.pass = dumps[0] == dumps[1] && !dumps[0].empty();
  o.detail << "report.json without wall-time fields: " << dumps[0].size() << " vs "
           << dumps[1].size() << " bytes, " << (o.pass ? "identical" : "DIFFERENT")
           << " (3 repetitions, R=0.5, 4 threads)";
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::string info6;
  const std::vector<Entry> entries{
      {1, "safety guarantee", criterion1},
      {2, "non-interference", criterion2},
      {3, "valid-optimality oracle", criterion3},
      {4, "schedule exactness", criterion4},
      {5, "scheduler efficiency trend", criterion5},
      {6, "memorization suppression", [&] { return criterion6(info6); }},
      {7, "LCS oracle", criterion7},
      {8, "mean shift and sampling", criterion8},
      {9, "ThrV monotonicity", criterion9},
      {10, "determinism", criterion10},
  };
  int failed = 0;
  for (const auto& e : entries) {
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail << "exception: " << ex.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << e.id << " (" << e.name
              << "): " << o.detail.str() << std::endl;
    if (e.id == 6 && !info6.empty()) std::cout << "INFO  criterion 6: " << info6 << std::endl;
  }
  std::cout << (entries.size() - static_cast<std::size_t>(failed)) << "/" << entries.size()
            << " criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
