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

// safeguard_cli: trains an n-gram model, runs guarded or plain decoding over
// a prompt file and writes report.json, report.csv and per_prompt/*.json.
//
//   safeguard_cli --task detox --corpus data/detox/corpus.txt
//       --examples data/detox/examples.jsonl --prompts data/detox/prompts.jsonl
//       --out runs/detox
//
// With --sweep PARAM --values V1,V2,... one experiment runs per value and
// sweep.json/sweep.csv compare them; each value also gets its own report
// directory under out/.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "safeguard/safeguard.hpp"

namespace {

struct TaskDefaults {
  int beam_size;
  int max_tokens;
  int min_tokens;
  int order;
  double smoothing;
};

// Completions on the copyright fixture must run to full length, otherwise an
// immediate end marker (an empty, trivially valid text) wins.
TaskDefaults defaults_for(safeguard::Task t) {
  if (t == safeguard::Task::kCopyright) return {2, 30, 30, 3, 1e-4};
  return {1, 12, 0, 3, 0.0};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guarded beam-search decoding over an n-gram model"};
  app.option_defaults()->always_capture_default();

  std::string task = "detox";
  std::vector<std::string> corpus;
  std::string model_path, save_model, examples, prompts, out;
  int beam_size = 0;
  int max_tokens = 0;
  int min_tokens = -1;
  double thrv = 0.3, thr_rb = 1.0, lambda = 200.0, ratio = 1.0;
  std::string schedule = "contextwise", sched_agg = "min";
  std::uint64_t seed = 1;
  int reps = 5;
  bool no_guard = false;
  std::size_t embed_dim = safeguard::Embedder::kDefaultDimension;
  std::uint64_t hash_seed = safeguard::Embedder::kDefaultHashSeed;
  int order = 0;
  double smoothing = -1.0;
  int attempt_budget = 0, rollback_budget = 8;
  bool no_cluster = false;
  double bandwidth = 0.0;
  int threads = 1;
  std::string sweep_param;
  std::vector<std::string> sweep_values;

  app.add_option("--task", task, "Task flavour")->check(CLI::IsMember({"detox", "copyright"}));
  app.add_option("--corpus", corpus, "Training text files, one document per line");
  app.add_option("--model", model_path, "Load a saved n-gram model instead of training");
  app.add_option("--save-model", save_model, "Write the trained model to this path");
  app.add_option("--examples", examples, "Demonstration examples (JSON Lines)");
  app.add_option("--prompts", prompts, "Prompts (JSON Lines)")->required();
  app.add_option("--beam-size", beam_size, "Beam size K (0: task default)");
  app.add_option("--max-tokens", max_tokens, "Max generated tokens (0: task default)");
  app.add_option("--min-tokens", min_tokens, "No end marker before this many tokens (-1: task default)");
  app.add_option("--thrv", thrv, "Validation threshold");
  app.add_option("--thr-rb", thr_rb, "Rollback threshold");
  app.add_option("--lambda", lambda, "Context-wise schedule slope");
  app.add_option("--ratio", ratio, "Representative sampling ratio R");
  app.add_option("--schedule", schedule, "contextwise|step1|stepk:K|exp:B");
  app.add_option("--sched-agg", sched_agg, "Similarity aggregation")
      ->check(CLI::IsMember({"min", "maxmax"}));
  app.add_option("--seed", seed, "Base seed; repetition r uses seed + r");
  app.add_option("--reps", reps, "Repetitions")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory")->required();
  app.add_flag("--no-guard", no_guard, "Plain beam search baseline");
  app.add_option("--embed-dim", embed_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  app.add_option("--hash-seed", hash_seed, "Feature hashing seed");
  app.add_option("--order", order, "n-gram order (0: task default)");
  app.add_option("--smoothing", smoothing, "Add-k constant (negative: task default)");
  app.add_option("--attempt-budget", attempt_budget, "Refill rounds per step (0: 16K)");
  app.add_option("--rollback-budget", rollback_budget, "Rollbacks per run");
  app.add_flag("--no-cluster", no_cluster, "Skip clustering and sampling");
  app.add_option("--bandwidth", bandwidth, "Mean-shift bandwidth (0: estimate)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--sweep", sweep_param, "thrv|lambda|ratio|schedule")
      ->check(CLI::IsMember({"thrv", "lambda", "ratio", "ratio_R", "schedule"}));
  app.add_option("--values", sweep_values, "Sweep values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    safeguard::ExperimentSpec spec;
    spec.task = safeguard::parse_task(task);
    const TaskDefaults d = defaults_for(spec.task);
    spec.corpus_paths = corpus;
    spec.model_path = model_path;
    spec.examples_path = examples;
    spec.prompts_path = prompts;
    spec.ngram_order = order > 0 ? order : d.order;
    spec.smoothing_k = smoothing >= 0.0 ? smoothing : d.smoothing;
    auto& g = spec.guard;
    g.beam_k = beam_size > 0 ? beam_size : d.beam_size;
    g.max_tokens = max_tokens > 0 ? max_tokens : d.max_tokens;
    g.min_tokens = min_tokens >= 0 ? std::min(min_tokens, g.max_tokens)
                                   : std::min(d.min_tokens, g.max_tokens);
    g.thrv = thrv;
    g.thr_rb = thr_rb;
    g.lambda = lambda;
    g.aggregation = sched_agg == "min" ? safeguard::SimilarityAggregation::kMinPairs
                                       : safeguard::SimilarityAggregation::kMaxOfMax;
    g.schedule = safeguard::parse_schedule(schedule);
    g.attempt_budget = attempt_budget;
    g.rollback_budget = rollback_budget;
    g.guard = !no_guard;
    spec.store.ratio = ratio;
    spec.store.do_clustering = !no_cluster;
    if (bandwidth > 0.0) spec.store.bandwidth = bandwidth;
    spec.embed_dim = embed_dim;
    spec.hash_seed = hash_seed;
    spec.repetitions = reps;
    spec.seed = seed;
    spec.threads = threads;
    spec.out_dir = out;
    spec.validate();
    if (!sweep_param.empty() && sweep_values.empty())
      throw std::invalid_argument("--sweep needs --values");

    const auto wb = safeguard::load_workbench(spec);
    if (!save_model.empty()) {
      if (const auto parent = std::filesystem::path(save_model).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
      wb.model.save(save_model);
    }
    std::cerr << "model: order " << wb.model.order() << ", vocabulary "
              << wb.model.vocab_size() << "; examples " << wb.full_store.size()
              << "; prompts " << wb.prompts.size() << "\n";

    auto summary = [](const safeguard::AggregateRow& a) {
      std::cout << (a.label.empty() ? std::string("run") : a.label) << ": runs " << a.runs
                << ", failed " << a.failed << ", ppl " << (a.ppl ? std::to_string(*a.ppl) : "-")
                << ", lcs " << (a.lcs ? std::to_string(*a.lcs) : "-") << ", violation "
                << (a.violation ? std::to_string(*a.violation) : "-") << ", #step "
                << (a.steps_validated ? std::to_string(*a.steps_validated) : "-") << ", #v "
                << (a.validations ? std::to_string(*a.validations) : "-") << ", #rb "
                << (a.rollbacks ? std::to_string(*a.rollbacks) : "-") << ", time "
                << a.wall_time_mean_s << "s\n";
    };

    if (sweep_param.empty()) {
      const auto res = safeguard::run_experiment(spec, wb);
      safeguard::write_reports(spec, res, out);
      summary(res.aggregate);
    } else {
      const auto param = safeguard::parse_sweep_parameter(sweep_param);
      const auto sw = safeguard::sweep(spec, wb, param, sweep_values);
      for (std::size_t i = 0; i < sw.values.size(); ++i) {
        const auto s = safeguard::with_parameter(spec, param, sw.values[i]);
        safeguard::write_reports(
            s, sw.results[i],
            std::filesystem::path(out) /
                safeguard::safe_file_name(safeguard::sweep_parameter_name(param) + "_" +
                                          sw.values[i]));
        summary(sw.results[i].aggregate);
      }
      safeguard::write_sweep(spec, sw, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
