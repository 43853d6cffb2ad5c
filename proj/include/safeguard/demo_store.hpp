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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safeguard/common.hpp"
#include "safeguard/embedding.hpp"
#include "safeguard/mean_shift.hpp"
#include "safeguard/text.hpp"

namespace safeguard {

// One line of a demonstration-example file:
//   {"id": string, "text": string, "embedding": [real, ...]}   (embedding optional)
struct DemoRecord {
  std::string id;
  std::string text;
  std::optional<std::vector<double>> embedding;
};

struct DemonstrationExample {
  std::string id;
  std::vector<std::string> text;
  EmbeddingVector vector;
  std::optional<int> cluster;
};

struct SimilarityHit {
  double score = 0.0;  // max cosine over the store; 0 when empty
  std::optional<std::string> nearest_id;
  double min_score = 0.0;  // min cosine over the store; 0 when empty
};

struct StoreConfig {
  double ratio = 1.0;                // R, in (0, 1]
  bool do_clustering = true;
  std::optional<double> bandwidth;   // nullopt: median heuristic
  int max_iterations = 300;
  double shift_tolerance = 1e-6;

  void validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0))
      throw std::invalid_argument("ratio R must lie in (0, 1]");
    if (bandwidth && !(*bandwidth > 0.0))
      throw std::invalid_argument("bandwidth must be positive");
    if (max_iterations < 1 || !(shift_tolerance > 0.0))
      throw std::invalid_argument("bad mean-shift iteration settings");
  }
};

class DemoStore {
 public:
  DemoStore() = default;

  void add(DemonstrationExample example) {
    if (!ids_.insert(example.id).second)
      throw std::invalid_argument("duplicate demonstration id '" + example.id + "'");
    if (!examples_.empty() &&
        example.vector.dimension() != examples_.front().vector.dimension())
      throw std::invalid_argument("demonstration '" + example.id +
                                  "' has a different embedding dimension");
    examples_.push_back(std::move(example));
  }

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const std::vector<DemonstrationExample>& examples() const { return examples_; }
  const DemonstrationExample& operator[](std::size_t i) const { return examples_[i]; }

  void assign_clusters(std::span<const int> labels) {
    if (labels.size() != examples_.size())
      throw std::invalid_argument("label count does not match store size");
    for (std::size_t i = 0; i < labels.size(); ++i) examples_[i].cluster = labels[i];
  }

  // Copy of the store restricted to `indices`, in the given order.
  DemoStore subset(std::span<const std::size_t> indices) const {
    DemoStore out;
    for (std::size_t i : indices) out.add(examples_.at(i));
    return out;
  }

  // Exact scan. Ties on the max score go to the lexicographically smallest id.
  SimilarityHit max_similarity(const EmbeddingVector& candidate) const {
    SimilarityHit hit;
    if (examples_.empty()) return hit;
    hit.score = -std::numeric_limits<double>::infinity();
    hit.min_score = std::numeric_limits<double>::infinity();
    for (const auto& ex : examples_) {
      const double s = cosine(candidate, ex.vector);
      if (s > hit.score || (s == hit.score && ex.id < *hit.nearest_id)) {
        hit.score = s;
        hit.nearest_id = ex.id;
      }
      hit.min_score = std::min(hit.min_score, s);
    }
    return hit;
  }

 private:
  std::vector<DemonstrationExample> examples_;
  std::set<std::string> ids_;
};

// Reads a JSON Lines file of demonstration records. Blank lines are skipped.
inline std::vector<DemoRecord> read_demo_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<DemoRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DemoRecord r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      if (j.contains("embedding"))
        r.embedding = j.at("embedding").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Embedder whose IDF table is frozen from the record texts.
inline Embedder fit_embedder(std::span<const DemoRecord> records,
                             std::size_t dimension = Embedder::kDefaultDimension,
                             std::uint64_t hash_seed = Embedder::kDefaultHashSeed) {
  Embedder e(dimension, hash_seed);
  std::vector<std::vector<std::string>> docs;
  docs.reserve(records.size());
  for (const auto& r : records) docs.push_back(tokenize(r.text));
  e.fit_idf(docs);
  return e;
}

// Embeds every record (or takes its explicit embedding, which must match the
// embedder's dimension and is unit-normalized here).
inline DemoStore build_store(std::span<const DemoRecord> records,
                             const Embedder& embedder) {
  DemoStore store;
  for (const auto& r : records) {
    DemonstrationExample ex;
    ex.id = r.id;
    ex.text = tokenize(r.text);
    if (r.embedding) {
      if (r.embedding->size() != embedder.dimension())
        throw FormatError("demonstration '" + r.id + "': embedding has dimension " +
                          std::to_string(r.embedding->size()) + ", expected " +
                          std::to_string(embedder.dimension()));
      std::vector<double> v = *r.embedding;
      double ss = 0.0;
      for (double x : v) ss += x * x;
      if (ss > 0.0)
        for (double& x : v) x /= std::sqrt(ss);
      ex.vector = EmbeddingVector(std::move(v));
    } else {
      ex.vector = embedder.embed(ex.text);
    }
    try {
      store.add(std::move(ex));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  }
  return store;
}

struct ClusterResult {
  std::vector<int> labels;
  std::size_t cluster_count = 0;
  double bandwidth = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Mean shift on the unit sphere. `seed` drives the bandwidth sample only.
inline ClusterResult cluster(const DemoStore& store, const StoreConfig& config,
                             std::uint64_t seed = 0) {
  config.validate();
  ClusterResult out;
  if (store.empty()) return out;
  std::vector<Point> points;
  points.reserve(store.size());
  for (const auto& ex : store.examples())
    points.emplace_back(ex.vector.values().begin(), ex.vector.values().end());
  MeanShiftParams p;
  p.bandwidth = config.bandwidth ? *config.bandwidth : estimate_bandwidth(points, seed);
  p.max_iterations = config.max_iterations;
  p.shift_tolerance = config.shift_tolerance;
  p.project_to_sphere = true;
  auto ms = mean_shift(points, p);
  out.labels = std::move(ms.labels);
  out.cluster_count = ms.cluster_count();
  out.bandwidth = p.bandwidth;
  out.converged = ms.converged;
  out.iterations = ms.iterations;
  return out;
}

// ceil(ratio * size), at least 1. The 1e-9 slack keeps products such as
// 0.3 * 10 = 3.0000000000000004 from rounding up.
inline std::size_t retained_count(std::size_t cluster_size, double ratio) {
  if (cluster_size == 0) return 0;
  const double raw = std::ceil(ratio * static_cast<double>(cluster_size) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1,
                                 cluster_size);
}

// From each cluster of size s keeps retained_count(s, ratio) members chosen
// uniformly at random. Clusters are visited in ascending label order, each
// drawing from the same generator. Returned indices are ascending.
inline std::vector<std::size_t> sample_representatives(std::span<const int> labels,
                                                       double ratio,
                                                       std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("ratio R must lie in (0, 1]");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (const auto& [label, idx] : members) {
    const auto pick =
        sample_without_replacement(rng, idx.size(), retained_count(idx.size(), ratio));
    for (std::size_t p : pick) out.push_back(idx[p]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Cluster + sample, as used before a guarded run. Without clustering the
// full store is returned.
struct PreparedStore {
  DemoStore subset;
  ClusterResult clusters;
};

inline PreparedStore prepare_store(const DemoStore& full, const StoreConfig& config,
                                   std::uint64_t seed) {
  config.validate();
  PreparedStore out;
  if (!config.do_clustering || full.empty()) {
    out.subset = full;
    return out;
  }
  out.clusters = cluster(full, config, seed);
  std::vector<std::size_t> keep;
  if (config.ratio >= 1.0) {
    keep.resize(full.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  } else {
    keep = sample_representatives(out.clusters.labels, config.ratio, seed);
  }
  DemoStore labelled = full;
  labelled.assign_clusters(out.clusters.labels);
  out.subset = labelled.subset(keep);
  return out;
}

}  // namespace safeguard
