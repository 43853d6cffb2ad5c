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

// Flat-kernel mean shift over dense points.
//
// Every point is shifted independently to the mean of all input points
// within `bandwidth` (Euclidean) of its current position until the shift
// drops below `shift_tolerance` or `max_iterations` is reached. With
// `project_to_sphere` the shifted point is re-normalized after each step,
// which keeps unit vectors on the sphere. Modes are then merged in input
// order: a point joins the first cluster whose mode lies within
// bandwidth / 2 of its own mode, otherwise it opens a new cluster.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "safeguard/common.hpp"

namespace safeguard {

using Point = std::vector<double>;

struct MeanShiftParams {
  double bandwidth = 1.0;
  int max_iterations = 300;
  double shift_tolerance = 1e-6;
  bool project_to_sphere = false;
};

struct MeanShiftResult {
  std::vector<int> labels;
  std::vector<Point> modes;  // one per cluster, in label order
  bool converged = true;     // every point met shift_tolerance
  int iterations = 0;        // max over points
  double max_final_shift = 0.0;

  std::size_t cluster_count() const { return modes.size(); }
};

namespace internal {

inline double distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

}  // namespace internal

inline MeanShiftResult mean_shift(std::span<const Point> points,
                                  const MeanShiftParams& params) {
  if (!(params.bandwidth > 0.0))
    throw std::invalid_argument("mean shift bandwidth must be positive");
  if (params.max_iterations < 1)
    throw std::invalid_argument("mean shift needs at least one iteration");
  MeanShiftResult result;
  if (points.empty()) return result;
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::invalid_argument("mean shift: ragged points");

  std::vector<Point> shifted(points.size());
  Point mean(dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Point x = points[i];
    double shift = 0.0;
    int it = 0;
    bool done = false;
    while (it < params.max_iterations) {
      ++it;
      std::fill(mean.begin(), mean.end(), 0.0);
      std::size_t n = 0;
      for (const auto& q : points) {
        if (internal::distance(q, x) <= params.bandwidth) {
          for (std::size_t d = 0; d < dim; ++d) mean[d] += q[d];
          ++n;
        }
      }
      if (n == 0) {
        shift = 0.0;
        done = true;
        break;
      }
      for (double& m : mean) m /= static_cast<double>(n);
      if (params.project_to_sphere) {
        double ss = 0.0;
        for (double m : mean) ss += m * m;
        if (ss > 0.0) {
          const double inv = 1.0 / std::sqrt(ss);
          for (double& m : mean) m *= inv;
        }
      }
      shift = internal::distance(mean, x);
      x = mean;
      if (shift < params.shift_tolerance) {
        done = true;
        break;
      }
    }
    result.converged = result.converged && done;
    result.iterations = std::max(result.iterations, it);
    result.max_final_shift = std::max(result.max_final_shift, shift);
    shifted[i] = std::move(x);
  }

  const double merge_radius = params.bandwidth / 2.0;
  result.labels.assign(points.size(), -1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t c = 0; c < result.modes.size(); ++c) {
      if (internal::distance(result.modes[c], shifted[i]) <= merge_radius) {
        result.labels[i] = static_cast<int>(c);
        break;
      }
    }
    if (result.labels[i] < 0) {
      result.labels[i] = static_cast<int>(result.modes.size());
      result.modes.push_back(shifted[i]);
    }
  }
  return result;
}

// Median pairwise Euclidean distance over a random sample of at most
// `sample_size` points. Falls back to 1.0 with fewer than two points and
// floors the result at 1e-9 so that it stays a valid bandwidth.
inline double estimate_bandwidth(std::span<const Point> points,
                                 std::uint64_t seed,
                                 std::size_t sample_size = 500) {
  if (points.size() < 2) return 1.0;
  Rng rng(seed);
  const auto idx = sample_without_replacement(rng, points.size(),
                                              std::min(sample_size, points.size()));
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dists.push_back(internal::distance(points[idx[a]], points[idx[b]]));
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double median =
      m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  return std::max(median, 1e-9);
}

}  // namespace safeguard
