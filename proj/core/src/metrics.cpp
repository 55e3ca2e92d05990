// Copyright 2026 The Modelleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modelleak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modelleak/error.hpp"

namespace modelleak {

double empirical_privacy_demographic(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw EmptyInput("no attribute accuracies");
  double sum = 0.0;
  for (double a : accuracies) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw InvalidInput("attack accuracy outside [0,1]");
    }
    sum += a;
  }
  return 1.0 - sum / static_cast<double>(accuracies.size());
}

namespace {

struct F1Counts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;

  double f1() const {
    const size_t denom = 2 * tp + fp + fn;
    if (denom == 0) return 1.0;  // nothing present, nothing claimed
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

}  // namespace

EntityF1 entity_f1(const std::map<std::string, std::vector<int>>& predicted,
                   const std::map<std::string, std::vector<int>>& gold) {
  if (gold.empty()) throw EmptyInput("no entity attributes");
  F1Counts pooled;
  double macro_sum = 0.0;
  for (const auto& [name, truth] : gold) {
    auto it = predicted.find(name);
    if (it == predicted.end()) {
      throw ShapeError("missing predictions for entity " + name);
    }
    const auto& pred = it->second;
    if (pred.size() != truth.size()) {
      throw ShapeError("prediction/gold length mismatch for entity " + name);
    }
    F1Counts local;
    for (size_t i = 0; i < truth.size(); ++i) {
      const bool p = pred[i] != 0;
      const bool g = truth[i] != 0;
      if (p && g) ++local.tp;
      if (p && !g) ++local.fp;
      if (!p && g) ++local.fn;
    }
    pooled.tp += local.tp;
    pooled.fp += local.fp;
    pooled.fn += local.fn;
    macro_sum += local.f1();
  }
  EntityF1 out;
  out.micro_f1 = pooled.f1();
  out.macro_f1 = macro_sum / static_cast<double>(gold.size());
  return out;
}

double empirical_privacy_entities(
    const std::map<std::string, std::vector<int>>& predicted,
    const std::map<std::string, std::vector<int>>& gold) {
  return 1.0 - entity_f1(predicted, gold).micro_f1;
}

SharpnessStats sharpness_stats(const std::vector<Vec>& posteriors) {
  if (posteriors.empty()) throw EmptyInput("no posteriors");
  std::vector<double> maxes;
  maxes.reserve(posteriors.size());
  for (const auto& p : posteriors) {
    if (p.empty()) throw EmptyInput("empty posterior vector");
    maxes.push_back(*std::max_element(p.begin(), p.end()));
  }
  SharpnessStats stats;
  stats.mean_max = std::accumulate(maxes.begin(), maxes.end(), 0.0) /
                   static_cast<double>(maxes.size());
  std::sort(maxes.begin(), maxes.end());
  stats.median_max = maxes[(maxes.size() - 1) / 2];
  return stats;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double rank_correlation(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidInput("series lengths differ");
  if (xs.size() < 3) throw InvalidInput("need at least 3 points");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  if (vx == 0.0 || vy == 0.0) {
    throw InvalidInput("rank correlation undefined for a constant series");
  }
  return cov / std::sqrt(vx * vy);
}

}  // namespace modelleak
