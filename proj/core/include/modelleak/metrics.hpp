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

#ifndef MODELLEAK_METRICS_HPP_
#define MODELLEAK_METRICS_HPP_

#include <map>
#include <string>
#include <vector>

#include "modelleak/nn.hpp"

namespace modelleak {

// Empirical privacy for demographic attributes: 1 - mean attack accuracy.
double empirical_privacy_demographic(const std::vector<double>& accuracies);

struct EntityF1 {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Binary presence vectors per entity attribute (1 = present). Micro
// pools TP/FP/FN across entities; macro averages per-entity F1.
EntityF1 entity_f1(const std::map<std::string, std::vector<int>>& predicted,
                   const std::map<std::string, std::vector<int>>& gold);

// 1 - micro-F1 over pooled entity presence.
double empirical_privacy_entities(
    const std::map<std::string, std::vector<int>>& predicted,
    const std::map<std::string, std::vector<int>>& gold);

struct SharpnessStats {
  double mean_max = 0.0;
  double median_max = 0.0;
};

// Mean and median of per-vector maximum posterior entries. Median of an
// even count takes the lower middle value.
SharpnessStats sharpness_stats(const std::vector<Vec>& posteriors);

// Spearman rank correlation with average ranks for ties.
double rank_correlation(const std::vector<double>& xs,
                        const std::vector<double>& ys);

}  // namespace modelleak

#endif  // MODELLEAK_METRICS_HPP_
