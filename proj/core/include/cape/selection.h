// Copyright 2026 The CaPE Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAPE_SELECTION_H_
#define CAPE_SELECTION_H_

#include <set>
#include <string>
#include <vector>

#include "cape/metrics.h"
#include "json.hpp"

namespace cape {

enum class SelectionMetric { kEntityPrecision, kDae };

SelectionMetric ParseSelectionMetric(std::string_view name);  // "ep" | "dae"
std::string_view SelectionMetricName(SelectionMetric metric);

// Entity thresholds are fractions (1.0 == 100%). dae_noisy is the minimum
// fraction of a summary's arcs that must be in error.
struct SelectionThresholds {
  double ep_clean = 1.0;
  int dae_errors_clean = 0;
  double dae_noisy = 0.75;
  double ep_noisy = 0.10;

  void Validate() const;
};

SelectionThresholds ThresholdsFromJson(const nlohmann::json& j);
nlohmann::ordered_json ThresholdsToJson(const SelectionThresholds& t);

struct IdSelection {
  std::set<std::string> ids;
  bool empty_warning = false;
};

// Examples whose metric is absent join neither set.
IdSelection SelectClean(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t);
IdSelection SelectNoisy(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t);

struct SelectionResult {
  SelectionMetric metric = SelectionMetric::kDae;
  SelectionThresholds thresholds;
  std::set<std::string> clean_ids;
  std::set<std::string> noisy_ids;
  size_t corpus_size = 0;
  std::vector<std::string> warnings;
};

SelectionResult Select(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t);
nlohmann::ordered_json SelectionResultToJson(const SelectionResult& result);

// Keeps corpus order.
std::vector<Example> FilterExamples(std::span<const Example> corpus, const std::set<std::string>& ids);

}  // namespace cape

#endif  // CAPE_SELECTION_H_
