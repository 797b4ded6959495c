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

#include "cape/selection.h"

#include <cmath>

#include "cape/errors.h"

namespace cape {

SelectionMetric ParseSelectionMetric(std::string_view name) {
  if (name == "ep" || name == "entity_precision") return SelectionMetric::kEntityPrecision;
  if (name == "dae") return SelectionMetric::kDae;
  throw ValidationError("unknown selection metric '" + std::string(name) + "'");
}

std::string_view SelectionMetricName(SelectionMetric metric) {
  return metric == SelectionMetric::kDae ? "dae" : "ep";
}

void SelectionThresholds::Validate() const {
  if (!std::isfinite(ep_clean) || !std::isfinite(ep_noisy) || !std::isfinite(dae_noisy))
    throw ValidationError("selection thresholds must be finite");
  if (!(ep_clean > ep_noisy)) throw ValidationError("ep_clean must exceed ep_noisy");
  if (dae_errors_clean < 0) throw ValidationError("dae_errors_clean must be nonnegative");
  if (!(dae_noisy > 0.0)) throw ValidationError("dae_noisy must be positive");
}

SelectionThresholds ThresholdsFromJson(const nlohmann::json& j) {
  SelectionThresholds t;
  try {
    t.ep_clean = j.value("ep_clean", t.ep_clean);
    t.dae_errors_clean = j.value("dae_errors_clean", t.dae_errors_clean);
    t.dae_noisy = j.value("dae_noisy", t.dae_noisy);
    t.ep_noisy = j.value("ep_noisy", t.ep_noisy);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad thresholds: ") + e.what());
  }
  t.Validate();
  return t;
}

nlohmann::ordered_json ThresholdsToJson(const SelectionThresholds& t) {
  nlohmann::ordered_json j;
  j["ep_clean"] = t.ep_clean;
  j["dae_errors_clean"] = t.dae_errors_clean;
  j["dae_noisy"] = t.dae_noisy;
  j["ep_noisy"] = t.ep_noisy;
  return j;
}

IdSelection SelectClean(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t) {
  IdSelection out;
  for (const auto& s : scores.examples) {
    if (metric == SelectionMetric::kEntityPrecision) {
      if (s.ep_src && *s.ep_src >= t.ep_clean) out.ids.insert(s.id);
    } else {
      if (s.arc_total > 0 && s.dae_errors <= t.dae_errors_clean) out.ids.insert(s.id);
    }
  }
  out.empty_warning = out.ids.empty();
  return out;
}

IdSelection SelectNoisy(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t) {
  IdSelection out;
  for (const auto& s : scores.examples) {
    if (metric == SelectionMetric::kEntityPrecision) {
      if (s.ep_src && *s.ep_src <= t.ep_noisy) out.ids.insert(s.id);
    } else {
      if (s.arc_total > 0 &&
          static_cast<double>(s.dae_errors) / s.arc_total >= t.dae_noisy)
        out.ids.insert(s.id);
    }
  }
  out.empty_warning = out.ids.empty();
  return out;
}

SelectionResult Select(const ScoreReport& scores, SelectionMetric metric, const SelectionThresholds& t) {
  t.Validate();
  SelectionResult r;
  r.metric = metric;
  r.thresholds = t;
  r.corpus_size = scores.examples.size();
  IdSelection clean = SelectClean(scores, metric, t);
  IdSelection noisy = SelectNoisy(scores, metric, t);
  r.clean_ids = std::move(clean.ids);
  r.noisy_ids = std::move(noisy.ids);
  if (clean.empty_warning) r.warnings.push_back("clean selection is empty");
  if (noisy.empty_warning) r.warnings.push_back("noisy selection is empty");
  return r;
}

nlohmann::ordered_json SelectionResultToJson(const SelectionResult& r) {
  const double n = r.corpus_size ? static_cast<double>(r.corpus_size) : 1.0;
  nlohmann::ordered_json j;
  j["metric"] = std::string(SelectionMetricName(r.metric));
  j["thresholds"] = ThresholdsToJson(r.thresholds);
  j["corpus_size"] = r.corpus_size;
  j["clean_size"] = r.clean_ids.size();
  j["noisy_size"] = r.noisy_ids.size();
  j["clean_fraction"] = r.clean_ids.size() / n;
  j["noisy_fraction"] = r.noisy_ids.size() / n;
  j["warnings"] = r.warnings;
  j["clean_ids"] = r.clean_ids;
  j["noisy_ids"] = r.noisy_ids;
  return j;
}

std::vector<Example> FilterExamples(std::span<const Example> corpus, const std::set<std::string>& ids) {
  std::vector<Example> out;
  for (const auto& ex : corpus)
    if (ids.count(ex.id)) out.push_back(ex);
  return out;
}

}  // namespace cape
