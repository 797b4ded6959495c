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

#ifndef CAPE_METRICS_H_
#define CAPE_METRICS_H_

#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cape/corpus.h"
#include "json.hpp"

namespace cape {

enum class EntityMode { kSynthetic, kNatural };

EntityMode ParseEntityMode(std::string_view name);
std::string_view EntityModeName(EntityMode mode);

// Natural mode only. Capitalized sentence-initial function words that the
// capitalization heuristic would otherwise report as entities.
const std::set<std::string>& DefaultStopwords();

struct EntityOptions {
  EntityMode mode = EntityMode::kSynthetic;
  std::set<std::string> stopwords = DefaultStopwords();
};

struct EntitySet {
  std::vector<std::string> tokens;  // multiset, in sequence order
  EntityMode mode = EntityMode::kSynthetic;
};

// Synthetic: tokens whose surface form is an entity class token "E<k>".
// Natural: capitalized alphabetic words or tokens containing a digit, minus
// the stopwords.
EntitySet ExtractEntities(std::span<const std::string> tokens, const EntityOptions& options = {});

// Fraction of summary entity tokens (with multiplicity) that occur in the
// source entity set. nullopt when the summary has no entity tokens.
std::optional<double> EntityPrecisionSrc(std::span<const std::string> summary,
                                         std::span<const std::string> source,
                                         const EntityOptions& options = {});

// Fraction of reference entity tokens (with multiplicity) present in the
// generated summary's entity set. nullopt when the reference has none.
std::optional<double> EntityRecallRef(std::span<const std::string> generated,
                                      std::span<const std::string> reference,
                                      const EntityOptions& options = {});

struct ArcCounts {
  int dae_errors = 0;
  int arc_total = 0;
};

// Exact fact-level entailment: every parsed fact is an arc and is in error
// unless it is a source fact; every unparseable span is an arc in error.
ArcCounts FactArcEntailment(std::span<const std::string> summary, std::span<const Fact> source_facts);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap on whitespace tokens, no stemming.
Prf RougeN(std::span<const std::string> candidate, std::span<const std::string> reference, int n);
// Longest-common-subsequence based.
Prf RougeL(std::span<const std::string> candidate, std::span<const std::string> reference);

struct ExampleScore {
  std::string id;
  std::optional<double> ep_src;
  std::optional<double> er_ref;
  int dae_errors = 0;
  int arc_total = 0;
  std::optional<double> d_arc;
  Prf rouge1;
  Prf rouge2;
  Prf rougeL;
  int summary_length = 0;
  // Numerators/denominators kept for micro averages.
  int summary_entities = 0;
  int summary_entities_in_source = 0;
  int reference_entities = 0;
  int reference_entities_recalled = 0;
};

// Means over examples where the metric is defined. The macro average is the
// reported figure; micro averages are diagnostics.
struct Aggregates {
  std::optional<double> d_arc;
  std::optional<double> d_sum;
  std::optional<double> ep_src;
  std::optional<double> er_ref;
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  double len = 0.0;
};

struct ScoreReport {
  EntityMode mode = EntityMode::kSynthetic;
  std::vector<ExampleScore> examples;
  Aggregates macro;
  Aggregates micro;
  int absent_ep_src = 0;
  int absent_er_ref = 0;
  int absent_d_arc = 0;
};

struct GeneratedSummary {
  std::string id;
  Tokens tokens;
};

// Scores generated[i] against examples[i]: E-P_src and the arc metrics
// against the source, E-R_ref and ROUGE against the reference summary.
// Throws ValidationError on length or id mismatch. Arc metrics need fact
// annotations and are skipped for natural-text records.
ScoreReport ScoreCorpus(std::span<const Example> examples, std::span<const GeneratedSummary> generated,
                        const EntityOptions& options = {});

// Scores each example's reference summary as if it were generated output.
ScoreReport ScoreReferences(std::span<const Example> examples, const EntityOptions& options = {});

// Recomputes macro/micro aggregates and absent counts from report.examples.
void Aggregate(ScoreReport& report);

nlohmann::ordered_json AggregatesToJson(const Aggregates& agg);
nlohmann::ordered_json ScoreReportToJson(const ScoreReport& report);
ScoreReport ScoreReportFromJson(const nlohmann::json& j);

// Column order: D_arc, D_sum, E-P_src, E-R_ref, R1, R2, RL, len.
std::string AggregateCsvHeader();
std::string AggregateCsvRow(const Aggregates& agg);
std::string FormatMetric(std::optional<double> value);

std::vector<GeneratedSummary> ReadSummariesJsonl(const std::filesystem::path& path);
void WriteSummariesJsonl(const std::filesystem::path& path, std::span<const GeneratedSummary> summaries);

}  // namespace cape

#endif  // CAPE_METRICS_H_
