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

#ifndef CAPE_HARNESS_H_
#define CAPE_HARNESS_H_

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cape/checkpoint.h"
#include "cape/corpus.h"
#include "cape/metrics.h"
#include "cape/model.h"
#include "cape/selection.h"
#include "json.hpp"

namespace cape {

// Expert metric then anti-expert metric: "DD", "PP", "DP", "PD" with D = dae
// and P = entity precision.
struct Pairing {
  std::string name;
  SelectionMetric expert = SelectionMetric::kDae;
  SelectionMetric anti = SelectionMetric::kDae;
};

Pairing ParsePairing(std::string_view name);

struct EnsembleConfig {
  int subsets = 2;
  double fraction = 0.25;
};

struct HarnessConfig {
  CorpusConfig corpus;
  TrainConfig train;
  TrainConfig finetune;  // train settings with one epoch unless overridden
  SelectionThresholds thresholds;
  std::vector<Pairing> pairings;
  std::string compare_pairing = "DD";
  std::vector<double> grid{0.2, 0.4, 0.6, 0.8, 1.0};
  DecodeOptions decode;
  double constraint_drop = 0.01;
  EnsembleConfig ensemble;

  HarnessConfig();
  void Validate() const;
};

// Missing keys keep their defaults. Throws ValidationError.
HarnessConfig HarnessConfigFromJson(const nlohmann::json& j);
nlohmann::ordered_json HarnessConfigToJson(const HarnessConfig& config);

// "lo:hi:step" (inclusive, step > 0) or a comma-separated list. The result
// must be finite, positive and strictly increasing.
std::vector<double> ParseGrid(std::string_view text);
void ValidateGrid(std::span<const double> grid);

struct SweepRow {
  double alpha = 0.0;
  Aggregates agg;
};

// rows[0] is the base model at alpha 0.
struct SweepResult {
  std::string mode;
  std::vector<SweepRow> rows;
};

using MergeAt = std::function<Checkpoint(double alpha)>;

ScoreReport EvaluateCheckpoint(const Checkpoint& ckpt, std::span<const Example> examples,
                               const DecodeOptions& decode);

SweepResult SweepWith(std::string mode, const MergeAt& merge, const Checkpoint& base,
                      std::span<const double> grid, std::span<const Example> valid,
                      const DecodeOptions& decode);

// CaPE merge at every grid alpha. Throws on incompatible checkpoints.
SweepResult SweepAlpha(const Checkpoint& base, const Checkpoint& expert, const Checkpoint& anti,
                       std::span<const double> grid, std::span<const Example> valid,
                       const DecodeOptions& decode);

struct AlphaSelection {
  double alpha = 0.0;
  bool fallback = false;  // no grid alpha met the constraints
  double r1 = 0.0;
  double r1_base = 0.0;
  std::optional<double> er = std::nullopt;
  std::optional<double> er_base = std::nullopt;
  std::vector<std::pair<double, std::optional<double>>> d_sum_by_alpha;
};

// Largest alpha with R1 >= (1 - drop) * R1_base and E-R_ref >= (1 - drop) *
// E-R_ref_base; alpha 0 with fallback set when none qualifies.
AlphaSelection SelectAlpha(const SweepResult& sweep, double constraint_drop = 0.01);
nlohmann::ordered_json AlphaSelectionToJson(const AlphaSelection& selection);

struct PairingOutcome {
  Pairing pairing;
  SweepResult sweep;
  AlphaSelection selection;
  Checkpoint merged;
  ScoreReport valid;
  ScoreReport test;
};

struct PipelineResult {
  Corpus corpus;
  Checkpoint base;
  std::map<SelectionMetric, SelectionResult> selections;
  std::map<SelectionMetric, Checkpoint> experts;
  std::map<SelectionMetric, Checkpoint> antis;
  std::vector<PairingOutcome> outcomes;
  std::vector<std::string> warnings;
};

// Holds <dir>/.cape.lock for its lifetime. Throws IoError when the lock is
// already present.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Generates the corpus, trains the base model, fine-tunes experts and
// anti-experts, sweeps alpha for each pairing and scores the selected merge
// on valid and test. Writes everything under `out`.
PipelineResult RunPipeline(const HarnessConfig& config, const std::filesystem::path& out);

struct ComparisonResult {
  std::vector<SweepResult> modes;  // cape, expert_only, anti_only, fresh_train
  SweepResult ensemble;            // rows at alpha = k members averaged
  std::vector<std::string> warnings;
};

// Runs the pipeline into <out>/pipeline and writes the mode comparison to
// <out>/compare.
ComparisonResult CompareModes(const HarnessConfig& config, const std::filesystem::path& out);
ComparisonResult CompareModes(const HarnessConfig& config, const PipelineResult& pipeline,
                              const std::filesystem::path& out);

}  // namespace cape

#endif  // CAPE_HARNESS_H_
