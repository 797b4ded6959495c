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

// Acceptance suite on the pinned configuration. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cape/checkpoint.h"
#include "cape/corpus.h"
#include "cape/errors.h"
#include "cape/harness.h"
#include "cape/metrics.h"
#include "cape/model.h"
#include "cape/rng.h"
#include "cape/selection.h"
#include "test_support.h"

namespace fs = std::filesystem;
using namespace cape;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double Or(std::optional<double> v) { return v.value_or(-1.0); }

const SweepRow* RowAt(const SweepResult& s, double alpha) {
  for (const auto& r : s.rows)
    if (std::abs(r.alpha - alpha) < 1e-9) return &r;
  return nullptr;
}

float MaxAbsDiff(const Checkpoint& a, const Checkpoint& b) {
  float worst = 0.0f;
  for (const auto& [name, t] : a.entries) {
    const Tensor& u = b.entries.at(name);
    for (size_t i = 0; i < t.data.size(); ++i) worst = std::max(worst, std::abs(t.data[i] - u.data[i]));
  }
  return worst;
}

struct Run {
  fs::path root;
  HarnessConfig config;
  PipelineResult pipeline;
  ComparisonResult comparison;
};

Outcome MergeIdentities(const Run& run) {
  const Checkpoint& b = run.pipeline.base;
  const Checkpoint& e = run.pipeline.experts.at(SelectionMetric::kDae);
  const Checkpoint& a = run.pipeline.antis.at(SelectionMetric::kDae);
  Checkpoint zero = CapeMerge(b, e, a, 0.0);
  zero.metadata = b.metadata;
  if (!BitEqual(zero, b)) return {false, "alpha 0 tensors differ from base"};
  float wise = 0.0f;
  for (double alpha : {0.2, 0.6, 1.0, 1.7}) wise = std::max(wise, MaxAbsDiff(CapeMerge(b, e, b, alpha), WiseFtMerge(b, e, alpha)));
  const std::vector<Checkpoint> same{e, e, e};
  const float avg = MaxAbsDiff(AverageMerge(same), e);
  const bool ok = wise <= 1e-6f && avg <= 1e-6f;
  return {ok, Fmt("alpha 0 exact; max |cape(b,e,b)-wiseft| %.2e; max |avg(e,e,e)-e| %.2e", wise, avg)};
}

Outcome CheckpointFormat(const Run&) {
  int round_trips = 0;
  for (uint64_t i = 0; i < 1000; ++i) {
    Rng rng = MakeRng(2026, Stream::kProperty, i);
    const Checkpoint c = test::RandomCheckpoint(rng);
    const std::string bytes = SerializeCheckpoint(c);
    const Checkpoint back = DeserializeCheckpoint(bytes);
    if (BitEqual(c, back) && SerializeCheckpoint(back) == bytes) ++round_trips;
  }
  int malformed = 0, total = 0;
  for (const auto& [bytes, kind] : test::MalformedCases()) {
    ++total;
    if (test::ErrorKindOf(bytes) == kind) ++malformed;
  }
  bool io = false;
  try {
    LoadCheckpoint("/nonexistent/cape/model.ckpt");
  } catch (const IoError&) {
    io = true;
  }
  const bool ok = round_trips == 1000 && malformed == total && io;
  return {ok, Fmt("%d/1000 bit-exact round trips; %d/%d malformed cases raise the expected kind", round_trips,
                  malformed, total)};
}

Outcome GradientCheck(const Run&) {
  std::mt19937_64 gen(31);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) worst = std::max(worst, test::GradientCheckRelativeError(gen));
  return {worst < 1e-4, Fmt("max relative error %.2e over 50 instances", worst)};
}

Outcome MetricOracles(const Run&) {
  std::mt19937_64 gen(4);
  int agree = 0;
  std::string first;
  for (int i = 0; i < 500; ++i) {
    const Tokens cand = test::RandomTokens(gen, 14);
    const Tokens ref = test::RandomTokens(gen, 14);
    const std::vector<Fact> source = test::RandomFacts(gen, 4, 5, 3);
    const std::string diff = test::CompareWithOracles(cand, ref, source, 1e-12);
    if (diff.empty()) {
      ++agree;
    } else if (first.empty()) {
      first = diff;
    }
  }
  return {agree == 500, Fmt("%d/500 instances agree%s%s", agree, first.empty() ? "" : "; first mismatch ",
                            first.c_str())};
}

Outcome SelectionSoundness(const Run& run) {
  const ScoreReport scores = ScoreReferences(run.pipeline.corpus.train);
  std::map<std::string, const ExampleScore*> by_id;
  for (const auto& s : scores.examples) by_id[s.id] = &s;
  std::string detail;
  bool ok = true;
  for (SelectionMetric m : {SelectionMetric::kDae, SelectionMetric::kEntityPrecision}) {
    const SelectionResult& sel = run.pipeline.selections.at(m);
    bool sound = true;
    for (const auto& id : sel.clean_ids) {
      const ExampleScore& s = *by_id.at(id);
      sound &= m == SelectionMetric::kDae ? s.dae_errors == 0 : s.ep_src == 1.0;
    }
    bool disjoint = true;
    for (const auto& id : sel.noisy_ids) disjoint &= sel.clean_ids.count(id) == 0;
    ok &= sound && disjoint && !sel.clean_ids.empty() && !sel.noisy_ids.empty();
    detail += Fmt("%s clean %zu noisy %zu%s; ", std::string(SelectionMetricName(m)).c_str(), sel.clean_ids.size(),
                  sel.noisy_ids.size(), sound && disjoint ? "" : " (unsound)");
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome ExpertAntiOrdering(const Run& run) {
  const auto& valid = run.pipeline.corpus.valid;
  const DecodeOptions& d = run.config.decode;
  const Aggregates base = EvaluateCheckpoint(run.pipeline.base, valid, d).macro;
  const Aggregates expert = EvaluateCheckpoint(run.pipeline.experts.at(SelectionMetric::kDae), valid, d).macro;
  const Aggregates anti = EvaluateCheckpoint(run.pipeline.antis.at(SelectionMetric::kDae), valid, d).macro;
  auto gaps = [](double hi, double mid, double lo) { return hi - mid >= 0.01 && mid - lo >= 0.01; };
  const bool ok = gaps(Or(expert.ep_src), Or(base.ep_src), Or(anti.ep_src)) &&
                  gaps(Or(expert.d_sum), Or(base.d_sum), Or(anti.d_sum));
  return {ok, Fmt("E-P_src expert %.4f base %.4f anti %.4f; D_sum expert %.4f base %.4f anti %.4f",
                  Or(expert.ep_src), Or(base.ep_src), Or(anti.ep_src), Or(expert.d_sum), Or(base.d_sum),
                  Or(anti.d_sum))};
}

const PairingOutcome& Headline(const Run& run) {
  for (const auto& o : run.pipeline.outcomes)
    if (o.pairing.name == run.config.compare_pairing) return o;
  throw ValidationError("headline pairing missing");
}

Outcome CapeAtSelectedAlpha(const Run& run) {
  const PairingOutcome& o = Headline(run);
  const SweepRow* base = RowAt(o.sweep, 0.0);
  const SweepRow* chosen = RowAt(o.sweep, o.selection.alpha);
  if (!base || !chosen) return {false, "sweep rows missing"};
  const Aggregates& b = base->agg;
  const Aggregates& c = chosen->agg;
  const bool ok = o.selection.alpha >= 0.2 && !o.selection.fallback && Or(c.d_sum) > Or(b.d_sum) &&
                  Or(c.ep_src) > Or(b.ep_src) && c.r1 >= 0.99 * b.r1 && Or(c.er_ref) >= 0.99 * Or(b.er_ref);
  return {ok, Fmt("alpha %.2g; D_sum %.4f vs %.4f; E-P_src %.4f vs %.4f; R1 %.4f vs %.4f; E-R_ref %.4f vs %.4f",
                  o.selection.alpha, Or(c.d_sum), Or(b.d_sum), Or(c.ep_src), Or(b.ep_src), c.r1, b.r1,
                  Or(c.er_ref), Or(b.er_ref))};
}

Outcome CapeVersusWiseFt(const Run& run) {
  const SweepResult* cape = nullptr;
  const SweepResult* expert_only = nullptr;
  for (const auto& m : run.comparison.modes) {
    if (m.mode == "cape") cape = &m;
    if (m.mode == "expert_only") expert_only = &m;
  }
  if (!cape || !expert_only) return {false, "comparison modes missing"};
  const SweepRow* c = RowAt(*cape, 0.6);
  const SweepRow* w = RowAt(*expert_only, 0.6);
  if (!c || !w) return {false, "alpha 0.6 not on the grid"};
  return {Or(c->agg.ep_src) >= Or(w->agg.ep_src),
          Fmt("E-P_src at alpha 0.6: cape %.4f expert-only %.4f", Or(c->agg.ep_src), Or(w->agg.ep_src))};
}

Outcome NullNoise(const Run& run) {
  HarnessConfig cfg = run.config;
  cfg.corpus.p_extrinsic = 0.0;
  cfg.corpus.p_intrinsic = 0.0;
  cfg.pairings = {ParsePairing(cfg.compare_pairing)};
  const PipelineResult p = RunPipeline(cfg, run.root / "null_noise");
  const double ep = Or(EvaluateCheckpoint(p.base, p.corpus.valid, cfg.decode).macro.ep_src);
  bool empty = true, warned = true;
  for (const auto& [metric, sel] : p.selections) {
    empty &= sel.noisy_ids.empty();
    warned &= std::find(sel.warnings.begin(), sel.warnings.end(), "noisy selection is empty") != sel.warnings.end();
  }
  return {ep >= 0.98 && empty && warned,
          Fmt("base E-P_src %.4f; noisy sets %s; warning %s", ep, empty ? "empty" : "nonempty",
              warned ? "emitted" : "missing")};
}

Outcome Determinism(const Run& run) {
  CompareModes(run.config, run.root / "compare_b");
  int files = 0;
  std::string differing;
  const fs::path a_root = run.root / "compare_a";
  for (const auto& entry : fs::recursive_directory_iterator(a_root)) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".svg") continue;
    const fs::path rel = fs::relative(entry.path(), a_root);
    ++files;
    if (Slurp(entry.path()) != Slurp(run.root / "compare_b" / rel) && differing.empty()) differing = rel.string();
  }
  return {files > 0 && differing.empty(),
          Fmt("%d CSV/SVG files compared%s%s", files, differing.empty() ? ", all identical" : "; first difference ",
              differing.c_str())};
}

}  // namespace

int main() {
  Run run;
  run.root = fs::temp_directory_path() / "cape_acceptance";
  fs::remove_all(run.root);
  fs::create_directories(run.root);

  const std::vector<std::pair<std::string, std::function<Outcome(const Run&)>>> criteria{
      {"merge identities", MergeIdentities},
      {"checkpoint format", CheckpointFormat},
      {"gradient check", GradientCheck},
      {"metric oracles", MetricOracles},
      {"selection soundness", SelectionSoundness},
      {"expert/anti-expert ordering", ExpertAntiOrdering},
      {"improvement at selected alpha", CapeAtSelectedAlpha},
      {"contrastive merge vs expert-only at alpha 0.6", CapeVersusWiseFt},
      {"null-noise degeneracy", NullNoise},
      {"determinism", Determinism},
  };

  bool setup_ok = true;
  std::string setup_error;
  try {
    run.pipeline = RunPipeline(run.config, run.root / "compare_a" / "pipeline");
    run.comparison = CompareModes(run.config, run.pipeline, run.root / "compare_a" / "compare");
  } catch (const std::exception& e) {
    setup_ok = false;
    setup_error = e.what();
  }

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    if (!setup_ok) {
      out = {false, "pipeline failed: " + setup_error};
    } else {
      try {
        out = criteria[i].second(run);
      } catch (const std::exception& e) {
        out = {false, std::string("error: ") + e.what()};
      }
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(run.root);
  return failures == 0 ? 0 : 1;
}
