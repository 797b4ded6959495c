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

#include "cape/harness.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "cape/errors.h"
#include "cape/report.h"
#include "cape/rng.h"

namespace cape {
namespace {

template <class F>
auto Stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const IoError& e) {
    throw IoError(name + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
}

void MakeDirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void WriteJson(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

std::string MetricTag(SelectionMetric m) { return std::string(SelectionMetricName(m)); }

Checkpoint Named(Checkpoint ckpt, const std::string& name) {
  ckpt.metadata["name"] = name;
  return ckpt;
}

const SweepRow* RowAt(const SweepResult& sweep, double alpha) {
  for (const auto& r : sweep.rows)
    if (std::fabs(r.alpha - alpha) < 1e-9) return &r;
  return nullptr;
}

std::string ModelsCsv(const std::vector<std::pair<std::string, ScoreReport>>& models) {
  std::string out = "model," + AggregateCsvHeader() + "\n";
  for (const auto& [name, report] : models) out += name + "," + AggregateCsvRow(report.macro) + "\n";
  return out;
}

}  // namespace

Pairing ParsePairing(std::string_view name) {
  auto letter = [&](char c) {
    if (c == 'D') return SelectionMetric::kDae;
    if (c == 'P') return SelectionMetric::kEntityPrecision;
    throw ValidationError("unknown pairing '" + std::string(name) + "'; use DD, PP, DP or PD");
  };
  if (name.size() != 2) throw ValidationError("unknown pairing '" + std::string(name) + "'; use DD, PP, DP or PD");
  return Pairing{std::string(name), letter(name[0]), letter(name[1])};
}

HarnessConfig::HarnessConfig() {
  finetune = train;
  finetune.epochs = 1;
  for (const char* p : {"DD", "PP", "DP", "PD"}) pairings.push_back(ParsePairing(p));
}

void HarnessConfig::Validate() const {
  corpus.Validate();
  train.Validate();
  finetune.Validate();
  thresholds.Validate();
  ValidateGrid(grid);
  if (pairings.empty()) throw ValidationError("at least one pairing is required");
  std::set<std::string> names;
  for (const auto& p : pairings)
    if (!names.insert(p.name).second) throw ValidationError("duplicate pairing '" + p.name + "'");
  if (!names.count(compare_pairing))
    throw ValidationError("compare_pairing '" + compare_pairing + "' is not among the pairings");
  if (!(constraint_drop >= 0.0 && constraint_drop <= 1.0))
    throw ValidationError("constraint_drop must lie in [0, 1]");
  if (ensemble.subsets < 1) throw ValidationError("ensemble.subsets must be at least 1");
  if (!(ensemble.fraction > 0.0 && ensemble.fraction <= 1.0))
    throw ValidationError("ensemble.fraction must lie in (0, 1]");
  if (decode.max_len < 1 || decode.beam < 1) throw ValidationError("decode max_len and beam must be positive");
}

HarnessConfig HarnessConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("harness config must be a JSON object");
  HarnessConfig c;
  try {
    if (j.contains("corpus")) c.corpus = CorpusConfigFromJson(j["corpus"]);
    if (j.contains("train")) c.train = TrainConfigFromJson(j["train"]);
    TrainConfig ft = c.train;
    ft.epochs = 1;
    c.finetune = j.contains("finetune") ? TrainConfigFromJson(j["finetune"], ft) : ft;
    if (j.contains("thresholds")) c.thresholds = ThresholdsFromJson(j["thresholds"]);
    if (j.contains("pairings")) {
      c.pairings.clear();
      for (const auto& p : j["pairings"]) c.pairings.push_back(ParsePairing(p.get<std::string>()));
    }
    c.compare_pairing = j.value("compare_pairing", c.compare_pairing);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.is_string()) {
        c.grid = ParseGrid(g.get<std::string>());
      } else {
        c.grid = g.get<std::vector<double>>();
      }
    }
    if (j.contains("decode")) {
      const auto& d = j["decode"];
      if (d.is_string()) {
        c.decode = ParseDecodeStrategy(d.get<std::string>(), c.decode);
      } else {
        c.decode.max_len = d.value("max_len", c.decode.max_len);
        c.decode.grammar = d.value("grammar", c.decode.grammar);
        if (d.contains("strategy")) c.decode = ParseDecodeStrategy(d["strategy"].get<std::string>(), c.decode);
      }
    }
    c.constraint_drop = j.value("constraint_drop", c.constraint_drop);
    if (j.contains("ensemble")) {
      c.ensemble.subsets = j["ensemble"].value("subsets", c.ensemble.subsets);
      c.ensemble.fraction = j["ensemble"].value("fraction", c.ensemble.fraction);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad harness config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::ordered_json HarnessConfigToJson(const HarnessConfig& c) {
  nlohmann::ordered_json j;
  j["corpus"] = CorpusConfigToJson(c.corpus);
  j["train"] = TrainConfigToJson(c.train);
  j["finetune"] = TrainConfigToJson(c.finetune);
  j["thresholds"] = ThresholdsToJson(c.thresholds);
  j["pairings"] = nlohmann::ordered_json::array();
  for (const auto& p : c.pairings) j["pairings"].push_back(p.name);
  j["compare_pairing"] = c.compare_pairing;
  j["grid"] = c.grid;
  j["decode"] = {{"strategy", c.decode.beam == 1 ? std::string("greedy") : "beam:" + std::to_string(c.decode.beam)},
                 {"max_len", c.decode.max_len},
                 {"grammar", c.decode.grammar}};
  j["constraint_drop"] = c.constraint_drop;
  j["ensemble"] = {{"subsets", c.ensemble.subsets}, {"fraction", c.ensemble.fraction}};
  return j;
}

std::vector<double> ParseGrid(std::string_view text) {
  std::vector<double> grid;
  auto number = [&](std::string_view s) {
    const std::string str(s);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (str.empty() || used != str.size()) throw ValidationError("bad grid value '" + str + "'");
    return v;
  };
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const size_t a = text.find(':');
    const size_t b = text.find(':', a + 1);
    const double lo = number(text.substr(0, a));
    const double hi = number(text.substr(a + 1, b - a - 1));
    const double step = number(text.substr(b + 1));
    if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
      throw ValidationError("grid needs lo <= hi and a positive step");
    const double n = std::floor((hi - lo) / step + 1e-9);
    if (n > 100000) throw ValidationError("grid too large");
    for (int i = 0; i <= static_cast<int>(n); ++i) grid.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  } else {
    size_t start = 0;
    while (start <= text.size()) {
      size_t end = text.find(',', start);
      if (end == std::string_view::npos) end = text.size();
      grid.push_back(number(text.substr(start, end - start)));
      start = end + 1;
    }
  }
  ValidateGrid(grid);
  return grid;
}

void ValidateGrid(std::span<const double> grid) {
  if (grid.empty()) throw ValidationError("alpha grid is empty");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || !(grid[i] > 0.0))
      throw ValidationError("grid alphas must be finite and positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("grid alphas must be strictly increasing");
  }
}

ScoreReport EvaluateCheckpoint(const Checkpoint& ckpt, std::span<const Example> examples,
                               const DecodeOptions& decode) {
  const ModelParams params = ModelParams::FromCheckpoint(ckpt);
  return ScoreCorpus(examples, DecodeCorpus(params, examples, decode));
}

SweepResult SweepWith(std::string mode, const MergeAt& merge, const Checkpoint& base,
                      std::span<const double> grid, std::span<const Example> valid,
                      const DecodeOptions& decode) {
  ValidateGrid(grid);
  SweepResult sweep;
  sweep.mode = std::move(mode);
  sweep.rows.push_back({0.0, EvaluateCheckpoint(base, valid, decode).macro});
  for (double alpha : grid) sweep.rows.push_back({alpha, EvaluateCheckpoint(merge(alpha), valid, decode).macro});
  return sweep;
}

SweepResult SweepAlpha(const Checkpoint& base, const Checkpoint& expert, const Checkpoint& anti,
                       std::span<const double> grid, std::span<const Example> valid,
                       const DecodeOptions& decode) {
  CheckCompatible(base, expert);
  CheckCompatible(base, anti);
  return SweepWith(
      "cape", [&](double alpha) { return CapeMerge(base, expert, anti, alpha); }, base, grid, valid, decode);
}

AlphaSelection SelectAlpha(const SweepResult& sweep, double constraint_drop) {
  const SweepRow* base = RowAt(sweep, 0.0);
  if (!base) throw ValidationError("sweep has no base row at alpha 0");
  AlphaSelection sel;
  sel.r1_base = base->agg.r1;
  sel.er_base = base->agg.er_ref;
  sel.r1 = sel.r1_base;
  sel.er = sel.er_base;
  sel.fallback = true;
  const double keep = 1.0 - constraint_drop;
  for (const auto& row : sweep.rows) {
    sel.d_sum_by_alpha.emplace_back(row.alpha, row.agg.d_sum);
    if (&row == base || row.alpha <= 0.0) continue;
    const bool r1_ok = row.agg.r1 >= keep * sel.r1_base;
    const bool er_ok = !sel.er_base || (row.agg.er_ref && *row.agg.er_ref >= keep * *sel.er_base);
    if (r1_ok && er_ok && (sel.fallback || row.alpha > sel.alpha)) {
      sel.alpha = row.alpha;
      sel.fallback = false;
      sel.r1 = row.agg.r1;
      sel.er = row.agg.er_ref;
    }
  }
  return sel;
}

nlohmann::ordered_json AlphaSelectionToJson(const AlphaSelection& s) {
  nlohmann::ordered_json j;
  j["alpha"] = s.alpha;
  j["fallback"] = s.fallback;
  j["R1"] = s.r1;
  j["R1_base"] = s.r1_base;
  j["E-R_ref"] = s.er ? nlohmann::ordered_json(*s.er) : nlohmann::ordered_json(nullptr);
  j["E-R_ref_base"] = s.er_base ? nlohmann::ordered_json(*s.er_base) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json traj = nlohmann::ordered_json::array();
  for (const auto& [alpha, d] : s.d_sum_by_alpha)
    traj.push_back({{"alpha", alpha}, {"D_sum", d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr)}});
  j["D_sum_by_alpha"] = traj;
  return j;
}

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / ".cape.lock") {
  MakeDirs(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw IoError("output directory '" + dir.string() + "' is locked by another run (remove " +
                    path_.string() + " if stale)");
    throw IoError("cannot create lock '" + path_.string() + "': " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

PipelineResult RunPipeline(const HarnessConfig& config, const std::filesystem::path& out) {
  config.Validate();
  OutputLock lock(out);
  PipelineResult result;
  for (const char* sub : {"corpus", "checkpoints", "selection", "reports", "scores"}) MakeDirs(out / sub);
  WriteJson(out / "config.json", HarnessConfigToJson(config));

  const Vocabulary vocab = config.corpus.vocabulary();
  result.corpus = Stage("generate-corpus", [&] {
    Corpus corpus = GenerateCorpus(config.corpus);
    WriteCorpus(out / "corpus", corpus, config.corpus);
    return corpus;
  });
  const Corpus& corpus = result.corpus;

  result.base = Stage("train", [&] {
    TrainResult trained = Train(vocab, corpus.train, config.train);
    for (const auto& w : trained.warnings) result.warnings.push_back("train: " + w);
    Checkpoint ckpt = trained.ToCheckpoint({{"name", "base"}});
    SaveCheckpoint(ckpt, out / "checkpoints" / "base.ckpt");
    return ckpt;
  });
  const ModelParams base_params = ModelParams::FromCheckpoint(result.base);

  const ScoreReport references = Stage("score", [&] {
    ScoreReport r = ScoreReferences(corpus.train);
    WriteJson(out / "scores" / "train_references.json", ScoreReportToJson(r));
    return r;
  });

  std::set<SelectionMetric> metrics;
  for (const auto& p : config.pairings) {
    metrics.insert(p.expert);
    metrics.insert(p.anti);
  }

  Stage("select", [&] {
    for (SelectionMetric m : metrics) {
      SelectionResult sel = Select(references, m, config.thresholds);
      for (const auto& w : sel.warnings) result.warnings.push_back("select " + MetricTag(m) + ": " + w);
      WriteJson(out / "selection" / (MetricTag(m) + ".json"), SelectionResultToJson(sel));
      result.selections.emplace(m, std::move(sel));
    }
  });

  Stage("finetune", [&] {
    for (SelectionMetric m : metrics) {
      const SelectionResult& sel = result.selections.at(m);
      auto tune = [&](const std::set<std::string>& ids, const std::string& role) {
        const std::vector<Example> subset = FilterExamples(corpus.train, ids);
        const std::string name = role + "_" + MetricTag(m);
        if (subset.empty()) {
          result.warnings.push_back(name + ": selection is empty; using the base model" +
                                    (role == "anti" ? " (CaPE reduces to WiSE-FT)" : ""));
          return Named(result.base, name);
        }
        TrainResult tuned = Finetune(base_params, subset, config.finetune);
        for (const auto& w : tuned.warnings) result.warnings.push_back(name + ": " + w);
        return tuned.ToCheckpoint({{"name", name}, {"parent", "base"}});
      };
      Checkpoint expert = tune(sel.clean_ids, "expert");
      Checkpoint anti = tune(sel.noisy_ids, "anti");
      SaveCheckpoint(expert, out / "checkpoints" / ("expert_" + MetricTag(m) + ".ckpt"));
      SaveCheckpoint(anti, out / "checkpoints" / ("anti_" + MetricTag(m) + ".ckpt"));
      result.experts.emplace(m, std::move(expert));
      result.antis.emplace(m, std::move(anti));
    }
  });

  Stage("evaluate", [&] {
    for (const auto& [split, examples] :
         {std::pair<std::string, const std::vector<Example>*>{"valid", &corpus.valid}, {"test", &corpus.test}}) {
      std::vector<std::pair<std::string, ScoreReport>> models;
      models.emplace_back("base", EvaluateCheckpoint(result.base, *examples, config.decode));
      for (SelectionMetric m : metrics) {
        models.emplace_back("expert_" + MetricTag(m), EvaluateCheckpoint(result.experts.at(m), *examples, config.decode));
        models.emplace_back("anti_" + MetricTag(m), EvaluateCheckpoint(result.antis.at(m), *examples, config.decode));
      }
      for (const auto& [name, report] : models)
        WriteJson(out / "scores" / (name + "_" + split + ".json"), ScoreReportToJson(report));
      WriteTextFile(out / "reports" / ("models_" + split + ".csv"), ModelsCsv(models));
    }
  });

  for (const auto& pairing : config.pairings) {
    Stage("pairing " + pairing.name, [&] {
      const std::filesystem::path dir = out / "reports" / pairing.name;
      MakeDirs(dir);
      PairingOutcome o;
      o.pairing = pairing;
      const Checkpoint& expert = result.experts.at(pairing.expert);
      const Checkpoint& anti = result.antis.at(pairing.anti);
      o.sweep = SweepAlpha(result.base, expert, anti, config.grid, corpus.valid, config.decode);
      EmitReport(std::span<const SweepResult>(&o.sweep, 1), dir / "sweep", "CaPE " + pairing.name + " alpha sweep");
      o.selection = SelectAlpha(o.sweep, config.constraint_drop);
      if (o.selection.fallback)
        result.warnings.push_back(pairing.name + ": no alpha met the constraints; using the base model");
      for (size_t i = 2; i < o.sweep.rows.size(); ++i) {
        const auto& prev = o.sweep.rows[i - 1].agg.d_sum;
        const auto& cur = o.sweep.rows[i].agg.d_sum;
        if (prev && cur && *cur < *prev - 0.01) {
          result.warnings.push_back(pairing.name + ": D_sum decreases between alpha " +
                                    std::to_string(o.sweep.rows[i - 1].alpha) + " and " +
                                    std::to_string(o.sweep.rows[i].alpha));
          break;
        }
      }
      WriteJson(dir / "alpha_selection.json", AlphaSelectionToJson(o.selection));
      o.merged = Named(CapeMerge(result.base, expert, anti, o.selection.alpha), "cape_" + pairing.name);
      SaveCheckpoint(o.merged, out / "checkpoints" / ("cape_" + pairing.name + ".ckpt"));
      o.valid = EvaluateCheckpoint(o.merged, corpus.valid, config.decode);
      o.test = EvaluateCheckpoint(o.merged, corpus.test, config.decode);
      WriteJson(dir / "valid_scores.json", ScoreReportToJson(o.valid));
      WriteJson(dir / "test_scores.json", ScoreReportToJson(o.test));
      result.outcomes.push_back(std::move(o));
    });
  }

  nlohmann::ordered_json summary;
  summary["train_size"] = corpus.train.size();
  summary["valid_size"] = corpus.valid.size();
  summary["test_size"] = corpus.test.size();
  for (const auto& [m, sel] : result.selections)
    summary["selection"][MetricTag(m)] = {{"clean", sel.clean_ids.size()}, {"noisy", sel.noisy_ids.size()}};
  for (const auto& o : result.outcomes) {
    summary["pairings"][o.pairing.name] = {{"alpha", o.selection.alpha},
                                           {"fallback", o.selection.fallback},
                                           {"valid", AggregatesToJson(o.valid.macro)},
                                           {"test", AggregatesToJson(o.test.macro)}};
  }
  summary["warnings"] = result.warnings;
  WriteJson(out / "summary.json", summary);
  return result;
}

ComparisonResult CompareModes(const HarnessConfig& config, const std::filesystem::path& out) {
  config.Validate();
  OutputLock lock(out);
  const PipelineResult pipeline = RunPipeline(config, out / "pipeline");
  return CompareModes(config, pipeline, out / "compare");
}

ComparisonResult CompareModes(const HarnessConfig& config, const PipelineResult& pipeline,
                              const std::filesystem::path& out) {
  MakeDirs(out);
  ComparisonResult result;
  auto it = std::find_if(pipeline.outcomes.begin(), pipeline.outcomes.end(),
                         [&](const PairingOutcome& o) { return o.pairing.name == config.compare_pairing; });
  if (it == pipeline.outcomes.end())
    throw ValidationError("pipeline artifacts lack pairing '" + config.compare_pairing + "'");
  const PairingOutcome& outcome = *it;
  const Checkpoint& base = pipeline.base;
  const Checkpoint& expert = pipeline.experts.at(outcome.pairing.expert);
  const Checkpoint& anti = pipeline.antis.at(outcome.pairing.anti);
  const std::vector<Example>& valid = pipeline.corpus.valid;
  const std::vector<Example>& train = pipeline.corpus.train;

  SweepResult cape = outcome.sweep;
  cape.mode = "cape";
  result.modes.push_back(cape);
  result.modes.push_back(Stage("expert-only", [&] {
    return SweepWith(
        "expert_only", [&](double a) { return CapeMerge(base, expert, base, a); }, base, config.grid, valid,
        config.decode);
  }));
  result.modes.push_back(Stage("anti-only", [&] {
    return SweepWith(
        "anti_only", [&](double a) { return CapeMerge(base, base, anti, a); }, base, config.grid, valid,
        config.decode);
  }));
  result.modes.push_back(Stage("fresh-train", [&] {
    const Vocabulary vocab = config.corpus.vocabulary();
    auto fresh = [&](const std::set<std::string>& ids) {
      const std::vector<Example> subset = FilterExamples(train, ids);
      if (subset.empty()) return base;
      return Train(vocab, subset, config.train).ToCheckpoint();
    };
    const Checkpoint fe = fresh(pipeline.selections.at(outcome.pairing.expert).clean_ids);
    const Checkpoint fa = fresh(pipeline.selections.at(outcome.pairing.anti).noisy_ids);
    return SweepWith(
        "fresh_train", [&](double a) { return CapeMerge(base, fe, fa, a); }, base, config.grid, valid,
        config.decode);
  }));

  result.ensemble = Stage("ensemble", [&] {
    const ModelParams base_params = ModelParams::FromCheckpoint(base);
    std::vector<Checkpoint> members{base};
    SweepResult ens;
    ens.mode = "ensemble";
    ens.rows.push_back({1.0, EvaluateCheckpoint(base, valid, config.decode).macro});
    const size_t take = std::max<size_t>(1, static_cast<size_t>(std::llround(config.ensemble.fraction * train.size())));
    for (int k = 0; k < config.ensemble.subsets; ++k) {
      Rng rng = MakeRng(config.corpus.seed, Stream::kEnsembleSubset, static_cast<uint64_t>(k));
      std::vector<size_t> order(train.size());
      std::iota(order.begin(), order.end(), 0);
      for (size_t i = 0; i < std::min(take, order.size()); ++i)
        std::swap(order[i], order[i + rng.Below(order.size() - i)]);
      order.resize(std::min(take, order.size()));
      std::sort(order.begin(), order.end());
      std::vector<Example> subset;
      for (size_t i : order) subset.push_back(train[i]);
      members.push_back(Finetune(base_params, subset, config.finetune).ToCheckpoint({{"parent", "base"}}));
      ens.rows.push_back({static_cast<double>(members.size()),
                          EvaluateCheckpoint(AverageMerge(members), valid, config.decode).macro});
    }
    return ens;
  });

  const SweepRow* cape06 = RowAt(result.modes[0], 0.6);
  const SweepRow* wise06 = RowAt(result.modes[1], 0.6);
  if (cape06 && wise06 && cape06->agg.ep_src && wise06->agg.ep_src && *cape06->agg.ep_src < *wise06->agg.ep_src)
    result.warnings.push_back("cape E-P_src at alpha 0.6 is below expert-only");
  const SweepRow* fresh_best = nullptr;
  for (const auto& r : result.modes[3].rows)
    if (r.alpha > 0 && (!fresh_best || r.agg.r1 > fresh_best->agg.r1)) fresh_best = &r;
  if (cape06 && fresh_best && fresh_best->agg.r1 > cape06->agg.r1)
    result.warnings.push_back("fresh-train experts reach higher R1 than fine-tuned experts");

  std::vector<SweepResult> plotted = result.modes;
  SweepResult flat;
  flat.mode = "ensemble";
  for (const auto& r : cape.rows) flat.rows.push_back({r.alpha, result.ensemble.rows.back().agg});
  plotted.push_back(std::move(flat));
  EmitReport(result.modes, out / "comparison", "Mode comparison (" + config.compare_pairing + ")");
  WriteTextFile(out / "comparison.svg", RenderSweepSvg(plotted, "Mode comparison (" + config.compare_pairing + ")"));

  std::string ens_csv = "k," + AggregateCsvHeader() + "\n";
  for (const auto& r : result.ensemble.rows)
    ens_csv += std::to_string(static_cast<int>(r.alpha)) + "," + AggregateCsvRow(r.agg) + "\n";
  WriteTextFile(out / "ensemble.csv", ens_csv);

  nlohmann::ordered_json summary;
  summary["pairing"] = config.compare_pairing;
  summary["selected_alpha"] = outcome.selection.alpha;
  summary["warnings"] = result.warnings;
  WriteJson(out / "summary.json", summary);
  return result;
}

}  // namespace cape
