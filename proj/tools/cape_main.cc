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

// cape: command-line front end for corpus generation, scoring, selection,
// training, merging, decoding, alpha sweeps and the full pipeline.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cape/checkpoint.h"
#include "cape/corpus.h"
#include "cape/errors.h"
#include "cape/harness.h"
#include "cape/metrics.h"
#include "cape/model.h"
#include "cape/report.h"
#include "cape/selection.h"

namespace fs = std::filesystem;
using namespace cape;

namespace {

void MakeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void MakeParent(const fs::path& file) {
  if (file.has_parent_path()) MakeDirs(file.parent_path());
}

void PrintWarnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

HarnessConfig LoadHarnessConfig(const std::string& path) {
  return path.empty() ? HarnessConfig{} : HarnessConfigFromJson(ReadJsonFile(path));
}

// Train configs may carry {"vocabulary": {"entities", "predicates", "fillers"}}.
Vocabulary VocabularyFromJson(const nlohmann::json& j) {
  CorpusConfig defaults;
  if (!j.contains("vocabulary")) return defaults.vocabulary();
  const auto& v = j["vocabulary"];
  try {
    const int e = v.value("entities", defaults.n_entities);
    const int p = v.value("predicates", defaults.n_predicates);
    const int f = v.value("fillers", defaults.n_fillers);
    if (e < 2 || p < 1 || f < 0) throw ValidationError("vocabulary sizes out of range");
    return Vocabulary(e, p, f);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("bad vocabulary: ") + ex.what());
  }
}

void PrintAggregates(const Aggregates& agg) {
  std::cout << AggregateCsvHeader() << "\n" << AggregateCsvRow(agg) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive parameter ensembling toolkit"};
  app.require_subcommand(1);

  std::string config, out, corpus_path, summaries, mode = "synthetic", scores, metric, thresholds;
  std::string init, strategy = "greedy", base, expert, anti, model, grid = "0.2:1.0:0.2";
  std::vector<std::string> inputs;
  double alpha = 1.0, constraint_drop = 0.01;
  int max_len = DecodeOptions{}.max_len;

  auto* gen = app.add_subcommand("generate-corpus", "Generate a synthetic corpus");
  gen->add_option("--config", config, "corpus config JSON")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();

  auto* score = app.add_subcommand("score", "Score summaries against a corpus");
  score->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  score->add_option("--summaries", summaries, "summaries JSONL (default: the reference summaries)");
  score->add_option("--mode", mode, "entity mode")->check(CLI::IsMember({"synthetic", "natural"}));
  score->add_option("--out", out, "score report JSON")->required();

  auto* select = app.add_subcommand("select", "Split a corpus into clean and noisy subsets");
  select->add_option("--scores", scores, "score report JSON")->required();
  select->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  select->add_option("--metric", metric, "selection metric")->required()->check(CLI::IsMember({"ep", "dae"}));
  select->add_option("--thresholds", thresholds, "thresholds JSON");
  select->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model from scratch");
  train->add_option("--corpus", corpus_path, "training corpus JSONL")->required();
  train->add_option("--config", config, "train config JSON");
  train->add_option("--out", out, "output checkpoint")->required();

  auto* finetune = app.add_subcommand("finetune", "Continue training from a checkpoint");
  finetune->add_option("--init", init, "initial checkpoint")->required();
  finetune->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  finetune->add_option("--config", config, "train config JSON (default: one epoch)");
  finetune->add_option("--out", out, "output checkpoint")->required();

  auto* merge = app.add_subcommand("merge", "Merge checkpoints");
  merge->add_option("--strategy", strategy, "merge strategy")
      ->required()
      ->check(CLI::IsMember({"cape", "wiseft", "average"}));
  merge->add_option("--base", base, "base checkpoint");
  merge->add_option("--expert", expert, "expert checkpoint");
  merge->add_option("--anti", anti, "anti-expert checkpoint");
  merge->add_option("--alpha", alpha, "mixing coefficient");
  merge->add_option("--inputs", inputs, "checkpoints to average");
  merge->add_option("--out", out, "output checkpoint")->required();

  auto* decode = app.add_subcommand("decode", "Decode summaries for a corpus");
  decode->add_option("--model", model, "checkpoint")->required();
  decode->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  decode->add_option("--strategy", strategy, "greedy or beam:K");
  decode->add_option("--max-len", max_len, "maximum summary length");
  decode->add_option("--out", out, "summaries JSONL")->required();

  auto* sweep = app.add_subcommand("sweep", "Sweep the CaPE mixing coefficient");
  sweep->add_option("--base", base, "base checkpoint")->required();
  sweep->add_option("--expert", expert, "expert checkpoint")->required();
  sweep->add_option("--anti", anti, "anti-expert checkpoint")->required();
  sweep->add_option("--grid", grid, "lo:hi:step or a comma list");
  sweep->add_option("--corpus", corpus_path, "validation corpus JSONL")->required();
  sweep->add_option("--strategy", strategy, "greedy or beam:K");
  sweep->add_option("--constraint-drop", constraint_drop, "allowed relative drop in R1 and E-R_ref");
  sweep->add_option("--out", out, "output directory")->required();

  auto* compare = app.add_subcommand("compare", "Run the pipeline and compare merge modes");
  compare->add_option("--config", config, "harness config JSON");
  compare->add_option("--out", out, "output directory")->required();

  auto* pipeline = app.add_subcommand("pipeline", "Run the full pipeline");
  pipeline->add_option("--config", config, "harness config JSON");
  pipeline->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const CorpusConfig cfg = config.empty() ? CorpusConfig{} : CorpusConfigFromJson(ReadJsonFile(config));
      cfg.Validate();
      const Corpus corpus = GenerateCorpus(cfg);
      WriteCorpus(out, corpus, cfg);
      std::cout << "wrote " << corpus.train.size() << "/" << corpus.valid.size() << "/" << corpus.test.size()
                << " examples to " << out << "\n";
    } else if (*score) {
      const std::vector<Example> examples = ReadJsonl(corpus_path);
      EntityOptions options;
      options.mode = ParseEntityMode(mode);
      const ScoreReport report = summaries.empty()
                                     ? ScoreReferences(examples, options)
                                     : ScoreCorpus(examples, ReadSummariesJsonl(summaries), options);
      MakeParent(out);
      WriteTextFile(out, ScoreReportToJson(report).dump(2) + "\n");
      fs::path csv = out;
      if (csv.extension() == ".json") {
        csv.replace_extension(".csv");
      } else {
        csv += ".csv";
      }
      WriteTextFile(csv, AggregateCsvHeader() + "\n" + AggregateCsvRow(report.macro) + "\n");
      PrintAggregates(report.macro);
    } else if (*select) {
      const ScoreReport report = ScoreReportFromJson(ReadJsonFile(scores));
      const std::vector<Example> examples = ReadJsonl(corpus_path);
      const SelectionThresholds t = thresholds.empty() ? SelectionThresholds{} : ThresholdsFromJson(ReadJsonFile(thresholds));
      const SelectionResult sel = Select(report, ParseSelectionMetric(metric), t);
      MakeDirs(out);
      WriteTextFile(fs::path(out) / "selection.json", SelectionResultToJson(sel).dump(2) + "\n");
      WriteJsonl(fs::path(out) / "clean.jsonl", FilterExamples(examples, sel.clean_ids));
      WriteJsonl(fs::path(out) / "noisy.jsonl", FilterExamples(examples, sel.noisy_ids));
      PrintWarnings(sel.warnings);
      std::cout << "clean " << sel.clean_ids.size() << " noisy " << sel.noisy_ids.size() << "\n";
    } else if (*train) {
      const nlohmann::json j = config.empty() ? nlohmann::json::object() : ReadJsonFile(config);
      const TrainConfig cfg = TrainConfigFromJson(j);
      const TrainResult result = Train(VocabularyFromJson(j), ReadJsonl(corpus_path), cfg);
      PrintWarnings(result.warnings);
      MakeParent(out);
      SaveCheckpoint(result.ToCheckpoint(), out);
      std::cout << "final loss " << result.epoch_loss.back() << "\n";
    } else if (*finetune) {
      TrainConfig defaults;
      defaults.epochs = 1;
      const TrainConfig cfg = config.empty() ? defaults : TrainConfigFromJson(ReadJsonFile(config), defaults);
      const ModelParams params = ModelParams::FromCheckpoint(LoadCheckpoint(init));
      const TrainResult result = Finetune(params, ReadJsonl(corpus_path), cfg);
      PrintWarnings(result.warnings);
      MakeParent(out);
      SaveCheckpoint(result.ToCheckpoint({{"parent", fs::path(init).filename().string()}}), out);
      std::cout << "final loss " << result.epoch_loss.back() << "\n";
    } else if (*merge) {
      Checkpoint merged;
      if (strategy == "average") {
        if (inputs.empty()) throw ValidationError("average merge needs --inputs");
        std::vector<Checkpoint> ckpts;
        for (const auto& p : inputs) ckpts.push_back(LoadCheckpoint(p));
        merged = AverageMerge(ckpts);
      } else {
        if (base.empty() || expert.empty()) throw ValidationError(strategy + " merge needs --base and --expert");
        if (strategy == "cape") {
          if (anti.empty()) throw ValidationError("cape merge needs --anti");
          merged = CapeMerge(LoadCheckpoint(base), LoadCheckpoint(expert), LoadCheckpoint(anti), alpha);
        } else {
          merged = WiseFtMerge(LoadCheckpoint(base), LoadCheckpoint(expert), alpha);
        }
      }
      MakeParent(out);
      SaveCheckpoint(merged, out);
    } else if (*decode) {
      DecodeOptions options;
      options.max_len = max_len;
      options = ParseDecodeStrategy(strategy, options);
      if (options.max_len < 1) throw ValidationError("--max-len must be positive");
      const ModelParams params = ModelParams::FromCheckpoint(LoadCheckpoint(model));
      MakeParent(out);
      WriteSummariesJsonl(out, DecodeCorpus(params, ReadJsonl(corpus_path), options));
    } else if (*sweep) {
      if (!(constraint_drop >= 0.0 && constraint_drop <= 1.0))
        throw ValidationError("--constraint-drop must lie in [0, 1]");
      const std::vector<double> alphas = ParseGrid(grid);
      const DecodeOptions options = ParseDecodeStrategy(strategy);
      const SweepResult result = SweepAlpha(LoadCheckpoint(base), LoadCheckpoint(expert), LoadCheckpoint(anti),
                                            alphas, ReadJsonl(corpus_path), options);
      MakeDirs(out);
      EmitReport(std::span<const SweepResult>(&result, 1), fs::path(out) / "sweep", "CaPE alpha sweep");
      const AlphaSelection sel = SelectAlpha(result, constraint_drop);
      WriteTextFile(fs::path(out) / "alpha_selection.json", AlphaSelectionToJson(sel).dump(2) + "\n");
      if (sel.fallback) PrintWarnings({"no alpha met the constraints; selected the base model"});
      std::cout << SweepCsv(result) << "selected alpha " << sel.alpha << "\n";
    } else if (*compare) {
      const ComparisonResult result = CompareModes(LoadHarnessConfig(config), out);
      PrintWarnings(result.warnings);
      std::cout << ComparisonCsv(result.modes);
    } else if (*pipeline) {
      const PipelineResult result = RunPipeline(LoadHarnessConfig(config), out);
      PrintWarnings(result.warnings);
      for (const auto& o : result.outcomes)
        std::cout << o.pairing.name << " alpha " << o.selection.alpha << (o.selection.fallback ? " (fallback)" : "")
                  << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
