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

#include <benchmark/benchmark.h>

#include <random>

#include "cape/checkpoint.h"
#include "cape/corpus.h"
#include "cape/metrics.h"
#include "cape/model.h"

namespace cape {
namespace {

Checkpoint RandomModel(uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  ModelParams p(Vocabulary(60, 12, 20));
  for (auto* v : {&p.bigram, &p.copy, &p.transition})
    for (double& x : *v) x = n(gen);
  return p.ToCheckpoint();
}

void BM_CapeMerge(benchmark::State& state) {
  const Checkpoint b = RandomModel(1), e = RandomModel(2), a = RandomModel(3);
  for (auto _ : state) benchmark::DoNotOptimize(CapeMerge(b, e, a, 0.6));
}
BENCHMARK(BM_CapeMerge);

void BM_SerializeRoundTrip(benchmark::State& state) {
  const Checkpoint c = RandomModel(4);
  for (auto _ : state) benchmark::DoNotOptimize(DeserializeCheckpoint(SerializeCheckpoint(c)));
}
BENCHMARK(BM_SerializeRoundTrip);

void BM_RougeL(benchmark::State& state) {
  std::mt19937_64 gen(5);
  Tokens a(state.range(0)), b(state.range(0));
  for (auto& t : a) t = "E" + std::to_string(gen() % 20);
  for (auto& t : b) t = "E" + std::to_string(gen() % 20);
  for (auto _ : state) benchmark::DoNotOptimize(RougeL(a, b));
}
BENCHMARK(BM_RougeL)->Arg(16)->Arg(128);

void BM_ScoreReferences(benchmark::State& state) {
  CorpusConfig cfg;
  cfg.n_examples = 1000;
  const std::vector<Example> all = GenerateCorpus(cfg).All();
  for (auto _ : state) benchmark::DoNotOptimize(ScoreReferences(all));
}
BENCHMARK(BM_ScoreReferences)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  CorpusConfig cfg;
  cfg.n_examples = 1000;
  const std::vector<Example> train = GenerateCorpus(cfg).train;
  TrainConfig tc;
  tc.epochs = 1;
  const Vocabulary vocab(60, 12, 20);
  for (auto _ : state) benchmark::DoNotOptimize(Train(vocab, train, tc));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Decode(benchmark::State& state) {
  const ModelParams p = ModelParams::FromCheckpoint(RandomModel(6));
  const Example ex = GenerateExample(CorpusConfig{}, 0);
  DecodeOptions opt;
  opt.beam = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Decode(p, ex.source_tokens, opt));
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(4);

}  // namespace
}  // namespace cape

BENCHMARK_MAIN();
