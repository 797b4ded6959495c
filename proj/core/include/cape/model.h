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

#ifndef CAPE_MODEL_H_
#define CAPE_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cape/checkpoint.h"
#include "cape/corpus.h"
#include "cape/metrics.h"
#include "json.hpp"

namespace cape {

// Log-linear copy-or-hallucinate summarizer. The next-token logit for u after
// prev is
//
//   W[prev, u] + c[u] * [u in source] + t[u] * [(prev, u) is a source bigram]
//
// where source bigrams are read off BOS followed by the source tokens. W, c
// and t live in a checkpoint as "bigram.logits" [V, V], "copy.weights" [V]
// and "copy.transition" [V].
struct ModelParams {
  static constexpr const char* kBigramName = "bigram.logits";
  static constexpr const char* kCopyName = "copy.weights";
  static constexpr const char* kTransitionName = "copy.transition";

  Vocabulary vocab;
  std::vector<double> bigram;      // V * V, row = prev
  std::vector<double> copy;        // V
  std::vector<double> transition;  // V

  ModelParams() = default;
  explicit ModelParams(const Vocabulary& v);

  int V() const { return vocab.size(); }
  size_t ParameterCount() const { return bigram.size() + copy.size() + transition.size(); }

  // Missing "copy.transition" loads as zeros.
  static ModelParams FromCheckpoint(const Checkpoint& ckpt);
  // Adds vocab_* metadata on top of `metadata`.
  Checkpoint ToCheckpoint(std::map<std::string, std::string> metadata = {}) const;
};

// Source-side conditioning for one document.
class SourceContext {
 public:
  SourceContext() = default;
  // From a token-id set only (no bigrams).
  SourceContext(int V, std::span<const int> source_set);
  static SourceContext FromSequence(int V, std::span<const int> source_ids);

  bool InSource(int u) const { return in_source_[u] != 0; }
  // Targets u with (prev, u) a source bigram, sorted.
  std::span<const int> Successors(int prev) const;

 private:
  std::vector<uint8_t> in_source_;
  std::vector<std::vector<int>> successors_;
};

std::vector<int> EncodeTokens(const Vocabulary& vocab, std::span<const std::string> tokens);
Tokens DecodeIds(const Vocabulary& vocab, std::span<const int> ids);

// Softmax over the full vocabulary, normalized to 1.
std::vector<double> ProbNext(const ModelParams& params, int prev, const SourceContext& source);

// -sum_t log p(y_t | y_{t-1}, source) over the summary followed by EOS, with
// y_{-1} = BOS.
double SequenceNll(const ModelParams& params, const SourceContext& source,
                   std::span<const int> summary_ids);
double SequenceNll(const ModelParams& params, std::span<const std::string> source_tokens,
                   std::span<const std::string> summary_tokens);

// Adds scale * d(SequenceNll)/d(theta) into `grad` (same layout as params)
// and returns the NLL.
double AccumulateGradient(const ModelParams& params, const SourceContext& source,
                          std::span<const int> summary_ids, double scale, ModelParams& grad);

struct TrainConfig {
  enum class Init { kZeros, kGaussian };

  int epochs = 10;
  double learning_rate = 0.5;
  int batch_size = 32;
  double l2 = 0.0;
  uint64_t seed = 17;
  Init init = Init::kGaussian;
  double init_sigma = 0.01;

  void Validate() const;
};

TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig defaults = {});
nlohmann::ordered_json TrainConfigToJson(const TrainConfig& cfg);

// Document and summary ids ready for training.
struct EncodedExample {
  SourceContext source;
  std::vector<int> summary;
};

std::vector<EncodedExample> EncodeExamples(const Vocabulary& vocab, std::span<const Example> examples);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean objective seen during each epoch
  std::vector<std::string> warnings;
  std::map<std::string, std::string> metadata;  // seed and training config

  // params.ToCheckpoint with `metadata` and then `extra` applied.
  Checkpoint ToCheckpoint(std::map<std::string, std::string> extra = {}) const;
};

ModelParams InitParams(const Vocabulary& vocab, const TrainConfig& cfg);

// Mini-batch SGD on mean SequenceNll + l2 * |theta|^2 / 2 with a seed-fixed
// shuffle per epoch. Throws ValidationError on an empty corpus or a
// non-finite loss.
TrainResult Train(const Vocabulary& vocab, std::span<const Example> corpus, const TrainConfig& cfg);
TrainResult Finetune(const ModelParams& init, std::span<const Example> subset, const TrainConfig& cfg);

// Shared loop; `params` is updated in place.
TrainResult RunSgd(ModelParams params, std::span<const EncodedExample> data, const TrainConfig& cfg);

struct DecodeOptions {
  int max_len = 16;
  int beam = 1;  // 1 == greedy
  // Restrict each step to the token classes the fact grammar allows:
  // entity|EOS, predicate, entity, SEP, repeating.
  bool grammar = true;
};

DecodeOptions ParseDecodeStrategy(std::string_view strategy, DecodeOptions base = {});

// BOS is never emitted; EOS ends decoding and is not returned. Beam search
// ranks by log-probability divided by length (EOS counted) and breaks ties
// toward the lexicographically smaller id sequence.
std::vector<int> DecodeIdsFrom(const ModelParams& params, const SourceContext& source,
                               const DecodeOptions& options);
Tokens Decode(const ModelParams& params, std::span<const std::string> source_tokens,
              const DecodeOptions& options);

std::vector<GeneratedSummary> DecodeCorpus(const ModelParams& params, std::span<const Example> examples,
                                           const DecodeOptions& options);

double MeanNll(const ModelParams& params, std::span<const Example> examples);

}  // namespace cape

#endif  // CAPE_MODEL_H_
