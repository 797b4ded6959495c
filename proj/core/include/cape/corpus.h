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

#ifndef CAPE_CORPUS_H_
#define CAPE_CORPUS_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cape {

using Tokens = std::vector<std::string>;

enum class TokenClass { kBos, kEos, kSep, kEntity, kPredicate, kFiller };

struct TokenInfo {
  TokenClass cls;
  int index = 0;  // class-local index; 0 for reserved tokens
};

// Parses a class-marked surface form: "BOS", "EOS", "SEP", "E<k>", "P<k>",
// "F<k>" with k a canonical decimal (no sign, no leading zeros). Anything
// else is not a vocabulary token.
std::optional<TokenInfo> ParseSurface(std::string_view token);
bool IsEntityToken(std::string_view token);

// Dense ids: BOS=0, EOS=1, SEP=2, then entities, predicates, fillers.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;

  Vocabulary() = default;
  Vocabulary(int entities, int predicates, int fillers);

  int entities() const { return entities_; }
  int predicates() const { return predicates_; }
  int fillers() const { return fillers_; }
  int size() const { return 3 + entities_ + predicates_ + fillers_; }

  int EntityId(int k) const { return 3 + k; }
  int PredicateId(int k) const { return 3 + entities_ + k; }
  int FillerId(int k) const { return 3 + entities_ + predicates_ + k; }

  TokenClass ClassOf(int id) const;
  std::optional<int> Id(std::string_view surface) const;
  std::string Surface(int id) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  int entities_ = 0;
  int predicates_ = 0;
  int fillers_ = 0;
};

struct Fact {
  int subject = 0;    // entity index
  int predicate = 0;  // predicate index
  int object = 0;     // entity index

  auto operator<=>(const Fact&) const = default;
};

// [subject, predicate, object, SEP]
Tokens RenderFact(const Fact& fact);
Tokens RenderFacts(std::span<const Fact> facts);

struct ParsedFacts {
  std::set<Fact> facts;
  int unparseable_spans = 0;
};

// Splits the sequence at SEP (EOS ends it). Each nonempty span that is exactly
// entity, predicate, entity with distinct entities yields a fact; any other
// nonempty span counts as one unparseable span. Total on any input.
ParsedFacts ParseFacts(std::span<const std::string> tokens);

enum class NoiseLabel { kClean, kExtrinsicEntity, kIntrinsicSwap };
std::string_view NoiseLabelName(NoiseLabel label);
NoiseLabel ParseNoiseLabel(std::string_view name);

struct Example {
  std::string id;
  Tokens source_tokens;
  Tokens summary_tokens;
  std::vector<Fact> source_facts;
  std::vector<Fact> summary_facts;
  std::vector<NoiseLabel> noise_labels;
  // False for natural-text records loaded without fact annotations.
  bool has_facts = true;
};

struct IntRange {
  int min = 0;
  int max = 0;
};

struct CorpusConfig {
  int n_examples = 5000;
  IntRange facts_per_doc{4, 6};
  IntRange facts_per_summary{2, 3};
  double p_extrinsic = 0.25;
  double p_intrinsic = 0.10;
  int n_entities = 60;
  int n_predicates = 12;
  int n_fillers = 20;
  uint64_t seed = 17;
  // Share of extrinsic facts in which both entities are replaced rather than
  // one; when only one is replaced it is the subject with probability
  // extrinsic_subject_share. Replacements are drawn with weight 1/(k+1)^skew
  // over the out-of-source entity index k.
  double p_extrinsic_both = 0.75;
  double extrinsic_subject_share = 1.0;
  double hallucination_skew = 4.0;
  // Source entities are drawn with weight 1/(k+1)^skew; 0 is uniform.
  double entity_popularity_skew = 0.0;
  // Per-subject extrinsic rate is p_extrinsic * (1 + spread * z) with z
  // linear in the subject index over [-1, 1].
  double extrinsic_rate_spread = 0.0;
  // Source facts of one document have pairwise distinct subjects and
  // pairwise distinct predicates.
  bool distinct_roles = true;

  Vocabulary vocabulary() const { return Vocabulary(n_entities, n_predicates, n_fillers); }
  // Throws ValidationError.
  void Validate() const;
};

CorpusConfig CorpusConfigFromJson(const nlohmann::json& j);
nlohmann::json CorpusConfigToJson(const CorpusConfig& config);

struct Corpus {
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;

  std::vector<Example> All() const;
};

// Deterministic in the config. Example i draws only from the stream
// (seed, kCorpusExample, i); splits are 80/10/10 by index.
Corpus GenerateCorpus(const CorpusConfig& config);
Example GenerateExample(const CorpusConfig& config, uint64_t index);

nlohmann::ordered_json ExampleToJson(const Example& ex);
// Fact fields are optional; records without them load with has_facts=false.
Example ExampleFromJson(const nlohmann::json& j);

Tokens SplitTokens(std::string_view text);
std::string JoinTokens(std::span<const std::string> tokens);

void WriteJsonl(const std::filesystem::path& path, std::span<const Example> examples);
std::vector<Example> ReadJsonl(const std::filesystem::path& path);

// Writes <dir>/corpus.jsonl.{train,valid,test} and <dir>/corpus_config.json.
void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusConfig& config);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

}  // namespace cape

#endif  // CAPE_CORPUS_H_
