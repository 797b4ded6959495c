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

#include "cape/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cape/errors.h"
#include "cape/rng.h"

namespace cape {
namespace {

constexpr int kMaxIntrinsicAttempts = 10;
constexpr int kMaxExtrinsicAttempts = 64;

std::optional<int> ParseIndex(std::string_view digits) {
  if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
  for (char c : digits)
    if (c < '0' || c > '9') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

std::string EntitySurface(int k) { return "E" + std::to_string(k); }
std::string PredicateSurface(int k) { return "P" + std::to_string(k); }

// Draws an entity index outside `excluded`, weighted 1/(k+1)^skew.
std::optional<int> SampleOutOfSource(Rng& rng, int n_entities, double skew,
                                     const std::set<int>& excluded) {
  std::vector<int> candidates;
  std::vector<double> cumulative;
  double total = 0.0;
  for (int k = 0; k < n_entities; ++k) {
    if (excluded.count(k)) continue;
    total += std::pow(static_cast<double>(k + 1), -skew);
    candidates.push_back(k);
    cumulative.push_back(total);
  }
  if (candidates.empty()) return std::nullopt;
  const double u = rng.Uniform() * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return candidates[static_cast<size_t>(it - cumulative.begin())];
}

// Cumulative weights 1/(k+1)^skew over entity index k.
std::vector<double> PopularityTable(int n_entities, double skew) {
  std::vector<double> cumulative(n_entities);
  double total = 0.0;
  for (int k = 0; k < n_entities; ++k) {
    total += std::pow(static_cast<double>(k + 1), -skew);
    cumulative[k] = total;
  }
  return cumulative;
}

int SampleEntity(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.Uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<int>(it - cumulative.begin());
}

bool Contains(const std::vector<Fact>& facts, const Fact& f) {
  return std::find(facts.begin(), facts.end(), f) != facts.end();
}

std::optional<Fact> ExtrinsicVariant(Rng& rng, const CorpusConfig& config, const Fact& original,
                                     const std::set<int>& source_entities,
                                     const std::vector<Fact>& summary_so_far) {
  for (int attempt = 0; attempt < kMaxExtrinsicAttempts; ++attempt) {
    Fact f = original;
    const bool both = rng.Uniform() < config.p_extrinsic_both;
    const bool replace_subject = both || rng.Uniform() < config.extrinsic_subject_share;
    const bool replace_object = both || !replace_subject;
    std::set<int> excluded = source_entities;
    if (replace_subject) {
      auto e = SampleOutOfSource(rng, config.n_entities, config.hallucination_skew, excluded);
      if (!e) return std::nullopt;
      f.subject = *e;
      excluded.insert(*e);
    }
    if (replace_object) {
      excluded.insert(f.subject);
      auto e = SampleOutOfSource(rng, config.n_entities, config.hallucination_skew, excluded);
      if (!e) return std::nullopt;
      f.object = *e;
    }
    if (f.subject != f.object && !Contains(summary_so_far, f)) return f;
  }
  return std::nullopt;
}

std::optional<Fact> IntrinsicVariant(Rng& rng, const Fact& original,
                                     const std::vector<Fact>& source_facts,
                                     const std::vector<Fact>& summary_so_far) {
  std::set<int> source_predicates;
  for (const auto& f : source_facts) source_predicates.insert(f.predicate);
  for (int attempt = 0; attempt < kMaxIntrinsicAttempts; ++attempt) {
    Fact f = original;
    if (rng.Below(2) == 0) {
      std::swap(f.subject, f.object);
    } else {
      std::vector<int> others;
      for (int p : source_predicates)
        if (p != original.predicate) others.push_back(p);
      if (others.empty()) continue;
      f.predicate = others[rng.Below(others.size())];
    }
    if (!Contains(source_facts, f) && !Contains(summary_so_far, f)) return f;
  }
  return std::nullopt;
}

// p_extrinsic scaled by 1 + spread * z, z running linearly from -1 at E0 to
// +1 at the last entity, so the mean over uniformly drawn subjects is
// p_extrinsic.
double ExtrinsicRate(const CorpusConfig& config, int subject) {
  if (config.n_entities < 2 || config.extrinsic_rate_spread == 0.0) return config.p_extrinsic;
  const double z = 2.0 * subject / (config.n_entities - 1) - 1.0;
  return config.p_extrinsic * (1.0 + config.extrinsic_rate_spread * z);
}

void ValidateRange(const IntRange& r, const char* name) {
  if (r.min < 1 || r.max < r.min)
    throw ValidationError(std::string(name) + " must be a nonempty range of positive integers");
}

}  // namespace

std::optional<TokenInfo> ParseSurface(std::string_view token) {
  if (token == "BOS") return TokenInfo{TokenClass::kBos, 0};
  if (token == "EOS") return TokenInfo{TokenClass::kEos, 0};
  if (token == "SEP") return TokenInfo{TokenClass::kSep, 0};
  if (token.size() < 2) return std::nullopt;
  TokenClass cls;
  switch (token[0]) {
    case 'E': cls = TokenClass::kEntity; break;
    case 'P': cls = TokenClass::kPredicate; break;
    case 'F': cls = TokenClass::kFiller; break;
    default: return std::nullopt;
  }
  auto index = ParseIndex(token.substr(1));
  if (!index) return std::nullopt;
  return TokenInfo{cls, *index};
}

bool IsEntityToken(std::string_view token) {
  auto info = ParseSurface(token);
  return info && info->cls == TokenClass::kEntity;
}

Vocabulary::Vocabulary(int entities, int predicates, int fillers)
    : entities_(entities), predicates_(predicates), fillers_(fillers) {
  if (entities < 0 || predicates < 0 || fillers < 0)
    throw ValidationError("vocabulary sizes must be nonnegative");
}

TokenClass Vocabulary::ClassOf(int id) const {
  if (id == kBos) return TokenClass::kBos;
  if (id == kEos) return TokenClass::kEos;
  if (id == kSep) return TokenClass::kSep;
  if (id < 3 + entities_) return TokenClass::kEntity;
  if (id < 3 + entities_ + predicates_) return TokenClass::kPredicate;
  return TokenClass::kFiller;
}

std::optional<int> Vocabulary::Id(std::string_view surface) const {
  auto info = ParseSurface(surface);
  if (!info) return std::nullopt;
  switch (info->cls) {
    case TokenClass::kBos: return kBos;
    case TokenClass::kEos: return kEos;
    case TokenClass::kSep: return kSep;
    case TokenClass::kEntity:
      if (info->index < entities_) return EntityId(info->index);
      break;
    case TokenClass::kPredicate:
      if (info->index < predicates_) return PredicateId(info->index);
      break;
    case TokenClass::kFiller:
      if (info->index < fillers_) return FillerId(info->index);
      break;
  }
  return std::nullopt;
}

std::string Vocabulary::Surface(int id) const {
  switch (ClassOf(id)) {
    case TokenClass::kBos: return "BOS";
    case TokenClass::kEos: return "EOS";
    case TokenClass::kSep: return "SEP";
    case TokenClass::kEntity: return EntitySurface(id - 3);
    case TokenClass::kPredicate: return PredicateSurface(id - 3 - entities_);
    case TokenClass::kFiller: return "F" + std::to_string(id - 3 - entities_ - predicates_);
  }
  return {};
}

Tokens RenderFact(const Fact& fact) {
  return {EntitySurface(fact.subject), PredicateSurface(fact.predicate),
          EntitySurface(fact.object), "SEP"};
}

Tokens RenderFacts(std::span<const Fact> facts) {
  Tokens out;
  out.reserve(facts.size() * 4);
  for (const auto& f : facts) {
    auto t = RenderFact(f);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

ParsedFacts ParseFacts(std::span<const std::string> tokens) {
  ParsedFacts result;
  std::vector<std::optional<TokenInfo>> span;
  auto flush = [&] {
    if (span.empty()) return;
    const bool well_formed = span.size() == 3 && span[0] && span[0]->cls == TokenClass::kEntity &&
                             span[1] && span[1]->cls == TokenClass::kPredicate && span[2] &&
                             span[2]->cls == TokenClass::kEntity &&
                             span[0]->index != span[2]->index;
    if (well_formed) {
      result.facts.insert(Fact{span[0]->index, span[1]->index, span[2]->index});
    } else {
      ++result.unparseable_spans;
    }
    span.clear();
  };
  for (const auto& tok : tokens) {
    if (tok == "EOS") break;
    if (tok == "SEP") {
      flush();
      continue;
    }
    span.push_back(ParseSurface(tok));
  }
  flush();
  return result;
}

std::string_view NoiseLabelName(NoiseLabel label) {
  switch (label) {
    case NoiseLabel::kClean: return "clean";
    case NoiseLabel::kExtrinsicEntity: return "extrinsic_entity";
    case NoiseLabel::kIntrinsicSwap: return "intrinsic_swap";
  }
  return "clean";
}

NoiseLabel ParseNoiseLabel(std::string_view name) {
  if (name == "clean") return NoiseLabel::kClean;
  if (name == "extrinsic_entity") return NoiseLabel::kExtrinsicEntity;
  if (name == "intrinsic_swap") return NoiseLabel::kIntrinsicSwap;
  throw ValidationError("unknown noise label '" + std::string(name) + "'");
}

void CorpusConfig::Validate() const {
  if (n_examples < 1) throw ValidationError("n_examples must be positive");
  ValidateRange(facts_per_doc, "facts_per_doc");
  ValidateRange(facts_per_summary, "facts_per_summary");
  if (facts_per_summary.max > facts_per_doc.min)
    throw ValidationError("facts_per_summary.max must not exceed facts_per_doc.min");
  auto is_prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!is_prob(p_extrinsic) || !is_prob(p_intrinsic) || !is_prob(extrinsic_rate_spread) ||
      p_extrinsic * (1.0 + extrinsic_rate_spread) + p_intrinsic > 1.0)
    throw ValidationError("noise probabilities must lie in [0,1] and sum to at most 1");
  if (!is_prob(p_extrinsic_both) || !is_prob(extrinsic_subject_share))
    throw ValidationError("p_extrinsic_both and extrinsic_subject_share must lie in [0,1]");
  if (!std::isfinite(hallucination_skew) || hallucination_skew < 0.0)
    throw ValidationError("hallucination_skew must be finite and nonnegative");
  if (!std::isfinite(entity_popularity_skew) || entity_popularity_skew < 0.0)
    throw ValidationError("entity_popularity_skew must be finite and nonnegative");
  if (n_predicates < 1) throw ValidationError("n_predicates must be positive");
  if (n_fillers < 0) throw ValidationError("n_fillers must be nonnegative");
  // Room for every source entity plus two out-of-source replacements.
  if (n_entities < 2 * facts_per_doc.max + 2)
    throw ValidationError("n_entities must be at least 2 * facts_per_doc.max + 2");
  if (distinct_roles && n_predicates < facts_per_doc.max)
    throw ValidationError("distinct_roles needs n_predicates >= facts_per_doc.max");
}

CorpusConfig CorpusConfigFromJson(const nlohmann::json& j) {
  CorpusConfig c;
  try {
    c.n_examples = j.value("n_examples", c.n_examples);
    if (j.contains("facts_per_doc")) {
      c.facts_per_doc = {j["facts_per_doc"].at(0).get<int>(), j["facts_per_doc"].at(1).get<int>()};
    }
    if (j.contains("facts_per_summary")) {
      c.facts_per_summary = {j["facts_per_summary"].at(0).get<int>(),
                             j["facts_per_summary"].at(1).get<int>()};
    }
    c.p_extrinsic = j.value("p_extrinsic", c.p_extrinsic);
    c.p_intrinsic = j.value("p_intrinsic", c.p_intrinsic);
    c.p_extrinsic_both = j.value("p_extrinsic_both", c.p_extrinsic_both);
    c.extrinsic_subject_share = j.value("extrinsic_subject_share", c.extrinsic_subject_share);
    c.hallucination_skew = j.value("hallucination_skew", c.hallucination_skew);
    c.entity_popularity_skew = j.value("entity_popularity_skew", c.entity_popularity_skew);
    c.extrinsic_rate_spread = j.value("extrinsic_rate_spread", c.extrinsic_rate_spread);
    c.distinct_roles = j.value("distinct_roles", c.distinct_roles);
    c.seed = j.value("seed", c.seed);
    if (j.contains("vocabulary")) {
      const auto& v = j["vocabulary"];
      c.n_entities = v.value("entities", c.n_entities);
      c.n_predicates = v.value("predicates", c.n_predicates);
      c.n_fillers = v.value("fillers", c.n_fillers);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad corpus config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::json CorpusConfigToJson(const CorpusConfig& c) {
  return {
      {"n_examples", c.n_examples},
      {"facts_per_doc", {c.facts_per_doc.min, c.facts_per_doc.max}},
      {"facts_per_summary", {c.facts_per_summary.min, c.facts_per_summary.max}},
      {"p_extrinsic", c.p_extrinsic},
      {"p_intrinsic", c.p_intrinsic},
      {"p_extrinsic_both", c.p_extrinsic_both},
      {"extrinsic_subject_share", c.extrinsic_subject_share},
      {"hallucination_skew", c.hallucination_skew},
      {"entity_popularity_skew", c.entity_popularity_skew},
      {"extrinsic_rate_spread", c.extrinsic_rate_spread},
      {"distinct_roles", c.distinct_roles},
      {"seed", c.seed},
      {"vocabulary",
       {{"entities", c.n_entities}, {"predicates", c.n_predicates}, {"fillers", c.n_fillers}}},
  };
}

std::vector<Example> Corpus::All() const {
  std::vector<Example> all = train;
  all.insert(all.end(), valid.begin(), valid.end());
  all.insert(all.end(), test.begin(), test.end());
  return all;
}

Example GenerateExample(const CorpusConfig& config, uint64_t index) {
  Rng rng = MakeRng(config.seed, Stream::kCorpusExample, index);
  Example ex;
  std::ostringstream id;
  id << "ex" << std::setw(6) << std::setfill('0') << index;
  ex.id = id.str();

  const std::vector<double> popularity = PopularityTable(config.n_entities, config.entity_popularity_skew);
  const int n_doc = static_cast<int>(rng.Between(config.facts_per_doc.min, config.facts_per_doc.max));
  while (static_cast<int>(ex.source_facts.size()) < n_doc) {
    Fact f;
    f.subject = SampleEntity(rng, popularity);
    f.predicate = static_cast<int>(rng.Below(config.n_predicates));
    f.object = SampleEntity(rng, popularity);
    if (f.subject == f.object || Contains(ex.source_facts, f)) continue;
    if (config.distinct_roles &&
        std::any_of(ex.source_facts.begin(), ex.source_facts.end(), [&](const Fact& g) {
          return g.subject == f.subject || g.predicate == f.predicate;
        }))
      continue;
    ex.source_facts.push_back(f);
  }
  std::set<int> source_entities;
  for (const auto& f : ex.source_facts) {
    source_entities.insert(f.subject);
    source_entities.insert(f.object);
  }

  const int n_sum = static_cast<int>(rng.Between(config.facts_per_summary.min,
                                                 std::min(config.facts_per_summary.max, n_doc)));
  std::vector<int> order(n_doc);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < n_sum; ++i) {
    const int j = i + static_cast<int>(rng.Below(n_doc - i));
    std::swap(order[i], order[j]);
  }
  std::vector<int> chosen(order.begin(), order.begin() + n_sum);
  std::sort(chosen.begin(), chosen.end());

  for (int idx : chosen) {
    const Fact& original = ex.source_facts[idx];
    const double u = rng.Uniform();
    const double p_ext = ExtrinsicRate(config, original.subject);
    std::optional<Fact> noisy;
    NoiseLabel label = NoiseLabel::kClean;
    if (u < p_ext) {
      label = NoiseLabel::kExtrinsicEntity;
    } else if (u < p_ext + config.p_intrinsic) {
      label = NoiseLabel::kIntrinsicSwap;
      noisy = IntrinsicVariant(rng, original, ex.source_facts, ex.summary_facts);
      if (!noisy) label = NoiseLabel::kExtrinsicEntity;
    }
    if (label == NoiseLabel::kExtrinsicEntity) {
      noisy = ExtrinsicVariant(rng, config, original, source_entities, ex.summary_facts);
      if (!noisy) throw ValidationError("cannot place an out-of-source entity; enlarge n_entities");
    }
    ex.summary_facts.push_back(label == NoiseLabel::kClean ? original : *noisy);
    ex.noise_labels.push_back(label);
  }

  ex.source_tokens = RenderFacts(ex.source_facts);
  ex.summary_tokens = RenderFacts(ex.summary_facts);
  return ex;
}

Corpus GenerateCorpus(const CorpusConfig& config) {
  config.Validate();
  Corpus corpus;
  const uint64_t n = static_cast<uint64_t>(config.n_examples);
  const uint64_t n_train = n * 8 / 10;
  const uint64_t n_valid = n / 10;
  for (uint64_t i = 0; i < n; ++i) {
    Example ex = GenerateExample(config, i);
    if (i < n_train) {
      corpus.train.push_back(std::move(ex));
    } else if (i < n_train + n_valid) {
      corpus.valid.push_back(std::move(ex));
    } else {
      corpus.test.push_back(std::move(ex));
    }
  }
  return corpus;
}

namespace {

nlohmann::json FactsToJson(const std::vector<Fact>& facts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : facts)
    arr.push_back({EntitySurface(f.subject), PredicateSurface(f.predicate), EntitySurface(f.object)});
  return arr;
}

std::vector<Fact> FactsFromJson(const nlohmann::json& arr) {
  std::vector<Fact> facts;
  for (const auto& triple : arr) {
    if (!triple.is_array() || triple.size() != 3) throw ValidationError("fact must be an [s,p,o] triple");
    auto s = ParseSurface(triple[0].get<std::string>());
    auto p = ParseSurface(triple[1].get<std::string>());
    auto o = ParseSurface(triple[2].get<std::string>());
    if (!s || s->cls != TokenClass::kEntity || !p || p->cls != TokenClass::kPredicate || !o ||
        o->cls != TokenClass::kEntity || s->index == o->index)
      throw ValidationError("malformed fact triple " + triple.dump());
    facts.push_back(Fact{s->index, p->index, o->index});
  }
  return facts;
}

}  // namespace

nlohmann::ordered_json ExampleToJson(const Example& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["source"] = JoinTokens(ex.source_tokens);
  j["summary"] = JoinTokens(ex.summary_tokens);
  if (ex.has_facts) {
    j["source_facts"] = FactsToJson(ex.source_facts);
    j["summary_facts"] = FactsToJson(ex.summary_facts);
    nlohmann::json labels = nlohmann::json::array();
    for (auto l : ex.noise_labels) labels.push_back(std::string(NoiseLabelName(l)));
    j["noise_labels"] = labels;
  }
  return j;
}

Example ExampleFromJson(const nlohmann::json& j) {
  Example ex;
  try {
    ex.id = j.at("id").get<std::string>();
    ex.source_tokens = SplitTokens(j.at("source").get<std::string>());
    ex.summary_tokens = SplitTokens(j.at("summary").get<std::string>());
    ex.has_facts = j.contains("source_facts");
    if (ex.has_facts) {
      ex.source_facts = FactsFromJson(j.at("source_facts"));
      ex.summary_facts = FactsFromJson(j.value("summary_facts", nlohmann::json::array()));
      for (const auto& l : j.value("noise_labels", nlohmann::json::array()))
        ex.noise_labels.push_back(ParseNoiseLabel(l.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad corpus record: ") + e.what());
  }
  return ex;
}

Tokens SplitTokens(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string JoinTokens(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

void WriteJsonl(const std::filesystem::path& path, std::span<const Example> examples) {
  std::string text;
  for (const auto& ex : examples) {
    text += ExampleToJson(ex).dump();
    text += '\n';
  }
  WriteTextFile(path, text);
}

std::vector<Example> ReadJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<Example> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    out.push_back(ExampleFromJson(j));
  }
  return out;
}

void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  WriteJsonl(dir / "corpus.jsonl.train", corpus.train);
  WriteJsonl(dir / "corpus.jsonl.valid", corpus.valid);
  WriteJsonl(dir / "corpus.jsonl.test", corpus.test);
  WriteTextFile(dir / "corpus_config.json", CorpusConfigToJson(config).dump(2) + "\n");
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("'" + path.string() + "' is not valid JSON");
  return j;
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace cape
