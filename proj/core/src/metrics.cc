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

#include "cape/metrics.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "cape/errors.h"

namespace cape {
namespace {

bool IsNaturalEntity(const std::string& tok, const std::set<std::string>& stopwords) {
  if (tok.empty() || stopwords.count(tok)) return false;
  bool has_digit = false;
  bool all_alpha = true;
  for (unsigned char ch : tok) {
    if (std::isdigit(ch)) has_digit = true;
    if (!std::isalpha(ch)) all_alpha = false;
  }
  if (has_digit) return true;
  return all_alpha && std::isupper(static_cast<unsigned char>(tok[0]));
}

Prf MakePrf(double match, double cand_total, double ref_total) {
  Prf out;
  if (cand_total > 0) out.precision = match / cand_total;
  if (ref_total > 0) out.recall = match / ref_total;
  if (out.precision > 0 && out.recall > 0)
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

std::map<std::vector<std::string>, int> NgramCounts(std::span<const std::string> tokens, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

// Counts tokens of `counted` (with multiplicity) that appear in `against`.
std::pair<int, int> OverlapCounts(const EntitySet& counted, const EntitySet& against) {
  std::set<std::string> lookup(against.tokens.begin(), against.tokens.end());
  int hits = 0;
  for (const auto& t : counted.tokens) hits += lookup.count(t) ? 1 : 0;
  return {hits, static_cast<int>(counted.tokens.size())};
}

template <typename Get>
void MeanOf(const std::vector<ExampleScore>& xs, Get get, std::optional<double>& out, int* absent) {
  double sum = 0.0;
  int n = 0;
  int missing = 0;
  for (const auto& x : xs) {
    std::optional<double> v = get(x);
    if (v) {
      sum += *v;
      ++n;
    } else {
      ++missing;
    }
  }
  out = n ? std::optional<double>(sum / n) : std::nullopt;
  if (absent) *absent = missing;
}

std::optional<double> Ratio(long num, long den) {
  return den > 0 ? std::optional<double>(static_cast<double>(num) / den) : std::nullopt;
}

nlohmann::ordered_json OptionalJson(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> OptionalFromJson(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::ordered_json PrfJson(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

Prf PrfFromJson(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

nlohmann::ordered_json AggregatesJson(const Aggregates& a) {
  nlohmann::ordered_json j;
  j["D_arc"] = OptionalJson(a.d_arc);
  j["D_sum"] = OptionalJson(a.d_sum);
  j["E-P_src"] = OptionalJson(a.ep_src);
  j["E-R_ref"] = OptionalJson(a.er_ref);
  j["R1"] = a.r1;
  j["R2"] = a.r2;
  j["RL"] = a.rl;
  j["len"] = a.len;
  return j;
}

ExampleScore ScoreOne(const Example& ex, const Tokens& generated, const EntityOptions& options) {
  ExampleScore s;
  s.id = ex.id;
  const EntitySet gen_entities = ExtractEntities(generated, options);
  const EntitySet src_entities = ExtractEntities(ex.source_tokens, options);
  const EntitySet ref_entities = ExtractEntities(ex.summary_tokens, options);
  std::tie(s.summary_entities_in_source, s.summary_entities) = OverlapCounts(gen_entities, src_entities);
  std::tie(s.reference_entities_recalled, s.reference_entities) = OverlapCounts(ref_entities, gen_entities);
  s.ep_src = Ratio(s.summary_entities_in_source, s.summary_entities);
  s.er_ref = Ratio(s.reference_entities_recalled, s.reference_entities);
  if (ex.has_facts && options.mode == EntityMode::kSynthetic) {
    const ArcCounts arcs = FactArcEntailment(generated, ex.source_facts);
    s.dae_errors = arcs.dae_errors;
    s.arc_total = arcs.arc_total;
    s.d_arc = Ratio(arcs.arc_total - arcs.dae_errors, arcs.arc_total);
  }
  s.rouge1 = RougeN(generated, ex.summary_tokens, 1);
  s.rouge2 = RougeN(generated, ex.summary_tokens, 2);
  s.rougeL = RougeL(generated, ex.summary_tokens);
  s.summary_length = static_cast<int>(generated.size());
  return s;
}

}  // namespace

EntityMode ParseEntityMode(std::string_view name) {
  if (name == "synthetic") return EntityMode::kSynthetic;
  if (name == "natural") return EntityMode::kNatural;
  throw ValidationError("unknown entity mode '" + std::string(name) + "'");
}

std::string_view EntityModeName(EntityMode mode) {
  return mode == EntityMode::kSynthetic ? "synthetic" : "natural";
}

const std::set<std::string>& DefaultStopwords() {
  static const std::set<std::string> kStopwords = {
      "A",    "An",  "And", "As",   "At",   "But",  "By",   "For",  "He",   "Her",
      "His",  "I",   "If",  "In",   "It",   "Its",  "Mr",   "Mrs",  "Ms",   "Of",
      "On",   "Or",  "She", "That", "The",  "Their", "There", "These", "They", "This",
      "Those", "To", "We",  "What", "When", "Where", "Which", "While", "Who", "With",
  };
  return kStopwords;
}

EntitySet ExtractEntities(std::span<const std::string> tokens, const EntityOptions& options) {
  EntitySet out;
  out.mode = options.mode;
  for (const auto& tok : tokens) {
    const bool is_entity = options.mode == EntityMode::kSynthetic ? IsEntityToken(tok)
                                                                  : IsNaturalEntity(tok, options.stopwords);
    if (is_entity) out.tokens.push_back(tok);
  }
  return out;
}

std::optional<double> EntityPrecisionSrc(std::span<const std::string> summary,
                                         std::span<const std::string> source,
                                         const EntityOptions& options) {
  auto [hits, total] = OverlapCounts(ExtractEntities(summary, options), ExtractEntities(source, options));
  return Ratio(hits, total);
}

std::optional<double> EntityRecallRef(std::span<const std::string> generated,
                                      std::span<const std::string> reference,
                                      const EntityOptions& options) {
  auto [hits, total] =
      OverlapCounts(ExtractEntities(reference, options), ExtractEntities(generated, options));
  return Ratio(hits, total);
}

ArcCounts FactArcEntailment(std::span<const std::string> summary, std::span<const Fact> source_facts) {
  const ParsedFacts parsed = ParseFacts(summary);
  const std::set<Fact> source(source_facts.begin(), source_facts.end());
  ArcCounts out;
  out.arc_total = static_cast<int>(parsed.facts.size()) + parsed.unparseable_spans;
  out.dae_errors = parsed.unparseable_spans;
  for (const auto& f : parsed.facts)
    if (!source.count(f)) ++out.dae_errors;
  return out;
}

Prf RougeN(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
  if (n < 1) throw ValidationError("ROUGE-N needs n >= 1");
  const auto cand = NgramCounts(candidate, n);
  const auto ref = NgramCounts(reference, n);
  long match = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) match += std::min(count, it->second);
  }
  const long cand_total = std::max<long>(0, static_cast<long>(candidate.size()) - n + 1);
  const long ref_total = std::max<long>(0, static_cast<long>(reference.size()) - n + 1);
  return MakePrf(static_cast<double>(match), static_cast<double>(cand_total),
                 static_cast<double>(ref_total));
}

Prf RougeL(std::span<const std::string> candidate, std::span<const std::string> reference) {
  const size_t m = candidate.size();
  const size_t n = reference.size();
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return MakePrf(static_cast<double>(prev[n]), static_cast<double>(m), static_cast<double>(n));
}

void Aggregate(ScoreReport& report) {
  const auto& xs = report.examples;
  Aggregates& macro = report.macro;
  MeanOf(xs, [](const ExampleScore& s) { return s.d_arc; }, macro.d_arc, &report.absent_d_arc);
  MeanOf(xs, [](const ExampleScore& s) { return s.ep_src; }, macro.ep_src, &report.absent_ep_src);
  MeanOf(xs, [](const ExampleScore& s) { return s.er_ref; }, macro.er_ref, &report.absent_er_ref);

  const bool arcs_scored = report.mode == EntityMode::kSynthetic &&
                           std::any_of(xs.begin(), xs.end(), [](const ExampleScore& s) { return s.arc_total > 0; });
  double r1 = 0, r2 = 0, rl = 0, len = 0;
  long clean = 0, arc_total = 0, arc_err = 0, ent = 0, ent_src = 0, ref = 0, ref_hit = 0;
  for (const auto& s : xs) {
    r1 += s.rouge1.f1;
    r2 += s.rouge2.f1;
    rl += s.rougeL.f1;
    len += s.summary_length;
    clean += s.dae_errors == 0 ? 1 : 0;
    arc_total += s.arc_total;
    arc_err += s.dae_errors;
    ent += s.summary_entities;
    ent_src += s.summary_entities_in_source;
    ref += s.reference_entities;
    ref_hit += s.reference_entities_recalled;
  }
  const double n = static_cast<double>(xs.size());
  macro.r1 = xs.empty() ? 0.0 : r1 / n;
  macro.r2 = xs.empty() ? 0.0 : r2 / n;
  macro.rl = xs.empty() ? 0.0 : rl / n;
  macro.len = xs.empty() ? 0.0 : len / n;
  macro.d_sum = arcs_scored ? Ratio(clean, static_cast<long>(xs.size())) : std::nullopt;

  Aggregates& micro = report.micro;
  micro = macro;
  micro.d_arc = Ratio(arc_total - arc_err, arc_total);
  micro.ep_src = Ratio(ent_src, ent);
  micro.er_ref = Ratio(ref_hit, ref);
}

ScoreReport ScoreCorpus(std::span<const Example> examples, std::span<const GeneratedSummary> generated,
                        const EntityOptions& options) {
  if (examples.size() != generated.size())
    throw ValidationError("generated summaries do not cover the corpus (" +
                          std::to_string(generated.size()) + " vs " + std::to_string(examples.size()) + ")");
  ScoreReport report;
  report.mode = options.mode;
  report.examples.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].id != generated[i].id)
      throw ValidationError("id mismatch at position " + std::to_string(i) + ": '" + examples[i].id +
                            "' vs '" + generated[i].id + "'");
    report.examples.push_back(ScoreOne(examples[i], generated[i].tokens, options));
  }
  Aggregate(report);
  return report;
}

ScoreReport ScoreReferences(std::span<const Example> examples, const EntityOptions& options) {
  std::vector<GeneratedSummary> refs;
  refs.reserve(examples.size());
  for (const auto& ex : examples) refs.push_back({ex.id, ex.summary_tokens});
  return ScoreCorpus(examples, refs, options);
}

nlohmann::ordered_json AggregatesToJson(const Aggregates& agg) { return AggregatesJson(agg); }

nlohmann::ordered_json ScoreReportToJson(const ScoreReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(EntityModeName(report.mode));
  j["primary_average"] = "macro";
  j["count"] = report.examples.size();
  j["aggregates"] = AggregatesJson(report.macro);
  j["micro"] = AggregatesJson(report.micro);
  j["absent"] = {{"E-P_src", report.absent_ep_src},
                 {"E-R_ref", report.absent_er_ref},
                 {"D_arc", report.absent_d_arc}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : report.examples) {
    nlohmann::ordered_json r;
    r["id"] = s.id;
    r["ep_src"] = OptionalJson(s.ep_src);
    r["er_ref"] = OptionalJson(s.er_ref);
    r["dae_errors"] = s.dae_errors;
    r["arc_total"] = s.arc_total;
    r["d_arc"] = OptionalJson(s.d_arc);
    r["rouge1"] = PrfJson(s.rouge1);
    r["rouge2"] = PrfJson(s.rouge2);
    r["rougeL"] = PrfJson(s.rougeL);
    r["summary_length"] = s.summary_length;
    r["entity_counts"] = {s.summary_entities, s.summary_entities_in_source, s.reference_entities,
                          s.reference_entities_recalled};
    rows.push_back(std::move(r));
  }
  j["examples"] = std::move(rows);
  return j;
}

ScoreReport ScoreReportFromJson(const nlohmann::json& j) {
  ScoreReport report;
  try {
    report.mode = ParseEntityMode(j.value("mode", std::string("synthetic")));
    for (const auto& r : j.at("examples")) {
      ExampleScore s;
      s.id = r.at("id").get<std::string>();
      s.ep_src = OptionalFromJson(r, "ep_src");
      s.er_ref = OptionalFromJson(r, "er_ref");
      s.dae_errors = r.at("dae_errors").get<int>();
      s.arc_total = r.at("arc_total").get<int>();
      s.d_arc = OptionalFromJson(r, "d_arc");
      s.rouge1 = PrfFromJson(r.at("rouge1"));
      s.rouge2 = PrfFromJson(r.at("rouge2"));
      s.rougeL = PrfFromJson(r.at("rougeL"));
      s.summary_length = r.at("summary_length").get<int>();
      if (r.contains("entity_counts")) {
        const auto& c = r["entity_counts"];
        s.summary_entities = c.at(0).get<int>();
        s.summary_entities_in_source = c.at(1).get<int>();
        s.reference_entities = c.at(2).get<int>();
        s.reference_entities_recalled = c.at(3).get<int>();
      }
      report.examples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad score report: ") + e.what());
  }
  Aggregate(report);
  return report;
}

std::string FormatMetric(std::optional<double> value) {
  if (!value) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *value);
  return buf;
}

std::string AggregateCsvHeader() { return "D_arc,D_sum,E-P_src,E-R_ref,R1,R2,RL,len"; }

std::string AggregateCsvRow(const Aggregates& a) {
  return FormatMetric(a.d_arc) + "," + FormatMetric(a.d_sum) + "," + FormatMetric(a.ep_src) + "," +
         FormatMetric(a.er_ref) + "," + FormatMetric(a.r1) + "," + FormatMetric(a.r2) + "," +
         FormatMetric(a.rl) + "," + FormatMetric(a.len);
}

std::vector<GeneratedSummary> ReadSummariesJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<GeneratedSummary> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("summary"))
      throw ValidationError("'" + path.string() + "': summaries must be JSONL records {id, summary}");
    out.push_back({j["id"].get<std::string>(), SplitTokens(j["summary"].get<std::string>())});
  }
  return out;
}

void WriteSummariesJsonl(const std::filesystem::path& path, std::span<const GeneratedSummary> summaries) {
  std::string text;
  for (const auto& s : summaries) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["summary"] = JoinTokens(s.tokens);
    text += j.dump();
    text += '\n';
  }
  WriteTextFile(path, text);
}

}  // namespace cape
