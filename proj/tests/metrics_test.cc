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

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "cape/errors.h"
#include "test_support.h"

namespace cape {
namespace {

Tokens T(std::string_view text) { return SplitTokens(text); }

using test::RandomTokens;

constexpr double kTol = 1e-12;

TEST(MetricOracleTest, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const Tokens cand = RandomTokens(gen, 14);
    const Tokens ref = RandomTokens(gen, 14);
    const std::vector<Fact> source = test::RandomFacts(gen, 4, 5, 3);
    ASSERT_EQ(test::CompareWithOracles(cand, ref, source, kTol), "") << JoinTokens(cand) << " | " << JoinTokens(ref);
  }
}

TEST(MetricOracleTest, FactShapedSummariesAgree) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Fact> source, summary;
    for (int k = 0; k < 5; ++k) {
      Fact f{static_cast<int>(gen() % 6), static_cast<int>(gen() % 3), static_cast<int>(gen() % 6)};
      if (f.subject != f.object) source.push_back(f);
      Fact g{static_cast<int>(gen() % 6), static_cast<int>(gen() % 3), static_cast<int>(gen() % 6)};
      if (g.subject != g.object && k < 3) summary.push_back(g);
    }
    Tokens s = RenderFacts(summary);
    if (gen() % 3 == 0 && !s.empty()) s.pop_back();
    if (gen() % 4 == 0 && !s.empty()) s.erase(s.begin());
    const ArcCounts a = FactArcEntailment(s, source);
    const ArcCounts b = test::OracleArcs(s, source);
    ASSERT_EQ(a.arc_total, b.arc_total);
    ASSERT_EQ(a.dae_errors, b.dae_errors);
  }
}

TEST(EntityTest, Extraction) {
  EXPECT_EQ(ExtractEntities(T("E1 P0 E2 SEP")).tokens, T("E1 E2"));
  EXPECT_TRUE(ExtractEntities(Tokens{}).tokens.empty());
  EntityOptions natural{EntityMode::kNatural};
  EXPECT_EQ(ExtractEntities(T("the Paris talks began 1999"), natural).tokens, T("Paris 1999"));
  EXPECT_EQ(ExtractEntities(T("The talks In Rome"), natural).tokens, T("Rome"));
  EXPECT_EQ(ParseEntityMode("natural"), EntityMode::kNatural);
  EXPECT_THROW(ParseEntityMode("other"), ValidationError);
}

TEST(EntityTest, PrecisionAndRecallExamples) {
  EXPECT_EQ(EntityPrecisionSrc(T("E1 P0 E2"), T("E1 P1 E2 SEP")), 1.0);
  EXPECT_EQ(EntityPrecisionSrc(T("E1 P0 E9"), T("E1 E2 E3")), 0.5);
  EXPECT_FALSE(EntityPrecisionSrc(T("P0 SEP"), T("E1")));
  EXPECT_EQ(EntityRecallRef(T("E1 P0 E2"), T("E1 P0 E2")), 1.0);
  EXPECT_NEAR(*EntityRecallRef(T("E1 P0"), T("E1 E2 E3")), 1.0 / 3.0, kTol);
  EXPECT_FALSE(EntityRecallRef(T("E1"), T("P0 SEP")));
  // Multiplicity counts on the numerator side.
  EXPECT_NEAR(*EntityPrecisionSrc(T("E1 E1 E9"), T("E1")), 2.0 / 3.0, kTol);
}

TEST(ArcTest, Examples) {
  const std::vector<Fact> source{{1, 0, 2}, {3, 1, 4}, {5, 2, 6}};
  const ArcCounts subset = FactArcEntailment(RenderFacts(std::vector<Fact>{{1, 0, 2}, {3, 1, 4}}), source);
  EXPECT_EQ(subset.dae_errors, 0);
  EXPECT_EQ(subset.arc_total, 2);
  const ArcCounts one_bad =
      FactArcEntailment(RenderFacts(std::vector<Fact>{{1, 0, 2}, {3, 1, 9}, {5, 2, 6}}), source);
  EXPECT_EQ(one_bad.dae_errors, 1);
  EXPECT_EQ(one_bad.arc_total, 3);
  const ArcCounts empty = FactArcEntailment(Tokens{}, source);
  EXPECT_EQ(empty.arc_total, 0);
  EXPECT_EQ(empty.dae_errors, 0);
}

TEST(RougeTest, Examples) {
  const Prf same = RougeN(T("a b c"), T("a b c"), 2);
  EXPECT_EQ(same.f1, 1.0);
  const Prf r1 = RougeN(T("a b c"), T("a c d"), 1);
  EXPECT_NEAR(r1.precision, 2.0 / 3.0, kTol);
  EXPECT_NEAR(r1.recall, 2.0 / 3.0, kTol);
  EXPECT_NEAR(r1.f1, 2.0 / 3.0, kTol);
  const Prf short_cand = RougeN(T("a"), T("a b"), 2);
  EXPECT_EQ(short_cand.precision, 0.0);
  EXPECT_EQ(short_cand.f1, 0.0);
  const Prf lcs = RougeL(T("a x b"), T("a b c"));
  EXPECT_NEAR(lcs.f1, 2.0 / 3.0, kTol);
  EXPECT_EQ(RougeL(T("a b"), T("c d")).f1, 0.0);
  EXPECT_EQ(RougeL(Tokens{}, Tokens{}).f1, 0.0);
  EXPECT_THROW(RougeN(T("a"), T("a"), 0), ValidationError);
}

TEST(RougeTest, SwapExchangesPrecisionAndRecall) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 300; ++trial) {
    const Tokens a = RandomTokens(gen, 10), b = RandomTokens(gen, 10);
    for (int n : {1, 2}) {
      const Prf ab = RougeN(a, b, n), ba = RougeN(b, a, n);
      ASSERT_EQ(ab.precision, ba.recall);
      ASSERT_EQ(ab.recall, ba.precision);
      ASSERT_EQ(ab.f1, ba.f1);
    }
    const Prf ab = RougeL(a, b), ba = RougeL(b, a);
    ASSERT_EQ(ab.precision, ba.recall);
  }
}

TEST(ScoreCorpusTest, ReferencesOnNoisyCorpus) {
  CorpusConfig cfg;
  cfg.n_examples = 400;
  cfg.p_extrinsic = 0.3;
  const Corpus corpus = GenerateCorpus(cfg);
  const std::vector<Example> all = corpus.All();
  const ScoreReport r = ScoreReferences(all);
  long fully_clean = 0;
  for (const Example& ex : all)
    fully_clean += std::all_of(ex.noise_labels.begin(), ex.noise_labels.end(),
                               [](NoiseLabel l) { return l == NoiseLabel::kClean; });
  EXPECT_NEAR(*r.macro.d_sum, static_cast<double>(fully_clean) / all.size(), kTol);
  EXPECT_EQ(r.macro.r1, 1.0);
  EXPECT_EQ(r.macro.rl, 1.0);
  EXPECT_LT(*r.macro.ep_src, 1.0);
  for (const ExampleScore& s : r.examples) {
    ASSERT_TRUE(s.d_arc);
    ASSERT_NEAR(*s.d_arc, static_cast<double>(s.arc_total - s.dae_errors) / s.arc_total, kTol);
  }
}

TEST(ScoreCorpusTest, AbsentValuesAreCountedAndSkipped) {
  CorpusConfig cfg;
  cfg.n_examples = 20;
  const std::vector<Example> all = GenerateCorpus(cfg).All();
  std::vector<GeneratedSummary> gen;
  for (size_t i = 0; i < all.size(); ++i)
    gen.push_back({all[i].id, i < 5 ? Tokens{} : all[i].summary_tokens});
  const ScoreReport r = ScoreCorpus(all, gen);
  EXPECT_EQ(r.absent_ep_src, 5);
  EXPECT_EQ(r.absent_d_arc, 5);
  EXPECT_EQ(r.absent_er_ref, 0);
  double sum = 0;
  for (size_t i = 5; i < all.size(); ++i) sum += *r.examples[i].ep_src;
  EXPECT_NEAR(*r.macro.ep_src, sum / 15, kTol);
  EXPECT_NEAR(*r.macro.er_ref, 15.0 / 20.0, kTol);
}

TEST(ScoreCorpusTest, RejectsMismatch) {
  CorpusConfig cfg;
  cfg.n_examples = 10;
  const std::vector<Example> all = GenerateCorpus(cfg).All();
  std::vector<GeneratedSummary> gen;
  for (const auto& ex : all) gen.push_back({ex.id, ex.summary_tokens});
  gen.pop_back();
  EXPECT_THROW(ScoreCorpus(all, gen), ValidationError);
  gen.push_back({"wrong", {}});
  EXPECT_THROW(ScoreCorpus(all, gen), ValidationError);
}

TEST(ScoreCorpusTest, JsonRoundTripAndCsv) {
  CorpusConfig cfg;
  cfg.n_examples = 30;
  const ScoreReport r = ScoreReferences(GenerateCorpus(cfg).All());
  const ScoreReport back = ScoreReportFromJson(nlohmann::json::parse(ScoreReportToJson(r).dump()));
  EXPECT_EQ(ScoreReportToJson(back).dump(), ScoreReportToJson(r).dump());
  EXPECT_EQ(AggregateCsvHeader(), "D_arc,D_sum,E-P_src,E-R_ref,R1,R2,RL,len");
  EXPECT_EQ(FormatMetric(std::nullopt), "NA");
}

TEST(ScoreCorpusTest, NaturalModeSkipsArcs) {
  const Example ex = ExampleFromJson(
      nlohmann::json::parse(R"({"id":"n","source":"The Paris talks began in 1999","summary":"Paris talks 1999"})"));
  const std::vector<Example> xs{ex};
  const ScoreReport r = ScoreReferences(xs, EntityOptions{EntityMode::kNatural});
  EXPECT_EQ(*r.macro.ep_src, 1.0);
  EXPECT_FALSE(r.macro.d_sum);
  EXPECT_FALSE(r.macro.d_arc);
}

}  // namespace
}  // namespace cape
