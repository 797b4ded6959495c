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

#include "cape/selection.h"

#include <gtest/gtest.h>

#include <algorithm>

#include "cape/errors.h"

namespace cape {
namespace {

ExampleScore Row(std::string id, std::optional<double> ep, int errors, int arcs) {
  ExampleScore s;
  s.id = std::move(id);
  s.ep_src = ep;
  s.dae_errors = errors;
  s.arc_total = arcs;
  if (arcs > 0) s.d_arc = static_cast<double>(arcs - errors) / arcs;
  return s;
}

ScoreReport Report(std::vector<ExampleScore> rows) {
  ScoreReport r;
  r.examples = std::move(rows);
  Aggregate(r);
  return r;
}

bool Disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::none_of(a.begin(), a.end(), [&](const std::string& x) { return b.count(x) > 0; });
}

TEST(SelectionTest, HandBuiltCases) {
  const ScoreReport r = Report({
      Row("clean", 1.0, 0, 3),
      Row("one_of_three", 0.5, 1, 3),   // 1/3 of arcs wrong, below 0.75
      Row("all_wrong", 0.0, 2, 2),
      Row("three_of_four", 0.05, 3, 4), // exactly 0.75
      Row("no_arcs", std::nullopt, 0, 0),
  });
  const SelectionThresholds t;
  const SelectionResult dae = Select(r, SelectionMetric::kDae, t);
  EXPECT_EQ(dae.clean_ids, (std::set<std::string>{"clean"}));
  EXPECT_EQ(dae.noisy_ids, (std::set<std::string>{"all_wrong", "three_of_four"}));
  const SelectionResult ep = Select(r, SelectionMetric::kEntityPrecision, t);
  EXPECT_EQ(ep.clean_ids, (std::set<std::string>{"clean"}));
  EXPECT_EQ(ep.noisy_ids, (std::set<std::string>{"all_wrong", "three_of_four"}));
  EXPECT_TRUE(dae.warnings.empty());
}

TEST(SelectionTest, ThresholdValidation) {
  SelectionThresholds t;
  t.ep_clean = 0.05;
  EXPECT_THROW(t.Validate(), ValidationError);
  t = SelectionThresholds{};
  t.dae_errors_clean = -1;
  EXPECT_THROW(t.Validate(), ValidationError);
  t = SelectionThresholds{};
  t.dae_noisy = 0.0;
  EXPECT_THROW(t.Validate(), ValidationError);
  const SelectionThresholds back =
      ThresholdsFromJson(nlohmann::json::parse(ThresholdsToJson(SelectionThresholds{}).dump()));
  EXPECT_EQ(ThresholdsToJson(back), ThresholdsToJson(SelectionThresholds{}));
  EXPECT_EQ(ParseSelectionMetric("dae"), SelectionMetric::kDae);
  EXPECT_EQ(ParseSelectionMetric("ep"), SelectionMetric::kEntityPrecision);
  EXPECT_THROW(ParseSelectionMetric("rouge"), ValidationError);
}

class CorpusSelectionTest : public ::testing::Test {
 protected:
  static const std::vector<Example>& Train() {
    static const std::vector<Example> train = GenerateCorpus(CorpusConfig{}).train;
    return train;
  }
  static const ScoreReport& Scores() {
    static const ScoreReport scores = ScoreReferences(Train());
    return scores;
  }
};

TEST_F(CorpusSelectionTest, DaeCleanSetIsExactlyTheFullyCleanExamples) {
  std::set<std::string> expected;
  for (const Example& ex : Train())
    if (std::all_of(ex.noise_labels.begin(), ex.noise_labels.end(),
                    [](NoiseLabel l) { return l == NoiseLabel::kClean; }))
      expected.insert(ex.id);
  const SelectionResult dae = Select(Scores(), SelectionMetric::kDae, SelectionThresholds{});
  EXPECT_EQ(dae.clean_ids, expected);
}

TEST_F(CorpusSelectionTest, SoundnessUnderDefaults) {
  std::map<std::string, const ExampleScore*> by_id;
  for (const auto& s : Scores().examples) by_id[s.id] = &s;
  for (SelectionMetric m : {SelectionMetric::kDae, SelectionMetric::kEntityPrecision}) {
    const SelectionResult r = Select(Scores(), m, SelectionThresholds{});
    EXPECT_FALSE(r.clean_ids.empty());
    EXPECT_FALSE(r.noisy_ids.empty());
    EXPECT_TRUE(Disjoint(r.clean_ids, r.noisy_ids));
    for (const auto& id : r.clean_ids) {
      const ExampleScore& s = *by_id.at(id);
      if (m == SelectionMetric::kDae) {
        EXPECT_EQ(s.dae_errors, 0);
      } else {
        EXPECT_EQ(s.ep_src, 1.0);
      }
    }
  }
}

TEST_F(CorpusSelectionTest, FilterKeepsCorpusOrder) {
  const SelectionResult r = Select(Scores(), SelectionMetric::kDae, SelectionThresholds{});
  const std::vector<Example> clean = FilterExamples(Train(), r.clean_ids);
  ASSERT_EQ(clean.size(), r.clean_ids.size());
  for (size_t i = 1; i < clean.size(); ++i) EXPECT_LT(clean[i - 1].id, clean[i].id);
  const auto j = SelectionResultToJson(r);
  EXPECT_EQ(j["clean_size"].get<size_t>(), r.clean_ids.size());
  EXPECT_EQ(j["corpus_size"].get<size_t>(), Train().size());
}

TEST(SelectionTest, NoiselessCorpusHasEmptyNoisySetWithWarning) {
  CorpusConfig cfg;
  cfg.n_examples = 500;
  cfg.p_extrinsic = 0.0;
  cfg.p_intrinsic = 0.0;
  const ScoreReport scores = ScoreReferences(GenerateCorpus(cfg).train);
  for (SelectionMetric m : {SelectionMetric::kDae, SelectionMetric::kEntityPrecision}) {
    const SelectionResult r = Select(scores, m, SelectionThresholds{});
    EXPECT_TRUE(r.noisy_ids.empty());
    EXPECT_EQ(r.clean_ids.size(), scores.examples.size());
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.warnings[0], "noisy selection is empty");
  }
}

}  // namespace
}  // namespace cape
