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

#include "cape/model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cape/errors.h"
#include "test_support.h"

namespace cape {
namespace {

using test::RandomParams;

std::vector<Example> Repeat(const Example& ex, int n) { return std::vector<Example>(n, ex); }

TEST(ModelTest, SoftmaxExample) {
  const Vocabulary vocab(0, 0, 0);
  ModelParams p(vocab);
  ASSERT_EQ(p.V(), 3);
  p.bigram = {0, 1, 0, 0, 0, 0, 0, 0, 0};
  p.copy = {0, 0, 2};
  const std::vector<int> src{2};
  const auto probs = ProbNext(p, 0, SourceContext(3, src));
  EXPECT_NEAR(probs[0], 0.0900, 5e-5);
  EXPECT_NEAR(probs[1], 0.2447, 5e-5);
  EXPECT_NEAR(probs[2], 0.6652, 5e-5);
}

TEST(ModelTest, LargeCopyWeightFavorsSourceToken) {
  const Vocabulary vocab(3, 1, 0);
  ModelParams p(vocab);
  p.copy[4] = 10.0;
  const std::vector<int> src{4};
  const auto probs = ProbNext(p, 1, SourceContext(vocab.size(), src));
  for (int u = 0; u < vocab.size(); ++u) {
    if (u == 4) continue;
    EXPECT_GT(probs[4], probs[u]);
  }
}

TEST(ModelTest, CopyAndTransitionFeaturesShiftLogits) {
  const Vocabulary vocab(0, 0, 0);
  ModelParams p(vocab);
  p.copy = {0, 0, std::log(2.0)};
  p.transition = {0, std::log(3.0), 0};
  const std::vector<int> src{1, 2};
  const SourceContext ctx = SourceContext::FromSequence(3, src);  // bigrams BOS-EOS, EOS-SEP
  const auto probs = ProbNext(p, 0, ctx);
  // logits: 0, log 3, log 2
  EXPECT_NEAR(probs[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(probs[1], 3.0 / 6.0, 1e-12);
  EXPECT_NEAR(probs[2], 2.0 / 6.0, 1e-12);
}

TEST(ModelTest, ZeroParamsGiveUniformNll) {
  const Vocabulary vocab(5, 2, 1);
  const ModelParams p(vocab);
  const std::vector<int> src{3, 8, 4, 2};
  const std::vector<int> summary{3, 8, 4, 2};
  const double nll = SequenceNll(p, SourceContext::FromSequence(vocab.size(), src), summary);
  EXPECT_NEAR(nll, 5 * std::log(static_cast<double>(vocab.size())), 1e-12);
}

TEST(ModelTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) EXPECT_LT(test::GradientCheckRelativeError(gen), 1e-4) << trial;
}

TEST(ModelTest, GradientScaleIsLinear) {
  std::mt19937_64 gen(6);
  const Vocabulary vocab(3, 1, 0);
  const ModelParams p = RandomParams(vocab, gen, 0.5);
  const std::vector<int> src{3, 6, 4, 2}, summary{3, 6, 4};
  const SourceContext ctx = SourceContext::FromSequence(vocab.size(), src);
  ModelParams g1(vocab), g2(vocab);
  const double nll1 = AccumulateGradient(p, ctx, summary, 1.0, g1);
  const double nll2 = AccumulateGradient(p, ctx, summary, 2.0, g2);
  EXPECT_EQ(nll1, nll2);
  EXPECT_DOUBLE_EQ(nll1, SequenceNll(p, ctx, summary));
  for (size_t i = 0; i < g1.bigram.size(); ++i) EXPECT_NEAR(2 * g1.bigram[i], g2.bigram[i], 1e-12);
}

TEST(TrainTest, SingleRepeatedPairIsMemorized) {
  Example ex;
  ex.id = "pair";
  ex.source_facts = {{1, 0, 2}, {3, 1, 4}};
  ex.summary_facts = {{3, 1, 4}};
  ex.noise_labels = {NoiseLabel::kClean};
  ex.source_tokens = RenderFacts(ex.source_facts);
  ex.summary_tokens = RenderFacts(ex.summary_facts);
  const Vocabulary vocab(60, 12, 20);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  const TrainResult r = Train(vocab, Repeat(ex, 64), cfg);
  EXPECT_LT(SequenceNll(r.params, ex.source_tokens, ex.summary_tokens), 0.1);
  EXPECT_EQ(r.epoch_loss.size(), 60u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(TrainTest, ZeroLearningRateLeavesParamsUnchanged) {
  CorpusConfig cc;
  cc.n_examples = 40;
  const std::vector<Example> data = GenerateCorpus(cc).train;
  const Vocabulary vocab(60, 12, 20);
  std::mt19937_64 gen(1);
  const ModelParams init = RandomParams(vocab, gen, 0.1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  const TrainResult r = Finetune(init, data, cfg);
  EXPECT_EQ(r.params.bigram, init.bigram);
  EXPECT_EQ(r.params.copy, init.copy);
  EXPECT_EQ(r.params.transition, init.transition);
}

TEST(TrainTest, DeterministicForFixedSeed) {
  CorpusConfig cc;
  cc.n_examples = 200;
  const std::vector<Example> data = GenerateCorpus(cc).train;
  const Vocabulary vocab(60, 12, 20);
  TrainConfig cfg;
  cfg.epochs = 2;
  const TrainResult a = Train(vocab, data, cfg);
  const TrainResult b = Train(vocab, data, cfg);
  EXPECT_EQ(SerializeCheckpoint(a.ToCheckpoint()), SerializeCheckpoint(b.ToCheckpoint()));
  cfg.seed = 18;
  const TrainResult c = Train(vocab, data, cfg);
  EXPECT_NE(a.params.bigram, c.params.bigram);
  EXPECT_EQ(a.metadata.at("seed"), "17");
}

TEST(TrainTest, RejectsBadInput) {
  const Vocabulary vocab(60, 12, 20);
  EXPECT_THROW(Train(vocab, std::vector<Example>{}, TrainConfig{}), ValidationError);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  const TrainConfig back = TrainConfigFromJson(nlohmann::json::parse(TrainConfigToJson(TrainConfig{}).dump()));
  EXPECT_EQ(TrainConfigToJson(back), TrainConfigToJson(TrainConfig{}));
}

TEST(CheckpointBridgeTest, ParamsRoundTrip) {
  std::mt19937_64 gen(2);
  const Vocabulary vocab(4, 2, 1);
  const ModelParams p = RandomParams(vocab, gen, 0.3);
  const ModelParams back = ModelParams::FromCheckpoint(p.ToCheckpoint());
  EXPECT_EQ(back.V(), p.V());
  for (size_t i = 0; i < p.bigram.size(); ++i)
    EXPECT_EQ(back.bigram[i], static_cast<double>(static_cast<float>(p.bigram[i])));
}

class DecodeTest : public ::testing::Test {
 protected:
  static const TrainResult& Trained() {
    static const TrainResult r = [] {
      CorpusConfig cc;
      cc.n_examples = 600;
      TrainConfig cfg;
      cfg.epochs = 3;
      return Train(Vocabulary(60, 12, 20), GenerateCorpus(cc).train, cfg);
    }();
    return r;
  }
  static std::vector<Example> Valid() {
    CorpusConfig cc;
    cc.n_examples = 600;
    return GenerateCorpus(cc).valid;
  }
};

TEST_F(DecodeTest, MaxLenOneEmitsAtMostOneToken) {
  DecodeOptions opt;
  opt.max_len = 1;
  for (const Example& ex : Valid()) EXPECT_LE(Decode(Trained().params, ex.source_tokens, opt).size(), 1u);
}

TEST_F(DecodeTest, BeamOneEqualsGreedy) {
  DecodeOptions greedy;
  const DecodeOptions beam1 = ParseDecodeStrategy("beam:1");
  for (const Example& ex : Valid())
    EXPECT_EQ(Decode(Trained().params, ex.source_tokens, greedy),
              Decode(Trained().params, ex.source_tokens, beam1));
  EXPECT_THROW(ParseDecodeStrategy("beam:0"), ValidationError);
  EXPECT_THROW(ParseDecodeStrategy("sample"), ValidationError);
}

TEST_F(DecodeTest, GrammarConstrainedOutputParses) {
  const DecodeOptions beam = ParseDecodeStrategy("beam:3");
  for (const Example& ex : Valid()) {
    const Tokens out = Decode(Trained().params, ex.source_tokens, beam);
    for (const auto& t : out) EXPECT_NE(t, "BOS");
    for (const auto& t : out) EXPECT_NE(t, "EOS");
  }
}

TEST_F(DecodeTest, AlphaZeroMergeDecodesLikeBase) {
  const Checkpoint base = Trained().ToCheckpoint();
  std::mt19937_64 gen(3);
  const Checkpoint e = RandomParams(Vocabulary(60, 12, 20), gen, 1.0).ToCheckpoint();
  const Checkpoint a = RandomParams(Vocabulary(60, 12, 20), gen, 1.0).ToCheckpoint();
  const ModelParams merged = ModelParams::FromCheckpoint(CapeMerge(base, e, a, 0.0));
  const ModelParams b = ModelParams::FromCheckpoint(base);
  const auto valid = Valid();
  EXPECT_EQ(JoinTokens(Decode(merged, valid[0].source_tokens, {})), JoinTokens(Decode(b, valid[0].source_tokens, {})));
  const auto x = DecodeCorpus(merged, valid, {});
  const auto y = DecodeCorpus(b, valid, {});
  ASSERT_EQ(x.size(), y.size());
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].tokens, y[i].tokens);
}

}  // namespace
}  // namespace cape
