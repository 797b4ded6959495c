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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cape/errors.h"
#include "cape/rng.h"

namespace cape {
namespace {

void Logits(const ModelParams& params, int prev, const SourceContext& source, std::vector<double>& z) {
  const int V = params.V();
  z.resize(V);
  const double* row = params.bigram.data() + static_cast<size_t>(prev) * V;
  for (int u = 0; u < V; ++u) z[u] = row[u] + (source.InSource(u) ? params.copy[u] : 0.0);
  for (int u : source.Successors(prev)) z[u] += params.transition[u];
}

void Softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void LogSoftmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double log_norm = m + std::log(sum);
  for (double& v : z) v -= log_norm;
}

std::vector<float> ToFloat(const std::vector<double>& xs) {
  return std::vector<float>(xs.begin(), xs.end());
}

std::vector<double> ReadTensor(const Checkpoint& ckpt, const char* name, std::vector<uint64_t> shape) {
  auto it = ckpt.entries.find(name);
  if (it == ckpt.entries.end())
    throw ValidationError(std::string("model checkpoint lacks tensor '") + name + "'");
  if (it->second.shape != shape)
    throw ValidationError(std::string("tensor '") + name + "' has the wrong shape for the vocabulary");
  return std::vector<double>(it->second.data.begin(), it->second.data.end());
}

int MetaInt(const Checkpoint& ckpt, const char* key) {
  auto it = ckpt.metadata.find(key);
  if (it == ckpt.metadata.end())
    throw ValidationError(std::string("model checkpoint lacks metadata '") + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ValidationError(std::string("metadata '") + key + "' is not an integer");
  }
}

enum class Slot { kSubject, kPredicate, kObject, kSep };

bool Allowed(const Vocabulary& vocab, Slot slot, int u, bool grammar) {
  if (u == Vocabulary::kBos) return false;
  if (!grammar) return true;
  const TokenClass cls = vocab.ClassOf(u);
  switch (slot) {
    case Slot::kSubject: return cls == TokenClass::kEntity || cls == TokenClass::kEos;
    case Slot::kPredicate: return cls == TokenClass::kPredicate;
    case Slot::kObject: return cls == TokenClass::kEntity;
    case Slot::kSep: return cls == TokenClass::kSep;
  }
  return false;
}

Slot NextSlot(Slot s) {
  switch (s) {
    case Slot::kSubject: return Slot::kPredicate;
    case Slot::kPredicate: return Slot::kObject;
    case Slot::kObject: return Slot::kSep;
    case Slot::kSep: return Slot::kSubject;
  }
  return Slot::kSubject;
}

struct Hypothesis {
  std::vector<int> ids;
  double logprob = 0.0;
  Slot slot = Slot::kSubject;
  bool finished = false;

  double Score() const {
    const size_t len = ids.size() + (finished ? 1 : 0);
    return len ? logprob / static_cast<double>(len) : 0.0;
  }
};

bool Better(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.Score();
  const double sb = b.Score();
  if (sa != sb) return sa > sb;
  if (a.ids != b.ids) return a.ids < b.ids;
  return a.finished && !b.finished;
}

}  // namespace

ModelParams::ModelParams(const Vocabulary& v)
    : vocab(v),
      bigram(static_cast<size_t>(v.size()) * v.size(), 0.0),
      copy(v.size(), 0.0),
      transition(v.size(), 0.0) {}

ModelParams ModelParams::FromCheckpoint(const Checkpoint& ckpt) {
  ModelParams p(Vocabulary(MetaInt(ckpt, "vocab_entities"), MetaInt(ckpt, "vocab_predicates"),
                           MetaInt(ckpt, "vocab_fillers")));
  const uint64_t V = p.V();
  p.bigram = ReadTensor(ckpt, kBigramName, {V, V});
  p.copy = ReadTensor(ckpt, kCopyName, {V});
  if (ckpt.entries.count(kTransitionName)) p.transition = ReadTensor(ckpt, kTransitionName, {V});
  for (const auto* xs : {&p.bigram, &p.copy, &p.transition})
    for (double x : *xs)
      if (!std::isfinite(x)) throw ValidationError("model checkpoint holds non-finite weights");
  return p;
}

Checkpoint ModelParams::ToCheckpoint(std::map<std::string, std::string> metadata) const {
  Checkpoint ckpt;
  const uint64_t v = V();
  ckpt.entries[kBigramName] = Tensor{{v, v}, ToFloat(bigram)};
  ckpt.entries[kCopyName] = Tensor{{v}, ToFloat(copy)};
  ckpt.entries[kTransitionName] = Tensor{{v}, ToFloat(transition)};
  ckpt.metadata = std::move(metadata);
  ckpt.metadata["vocab_entities"] = std::to_string(vocab.entities());
  ckpt.metadata["vocab_predicates"] = std::to_string(vocab.predicates());
  ckpt.metadata["vocab_fillers"] = std::to_string(vocab.fillers());
  return ckpt;
}

SourceContext::SourceContext(int V, std::span<const int> source_set)
    : in_source_(V, 0), successors_(V) {
  for (int u : source_set) in_source_.at(u) = 1;
}

SourceContext SourceContext::FromSequence(int V, std::span<const int> source_ids) {
  SourceContext ctx(V, source_ids);
  int prev = Vocabulary::kBos;
  for (int u : source_ids) {
    auto& succ = ctx.successors_[prev];
    auto it = std::lower_bound(succ.begin(), succ.end(), u);
    if (it == succ.end() || *it != u) succ.insert(it, u);
    prev = u;
  }
  return ctx;
}

std::span<const int> SourceContext::Successors(int prev) const {
  if (successors_.empty()) return {};
  return successors_[prev];
}

std::vector<int> EncodeTokens(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = vocab.Id(t);
    if (!id) throw ValidationError("token '" + t + "' is not in the model vocabulary");
    ids.push_back(*id);
  }
  return ids;
}

Tokens DecodeIds(const Vocabulary& vocab, std::span<const int> ids) {
  Tokens out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.Surface(id));
  return out;
}

std::vector<double> ProbNext(const ModelParams& params, int prev, const SourceContext& source) {
  std::vector<double> z;
  Logits(params, prev, source, z);
  Softmax(z);
  return z;
}

double SequenceNll(const ModelParams& params, const SourceContext& source, std::span<const int> summary_ids) {
  std::vector<double> z;
  double nll = 0.0;
  int prev = Vocabulary::kBos;
  for (size_t t = 0; t <= summary_ids.size(); ++t) {
    const int y = t < summary_ids.size() ? summary_ids[t] : Vocabulary::kEos;
    Logits(params, prev, source, z);
    LogSoftmax(z);
    nll -= z[y];
    prev = y;
  }
  return nll;
}

double SequenceNll(const ModelParams& params, std::span<const std::string> source_tokens,
                   std::span<const std::string> summary_tokens) {
  const auto src = EncodeTokens(params.vocab, source_tokens);
  return SequenceNll(params, SourceContext::FromSequence(params.V(), src),
                     EncodeTokens(params.vocab, summary_tokens));
}

double AccumulateGradient(const ModelParams& params, const SourceContext& source,
                          std::span<const int> summary_ids, double scale, ModelParams& grad) {
  const int V = params.V();
  std::vector<double> p;
  double nll = 0.0;
  int prev = Vocabulary::kBos;
  for (size_t t = 0; t <= summary_ids.size(); ++t) {
    const int y = t < summary_ids.size() ? summary_ids[t] : Vocabulary::kEos;
    Logits(params, prev, source, p);
    Softmax(p);
    nll -= std::log(p[y]);
    p[y] -= 1.0;
    double* row = grad.bigram.data() + static_cast<size_t>(prev) * V;
    for (int u = 0; u < V; ++u) {
      const double g = scale * p[u];
      row[u] += g;
      if (source.InSource(u)) grad.copy[u] += g;
    }
    for (int u : source.Successors(prev)) grad.transition[u] += scale * p[u];
    prev = y;
  }
  return nll;
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw ValidationError("epochs must be nonnegative");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw ValidationError("learning_rate must be finite and nonnegative");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!std::isfinite(l2) || l2 < 0.0) throw ValidationError("l2 must be finite and nonnegative");
  if (!std::isfinite(init_sigma) || init_sigma < 0.0) throw ValidationError("init sigma must be nonnegative");
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    if (j.contains("init")) {
      const auto& init = j["init"];
      const std::string kind = init.is_string() ? init.get<std::string>() : init.value("kind", "gaussian");
      if (kind == "zeros") {
        c.init = TrainConfig::Init::kZeros;
      } else if (kind == "gaussian") {
        c.init = TrainConfig::Init::kGaussian;
        if (init.is_object()) c.init_sigma = init.value("sigma", c.init_sigma);
      } else {
        throw ValidationError("unknown init '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad train config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::ordered_json TrainConfigToJson(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["l2"] = c.l2;
  j["seed"] = c.seed;
  if (c.init == TrainConfig::Init::kZeros) {
    j["init"] = {{"kind", "zeros"}};
  } else {
    j["init"] = {{"kind", "gaussian"}, {"sigma", c.init_sigma}};
  }
  return j;
}

std::vector<EncodedExample> EncodeExamples(const Vocabulary& vocab, std::span<const Example> examples) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto src = EncodeTokens(vocab, ex.source_tokens);
    out.push_back({SourceContext::FromSequence(vocab.size(), src), EncodeTokens(vocab, ex.summary_tokens)});
  }
  return out;
}

ModelParams InitParams(const Vocabulary& vocab, const TrainConfig& cfg) {
  ModelParams p(vocab);
  if (cfg.init == TrainConfig::Init::kGaussian && cfg.init_sigma > 0.0) {
    Rng rng = MakeRng(cfg.seed, Stream::kModelInit, 0);
    for (auto* xs : {&p.bigram, &p.copy, &p.transition})
      for (double& x : *xs) x = cfg.init_sigma * rng.Normal();
  }
  return p;
}

TrainResult RunSgd(ModelParams params, std::span<const EncodedExample> data, const TrainConfig& cfg) {
  cfg.Validate();
  if (data.empty()) throw ValidationError("cannot train on an empty corpus");
  TrainResult result;
  const size_t n = data.size();
  std::vector<size_t> order(n);
  ModelParams grad(params.vocab);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = MakeRng(cfg.seed, Stream::kTrainShuffle, static_cast<uint64_t>(epoch));
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);

    double epoch_objective = 0.0;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto* xs : {&grad.bigram, &grad.copy, &grad.transition}) std::fill(xs->begin(), xs->end(), 0.0);
      double nll = 0.0;
      for (size_t k = start; k < end; ++k)
        nll += AccumulateGradient(params, data[order[k]].source, data[order[k]].summary, scale, grad);
      double sq = 0.0;
      const std::array pp{&params.bigram, &params.copy, &params.transition};
      const std::array gg{&grad.bigram, &grad.copy, &grad.transition};
      for (int t = 0; t < 3; ++t) {
        auto& theta = *pp[t];
        auto& g = *gg[t];
        for (size_t i = 0; i < theta.size(); ++i) {
          sq += theta[i] * theta[i];
          g[i] += cfg.l2 * theta[i];
        }
      }
      const double objective = nll * scale + 0.5 * cfg.l2 * sq;
      if (!std::isfinite(objective)) {
        throw ValidationError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(start / cfg.batch_size));
      }
      epoch_objective += objective * static_cast<double>(end - start);
      for (int t = 0; t < 3; ++t) {
        auto& theta = *pp[t];
        const auto& g = *gg[t];
        for (size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.learning_rate * g[i];
      }
    }
    result.epoch_loss.push_back(epoch_objective / static_cast<double>(n));
    if (epoch > 0 && result.epoch_loss[epoch] > result.epoch_loss[epoch - 1]) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "training loss increased at epoch %d (%.6f -> %.6f)", epoch,
                    result.epoch_loss[epoch - 1], result.epoch_loss[epoch]);
      result.warnings.emplace_back(buf);
    }
  }
  result.params = std::move(params);
  result.metadata["seed"] = std::to_string(cfg.seed);
  result.metadata["train_config"] = TrainConfigToJson(cfg).dump();
  return result;
}

Checkpoint TrainResult::ToCheckpoint(std::map<std::string, std::string> extra) const {
  std::map<std::string, std::string> md = metadata;
  for (auto& [k, v] : extra) md[k] = std::move(v);
  return params.ToCheckpoint(std::move(md));
}

TrainResult Train(const Vocabulary& vocab, std::span<const Example> corpus, const TrainConfig& cfg) {
  if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");
  const auto data = EncodeExamples(vocab, corpus);
  return RunSgd(InitParams(vocab, cfg), data, cfg);
}

TrainResult Finetune(const ModelParams& init, std::span<const Example> subset, const TrainConfig& cfg) {
  if (subset.empty()) throw ValidationError("cannot fine-tune on an empty subset");
  const auto data = EncodeExamples(init.vocab, subset);
  return RunSgd(init, data, cfg);
}

DecodeOptions ParseDecodeStrategy(std::string_view strategy, DecodeOptions base) {
  if (strategy == "greedy") {
    base.beam = 1;
    return base;
  }
  if (strategy.starts_with("beam:")) {
    try {
      const int k = std::stoi(std::string(strategy.substr(5)));
      if (k >= 1) {
        base.beam = k;
        return base;
      }
    } catch (const std::exception&) {
    }
  }
  throw ValidationError("decode strategy must be 'greedy' or 'beam:K' with K >= 1");
}

std::vector<int> DecodeIdsFrom(const ModelParams& params, const SourceContext& source,
                               const DecodeOptions& options) {
  if (options.max_len < 1) throw ValidationError("max_len must be at least 1");
  const int V = params.V();
  std::vector<double> z;

  if (options.beam <= 1) {
    std::vector<int> out;
    int prev = Vocabulary::kBos;
    Slot slot = Slot::kSubject;
    for (int step = 0; step < options.max_len; ++step) {
      Logits(params, prev, source, z);
      int best = -1;
      for (int u = 0; u < V; ++u) {
        if (!Allowed(params.vocab, slot, u, options.grammar)) continue;
        if (best < 0 || z[u] > z[best]) best = u;
      }
      if (best < 0 || best == Vocabulary::kEos) break;
      out.push_back(best);
      prev = best;
      slot = NextSlot(slot);
    }
    return out;
  }

  std::vector<Hypothesis> beam(1);
  for (int step = 0; step < options.max_len; ++step) {
    std::vector<Hypothesis> candidates;
    bool expanded = false;
    for (const auto& h : beam) {
      if (h.finished) {
        candidates.push_back(h);
        continue;
      }
      expanded = true;
      const int prev = h.ids.empty() ? Vocabulary::kBos : h.ids.back();
      Logits(params, prev, source, z);
      LogSoftmax(z);
      for (int u = 0; u < V; ++u) {
        if (!Allowed(params.vocab, h.slot, u, options.grammar)) continue;
        Hypothesis next = h;
        next.logprob += z[u];
        if (u == Vocabulary::kEos) {
          next.finished = true;
        } else {
          next.ids.push_back(u);
          next.slot = NextSlot(h.slot);
        }
        candidates.push_back(std::move(next));
      }
    }
    if (!expanded) break;
    const size_t keep = std::min(candidates.size(), static_cast<size_t>(options.beam));
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(), Better);
    candidates.resize(keep);
    beam = std::move(candidates);
  }
  return std::min_element(beam.begin(), beam.end(), Better)->ids;
}

Tokens Decode(const ModelParams& params, std::span<const std::string> source_tokens,
              const DecodeOptions& options) {
  const auto src = EncodeTokens(params.vocab, source_tokens);
  const auto ids = DecodeIdsFrom(params, SourceContext::FromSequence(params.V(), src), options);
  return DecodeIds(params.vocab, ids);
}

std::vector<GeneratedSummary> DecodeCorpus(const ModelParams& params, std::span<const Example> examples,
                                           const DecodeOptions& options) {
  std::vector<GeneratedSummary> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({ex.id, Decode(params, ex.source_tokens, options)});
  return out;
}

double MeanNll(const ModelParams& params, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : examples) sum += SequenceNll(params, ex.source_tokens, ex.summary_tokens);
  return sum / static_cast<double>(examples.size());
}

}  // namespace cape
