//
// Copyright 2026 The slam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "slam/generator.h"

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "slam/crypto.h"
#include "slam/error.h"
#include "slam/selection.h"

namespace slam {
namespace {

std::set<std::vector<TokenId>> NGrams(const std::vector<TokenId>& tokens,
                                      std::size_t n, std::size_t limit) {
  std::set<std::vector<TokenId>> out;
  const std::size_t end = std::min(tokens.size(), limit);
  for (std::size_t i = 0; i + n <= end; ++i) {
    out.emplace(tokens.begin() + i, tokens.begin() + i + n);
  }
  return out;
}

}  // namespace

SteeringPlan BuildPlan(const std::vector<FeatureRecord>& selected, double alpha,
                       std::size_t prompt_len) {
  if (selected.empty()) throw ArgumentError("cannot build a plan from no features");
  SteeringPlan plan;
  plan.alpha = alpha;
  plan.apply_from_token = prompt_len;
  for (const auto& rec : selected) {
    auto& v = plan.per_layer[rec.layer];
    if (v.empty()) v.assign(rec.direction.size(), 0.0);
    if (v.size() != rec.direction.size()) {
      throw DimensionError("selected directions disagree on d_model");
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += rec.direction[i];
  }
  return plan;
}

const char* DegeneracyName(Degeneracy d) {
  switch (d) {
    case Degeneracy::kAccept:
      return "accept";
    case Degeneracy::kEmpty:
      return "empty";
    case Degeneracy::kTooShort:
      return "too_short";
    case Degeneracy::kPromptEcho:
      return "prompt_echo";
  }
  return "unknown";
}

Degeneracy DegeneracyFilter(const std::vector<TokenId>& prompt,
                            const std::vector<TokenId>& continuation,
                            const DegeneracyConfig& config) {
  if (continuation.empty()) return Degeneracy::kEmpty;
  if (continuation.size() < config.min_tokens) return Degeneracy::kTooShort;
  const std::size_t n = config.ngram;
  const auto prompt_grams = NGrams(prompt, n, prompt.size());
  if (prompt_grams.empty()) return Degeneracy::kAccept;
  bool early_hit = false;
  for (const auto& g : NGrams(continuation, n, config.window)) {
    if (prompt_grams.count(g) != 0) {
      early_hit = true;
      break;
    }
  }
  if (!early_hit) return Degeneracy::kAccept;
  std::size_t total = 0;
  std::size_t shared = 0;
  for (std::size_t i = 0; i + n <= continuation.size(); ++i) {
    ++total;
    const std::vector<TokenId> g(continuation.begin() + i, continuation.begin() + i + n);
    if (prompt_grams.count(g) != 0) ++shared;
  }
  const double ratio = static_cast<double>(shared) / static_cast<double>(total);
  return ratio > config.max_overlap ? Degeneracy::kPromptEcho : Degeneracy::kAccept;
}

std::vector<TokenId> SampleContinuation(
    const Backend& backend, const std::vector<TokenId>& prompt,
    const std::map<std::size_t, SteeringPlan>* plans,
    const GenerationParams& params, std::uint64_t rng_seed) {
  if (prompt.empty()) throw ArgumentError("prompt must contain at least one token");
  const Tokenizer& tok = backend.tokenizer();
  const auto separator = tok.SentenceSeparator();
  const bool forced = params.sentence_len > 0 && separator.has_value();
  std::mt19937_64 rng(rng_seed);
  std::vector<TokenId> tokens = prompt;
  std::size_t sentence = 0;
  for (std::size_t i = 0; i < params.max_new_tokens; ++i) {
    if (forced && (i + 1) % params.sentence_len == 0) {
      tokens.push_back(*separator);
      ++sentence;
      continue;
    }
    ForwardOptions fwd;
    fwd.logits_from = tokens.size() - 1;
    fwd.prompt_len = prompt.size();
    if (plans != nullptr && !plans->empty()) {
      auto it = plans->find(sentence);
      if (it == plans->end()) it = std::prev(plans->end());
      fwd.plan = &it->second;
    }
    ForwardResult res = backend.Forward(tokens, fwd);
    auto logits = res.logits.row(res.logits.rows() - 1);
    if (forced) {
      for (std::size_t v = 0; v < logits.size(); ++v) {
        if (tok.IsSpecial(static_cast<TokenId>(v))) {
          logits[v] = -std::numeric_limits<float>::infinity();
        }
      }
    }
    const TokenId next = SampleNext(logits, params.sampling, rng);
    tokens.push_back(next);
    if (!forced && separator.has_value() && next == *separator) ++sentence;
  }
  return {tokens.begin() + static_cast<std::ptrdiff_t>(prompt.size()), tokens.end()};
}

std::vector<TokenId> GenerateUnwatermarked(const Backend& backend,
                                           const std::vector<TokenId>& prompt,
                                           const GenerationParams& params,
                                           std::uint64_t rng_seed) {
  return SampleContinuation(backend, prompt, nullptr, params, rng_seed);
}

GenerationOutput GenerateWatermarked(const Backend& backend,
                                     const std::vector<TokenId>& prompt,
                                     const WatermarkKey& key,
                                     const std::string& doc_id,
                                     const DirectionBank& bank,
                                     const SelectionSpec& spec,
                                     const NullStats& nulls,
                                     const GenerationParams& params) {
  if (params.num_candidates == 0) throw ArgumentError("num_candidates must be >= 1");
  // One plan per sentence index in sentence-level mode, else a single plan.
  std::size_t max_sentences = 1;
  if (spec.sentence_level) {
    const std::size_t len = params.sentence_len > 0 ? params.sentence_len : 1;
    max_sentences = params.max_new_tokens / len + 1;
  }
  const auto selections = SelectionForText(key, doc_id, spec, bank, max_sentences);
  std::map<std::size_t, SteeringPlan> plans;
  for (const auto& [s, sel] : selections) {
    plans[s] = BuildPlan(sel, params.alpha, prompt.size());
  }

  const Digest32 base_seed = HmacSeed(key, doc_id, 0);
  DetectOptions det;
  det.threshold = params.threshold;
  det.z_min = params.z_min;

  GenerationOutput best;
  bool have_best = false;
  GenerationOutput out;
  for (std::size_t i = 0; i < params.num_candidates; ++i) {
    out.candidates_tried = i + 1;
    const Digest32 cs = DeriveSeed(base_seed, i);
    const std::uint64_t rng_seed = LoadU64(std::span(cs).first(8));
    auto continuation = SampleContinuation(backend, prompt, &plans, params, rng_seed);
    if (DegeneracyFilter(prompt, continuation, params.degeneracy) != Degeneracy::kAccept) {
      ++out.degenerate_candidates;
      out.candidate_z_hat.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::vector<TokenId> tokens = prompt;
    tokens.insert(tokens.end(), continuation.begin(), continuation.end());
    DetectionResult r =
        Detect(backend, tokens, prompt.size(), key, doc_id, bank, spec, nulls, det);
    out.candidate_z_hat.push_back(r.z_hat);
    if (!have_best || r.z_hat > best.detection.z_hat) {
      best.tokens = std::move(tokens);
      best.detection = std::move(r);
      have_best = true;
    }
    if (best.detection.z_hat >= params.threshold) break;
  }
  if (!have_best) {
    throw GenerationError("all " + std::to_string(params.num_candidates) +
                          " candidates were degenerate");
  }
  out.tokens = std::move(best.tokens);
  out.prompt_len = prompt.size();
  out.detection = std::move(best.detection);
  return out;
}

}  // namespace slam
