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
// Generation-model abstraction. A backend runs one forward pass over a
// token sequence, optionally adding a steering vector to the residual stream
// after selected layers, and returns next-token logits plus the recorded
// (post-injection) activations.

#ifndef SLAM_BACKEND_H_
#define SLAM_BACKEND_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slam/types.h"

namespace slam {

// h_l^t <- h_l^t + alpha * per_layer[l] for every position t >=
// apply_from_token.
struct SteeringPlan {
  std::map<LayerId, std::vector<double>> per_layer;
  double alpha = 0.0;
  std::size_t apply_from_token = 0;
};

struct ForwardOptions {
  const SteeringPlan* plan = nullptr;
  // Layers whose residual stream is copied into the returned trace.
  std::vector<LayerId> record_layers;
  // Logits (and trace rows, if any) are only needed for positions >= this.
  // Backends may skip earlier positions when they can do so exactly.
  std::size_t logits_from = 0;
  bool want_logits = true;
  // Copied into the trace.
  std::size_t prompt_len = 0;
};

struct ForwardResult {
  // One row per position in [logits_from, num_tokens); empty when
  // want_logits is false.
  FloatMatrix logits;
  // Full-length trace over the recorded layers; rows before logits_from
  // are zero-filled when the backend skipped them.
  ActivationTrace trace;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<TokenId> Encode(std::string_view text) const = 0;
  virtual std::string Decode(std::span<const TokenId> tokens) const = 0;
  virtual std::size_t vocab_size() const = 0;
  // Token that terminates a sentence, when the vocabulary has one.
  virtual std::optional<TokenId> SentenceSeparator() const {
    return std::nullopt;
  }
  // Tokens the sampler must never emit on its own (unknown, separators).
  virtual bool IsSpecial(TokenId /*token*/) const { return false; }
};

class Backend {
 public:
  virtual ~Backend() = default;
  Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  // Exactly one forward pass per call; increments forward_count().
  // Throws ArgumentError when the plan targets a layer the model lacks.
  virtual ForwardResult Forward(std::span<const TokenId> tokens,
                                const ForwardOptions& options) const = 0;

  virtual const Tokenizer& tokenizer() const = 0;
  virtual std::vector<LayerId> layers() const = 0;
  virtual std::size_t d_model() const = 0;
  virtual std::string model_id() const = 0;

  std::uint64_t forward_count() const { return forward_count_.load(); }

 protected:
  void CountForward() const { forward_count_.fetch_add(1); }
  // Shared validation for implementations.
  void CheckPlan(const SteeringPlan* plan) const;

 private:
  mutable std::atomic<std::uint64_t> forward_count_{0};
};

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.9;
};

// Uniform double in [0, 1) from the top 53 bits of one engine draw. Used
// everywhere instead of std::uniform_real_distribution, whose output is
// implementation-defined.
double UniformUnit(std::mt19937_64& rng);
// Uniform integer in [0, n) by rejection sampling.
std::uint64_t UniformIndex(std::mt19937_64& rng, std::uint64_t n);
// Standard normal via Box-Muller over UniformUnit (two draws per sample).
double StandardNormal(std::mt19937_64& rng);

// Nucleus sampling. temperature == 0 returns the argmax (lowest id on
// ties). Entries equal to -infinity are never sampled.
TokenId SampleNext(std::span<const float> logits, const SamplingParams& params,
                   std::mt19937_64& rng);
TokenId SampleNext(std::span<const float> logits, const SamplingParams& params,
                   std::uint64_t rng_seed);

// The minimal set of highest-probability tokens whose mass reaches top_p
// after temperature scaling, in descending probability order.
std::vector<TokenId> NucleusSet(std::span<const float> logits,
                                const SamplingParams& params);

}  // namespace slam

#endif  // SLAM_BACKEND_H_
