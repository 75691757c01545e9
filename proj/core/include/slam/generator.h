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
// Watermarked generation: keyed selection -> steering plan -> up to N
// sampled candidates, early stop at the calibrated threshold, degeneracy
// filter, highest-score fallback.

#ifndef SLAM_GENERATOR_H_
#define SLAM_GENERATOR_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slam/backend.h"
#include "slam/detector.h"
#include "slam/types.h"

namespace slam {

// Sums directions per layer. Throws ArgumentError on an empty selection.
SteeringPlan BuildPlan(const std::vector<FeatureRecord>& selected, double alpha,
                       std::size_t prompt_len);

struct DegeneracyConfig {
  std::size_t min_tokens = 32;
  std::size_t ngram = 8;
  std::size_t window = 32;         // leading continuation tokens checked
  double max_overlap = 0.5;
};

enum class Degeneracy { kAccept, kEmpty, kTooShort, kPromptEcho };
const char* DegeneracyName(Degeneracy d);

// Rejects an empty continuation, one shorter than min_tokens, or a prompt
// echo: some n-gram in the first `window` continuation tokens occurs in the
// prompt AND more than max_overlap of the continuation's n-grams do.
Degeneracy DegeneracyFilter(const std::vector<TokenId>& prompt,
                            const std::vector<TokenId>& continuation,
                            const DegeneracyConfig& config = {});

struct GenerationParams {
  double alpha = 2.0;
  std::size_t num_candidates = 4;
  double threshold = kDefaultThreshold;
  std::size_t max_new_tokens = 200;
  SamplingParams sampling;
  // When > 0 and the tokenizer has a separator, every sentence_len-th
  // continuation token is the separator and the sampler never emits
  // special tokens itself.
  std::size_t sentence_len = 0;
  DegeneracyConfig degeneracy;
  double z_min = kDefaultZMin;
};

// Samples a continuation. `plans` maps sentence index -> plan (a single
// entry at 0 applies to the whole text); nullptr generates unsteered.
std::vector<TokenId> SampleContinuation(
    const Backend& backend, const std::vector<TokenId>& prompt,
    const std::map<std::size_t, SteeringPlan>* plans,
    const GenerationParams& params, std::uint64_t rng_seed);

std::vector<TokenId> GenerateUnwatermarked(const Backend& backend,
                                           const std::vector<TokenId>& prompt,
                                           const GenerationParams& params,
                                           std::uint64_t rng_seed);

struct GenerationOutput {
  std::vector<TokenId> tokens;  // prompt + continuation
  std::size_t prompt_len = 0;
  DetectionResult detection;
  std::size_t candidates_tried = 0;
  std::size_t degenerate_candidates = 0;
  std::vector<double> candidate_z_hat;  // NaN for degenerate slots
};

// Candidate i (0-based) samples with seed SHA-256(hmac_seed | le_u64(i)).
// Each non-degenerate candidate is scored with one fresh unsteered forward.
// Throws GenerationError when every candidate is degenerate.
GenerationOutput GenerateWatermarked(const Backend& backend,
                                     const std::vector<TokenId>& prompt,
                                     const WatermarkKey& key,
                                     const std::string& doc_id,
                                     const DirectionBank& bank,
                                     const SelectionSpec& spec,
                                     const NullStats& nulls,
                                     const GenerationParams& params);

}  // namespace slam

#endif  // SLAM_GENERATOR_H_
