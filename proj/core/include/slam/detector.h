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
// Watermark detection from residual-stream projections.
//
// For each selected feature j the mean per-token projection of the
// continuation onto d_j is standardized against per-token null moments,
//
//   z_j = (mean_j - mu_j) / (sigma_j / sqrt(T)),
//
// features with z_j >= z_min are combined by Stouffer's rule and the result
// is calibrated against the bank-level null moments of that combined score.
// Detection needs one backend forward and no SAE.

#ifndef SLAM_DETECTOR_H_
#define SLAM_DETECTOR_H_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slam/backend.h"
#include "slam/types.h"

namespace slam {

inline constexpr double kDefaultThreshold = 2.0;
inline constexpr double kDefaultZMin = 0.5;

struct ProjectionMean {
  double mean = 0.0;
  std::size_t num_tokens = 0;
};

// Mean of <h_t, direction> over [prompt_len, T) (or all tokens). Throws
// ArgumentError when no token is scored or the layer is missing.
ProjectionMean FeatureProjectionMean(const ActivationTrace& trace,
                                     const FeatureRecord& record,
                                     bool skip_prompt = true);
// Same over the token range [begin, end).
ProjectionMean FeatureProjectionMean(const ActivationTrace& trace,
                                     const FeatureRecord& record,
                                     std::size_t begin, std::size_t end);

// Throws InvariantError when null.sigma <= 0; ArgumentError when T == 0.
double FeatureZ(double mean, std::size_t num_tokens, const FeatureNull& null);

struct StoufferResult {
  double z_raw = 0.0;
  std::set<std::string> active_set;
};

// Sum of retained z over sqrt(count); an empty retained set gives 0.
StoufferResult Stouffer(const std::map<std::string, double>& z_values,
                        double z_min = kDefaultZMin);

// (z_raw - mu_raw) / sigma_raw; throws InvariantError when sigma_raw <= 0.
double Calibrate(double z_raw, double mu_raw, double sigma_raw);

// Token ranges of the continuation's sentences. A sentence ends with (and
// includes) the separator token; a trailing unterminated run is a sentence
// too. Without a separator the whole continuation is one sentence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<TokenSpan> ContinuationSentences(const std::vector<TokenId>& tokens,
                                             std::size_t prompt_len,
                                             std::optional<TokenId> separator);

struct DetectOptions {
  double threshold = kDefaultThreshold;
  double z_min = kDefaultZMin;
};

// Scores an existing trace (which must hold every selected layer).
// Document-level mode uses the continuation as one span; sentence-level
// mode scores each sentence with its own selection and Stouffer-combines
// the sentence scores with the same z_min filter (per-feature keys become
// "feature_id@sentence").
DetectionResult DetectFromTrace(const ActivationTrace& trace,
                                std::optional<TokenId> separator,
                                const WatermarkKey& key,
                                const std::string& doc_id,
                                const DirectionBank& bank,
                                const SelectionSpec& spec,
                                const NullStats& nulls,
                                const DetectOptions& options = {});

// Recomputes the keyed selection, runs exactly one backend forward over
// `tokens` and scores it.
DetectionResult Detect(const Backend& backend,
                       const std::vector<TokenId>& tokens,
                       std::size_t prompt_len, const WatermarkKey& key,
                       const std::string& doc_id, const DirectionBank& bank,
                       const SelectionSpec& spec, const NullStats& nulls,
                       const DetectOptions& options = {});

struct BaselineText {
  std::string doc_id;
  std::vector<TokenId> tokens;
  std::size_t prompt_len = 0;
};

inline constexpr std::size_t kMinBaselineTexts = 30;
inline constexpr std::size_t kRecommendedBaselineTexts = 100;

// Per-feature moments pool every continuation token of every baseline text
// (population std); bank-level moments are the mean and population std of
// each text's z_raw under its own doc_id selection. Throws ArgumentError on
// fewer than 30 texts and InvariantError on a zero per-feature sigma.
NullStats FitNulls(const Backend& backend,
                   const std::vector<BaselineText>& baseline,
                   const WatermarkKey& key, const DirectionBank& bank,
                   const SelectionSpec& spec, double z_min = kDefaultZMin,
                   std::size_t jobs = 0);

}  // namespace slam

#endif  // SLAM_DETECTOR_H_
