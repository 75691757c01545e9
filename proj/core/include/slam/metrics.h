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
// Text-quality and detection metrics that need no external model.

#ifndef SLAM_METRICS_H_
#define SLAM_METRICS_H_

#include <map>
#include <string>
#include <vector>

#include "slam/backend.h"

namespace slam {

using WordSeq = std::vector<std::string>;

// Mean over n = 1..n_max of unique/total n-grams. A text shorter than n
// contributes 1.0 for that n.
double DistinctN(const WordSeq& tokens, int n_max = 4);
double DistinctN(const std::vector<TokenId>& tokens, int n_max = 4);

// Zero match counts are replaced by this value (smoothing method 1).
inline constexpr double kBleuEpsilon = 0.1;

// BLEU-4 of `hypothesis` against `references`: uniform weights, clipped
// n-gram counts over all references, closest-reference brevity penalty.
double Bleu4(const WordSeq& hypothesis, const std::vector<WordSeq>& references);

// Mean BLEU-4 of each text against all others. Throws ArgumentError for
// fewer than two texts. *per_text receives the individual scores.
double SelfBleu(const std::vector<WordSeq>& corpus,
                std::vector<double>* per_text = nullptr);

struct ScoredText {
  double z_hat = 0.0;
  bool watermarked = false;
};
struct Rates {
  double tpr = 0.0;
  double fpr = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};
// Inclusive threshold; a class with no members gets rate 0.
Rates TprFpr(const std::vector<ScoredText>& scores, double threshold);

// exp(mean NLL) of the continuation tokens under the unsteered backend at
// temperature 1. Throws ArgumentError when the continuation or prompt is
// empty.
double ConditionalPerplexity(const Backend& backend,
                             const std::vector<TokenId>& prompt,
                             const std::vector<TokenId>& continuation);

double PplRatio(const Backend& backend, const std::vector<TokenId>& prompt,
                const std::vector<TokenId>& continuation_wm,
                const std::vector<TokenId>& continuation_bl);

}  // namespace slam

#endif  // SLAM_METRICS_H_
