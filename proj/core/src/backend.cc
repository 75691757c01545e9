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

#include "slam/backend.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "slam/error.h"

namespace slam {

void Backend::CheckPlan(const SteeringPlan* plan) const {
  if (plan == nullptr) return;
  const auto available = layers();
  for (const auto& [layer, vec] : plan->per_layer) {
    if (std::find(available.begin(), available.end(), layer) ==
        available.end()) {
      throw ArgumentError("steering plan targets layer " +
                          std::to_string(layer) + " which the model lacks");
    }
    if (vec.size() != d_model()) {
      throw DimensionError("steering vector for layer " +
                           std::to_string(layer) + " has length " +
                           std::to_string(vec.size()) + ", model d_model is " +
                           std::to_string(d_model()));
    }
  }
}

double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t UniformIndex(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ArgumentError("UniformIndex over an empty range");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

double StandardNormal(std::mt19937_64& rng) {
  const double u1 = 1.0 - UniformUnit(rng);  // (0, 1]
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

struct Candidate {
  TokenId id;
  double prob;
};

// Tokens with finite logits, sorted by probability (descending, id
// ascending on ties) together with their normalised probabilities.
std::vector<Candidate> SortedProbabilities(std::span<const float> logits,
                                           double temperature) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (float l : logits) {
    if (std::isfinite(l)) max_logit = std::max(max_logit, static_cast<double>(l));
  }
  if (!std::isfinite(max_logit)) {
    throw ArgumentError("no sampleable token: every logit is -inf");
  }
  std::vector<Candidate> out;
  out.reserve(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) continue;
    const double p = std::exp((logits[i] - max_logit) / temperature);
    out.push_back({static_cast<TokenId>(i), p});
    total += p;
  }
  for (auto& c : out) c.prob /= total;
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.prob > b.prob;
                   });
  return out;
}

std::size_t NucleusSize(const std::vector<Candidate>& sorted, double top_p) {
  double cum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i].prob;
    if (cum >= top_p) return i + 1;
  }
  return sorted.size();
}

TokenId Argmax(std::span<const float> logits) {
  std::size_t best = logits.size();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) continue;
    if (best == logits.size() || logits[i] > logits[best]) best = i;
  }
  if (best == logits.size()) {
    throw ArgumentError("no sampleable token: every logit is -inf");
  }
  return static_cast<TokenId>(best);
}

}  // namespace

std::vector<TokenId> NucleusSet(std::span<const float> logits,
                                const SamplingParams& params) {
  if (params.temperature <= 0.0) return {Argmax(logits)};
  const auto sorted = SortedProbabilities(logits, params.temperature);
  const std::size_t n = NucleusSize(sorted, params.top_p);
  std::vector<TokenId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sorted[i].id);
  return out;
}

TokenId SampleNext(std::span<const float> logits, const SamplingParams& params,
                   std::mt19937_64& rng) {
  if (params.temperature <= 0.0) return Argmax(logits);
  const auto sorted = SortedProbabilities(logits, params.temperature);
  const std::size_t n = NucleusSize(sorted, params.top_p);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += sorted[i].prob;
  const double u = UniformUnit(rng) * mass;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += sorted[i].prob;
    if (u < cum) return sorted[i].id;
  }
  return sorted[n - 1].id;
}

TokenId SampleNext(std::span<const float> logits, const SamplingParams& params,
                   std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return SampleNext(logits, params, rng);
}

}  // namespace slam
