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

#include "slam/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include "slam/error.h"

namespace slam {
namespace {

template <typename T>
double DistinctImpl(const std::vector<T>& tokens, int n_max) {
  if (n_max < 1) throw ArgumentError("n_max must be >= 1");
  double total = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const std::size_t un = static_cast<std::size_t>(n);
    if (tokens.size() < un) {
      total += 1.0;
      continue;
    }
    std::set<std::vector<T>> seen;
    const std::size_t count = tokens.size() - un + 1;
    for (std::size_t i = 0; i < count; ++i) {
      seen.emplace(tokens.begin() + i, tokens.begin() + i + un);
    }
    total += static_cast<double>(seen.size()) / static_cast<double>(count);
  }
  return total / n_max;
}

std::map<WordSeq, std::size_t> Counts(const WordSeq& words, std::size_t n) {
  std::map<WordSeq, std::size_t> out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++out[WordSeq(words.begin() + i, words.begin() + i + n)];
  }
  return out;
}

}  // namespace

double DistinctN(const WordSeq& tokens, int n_max) {
  return DistinctImpl(tokens, n_max);
}

double DistinctN(const std::vector<TokenId>& tokens, int n_max) {
  return DistinctImpl(tokens, n_max);
}

double Bleu4(const WordSeq& hyp, const std::vector<WordSeq>& refs) {
  if (refs.empty()) throw ArgumentError("BLEU needs at least one reference");
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hyp_counts = Counts(hyp, n);
    std::map<WordSeq, std::size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : Counts(r, n)) {
        max_ref[g] = std::max(max_ref[g], c);
      }
    }
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [g, c] : hyp_counts) {
      total += c;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    const double num = matched == 0 ? kBleuEpsilon : static_cast<double>(matched);
    const double den = static_cast<double>(std::max<std::size_t>(1, total));
    log_sum += 0.25 * std::log(num / den);
  }
  // Closest reference length; ties go to the shorter reference.
  const auto c = static_cast<long>(hyp.size());
  long best = -1;
  for (const auto& r : refs) {
    const auto len = static_cast<long>(r.size());
    if (best < 0 || std::labs(len - c) < std::labs(best - c) ||
        (std::labs(len - c) == std::labs(best - c) && len < best)) {
      best = len;
    }
  }
  double bp = 1.0;
  if (c == 0) {
    bp = 0.0;
  } else if (c < best) {
    bp = std::exp(1.0 - static_cast<double>(best) / static_cast<double>(c));
  }
  return bp * std::exp(log_sum);
}

double SelfBleu(const std::vector<WordSeq>& corpus, std::vector<double>* per_text) {
  if (corpus.size() < 2) throw ArgumentError("Self-BLEU needs at least two texts");
  std::vector<double> scores;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<WordSeq> refs;
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (j != i) refs.push_back(corpus[j]);
    }
    scores.push_back(Bleu4(corpus[i], refs));
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  if (per_text != nullptr) *per_text = std::move(scores);
  return mean;
}

Rates TprFpr(const std::vector<ScoredText>& scores, double threshold) {
  Rates r;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& s : scores) {
    const bool flagged = s.z_hat >= threshold;
    if (s.watermarked) {
      ++r.positives;
      if (flagged) ++tp;
    } else {
      ++r.negatives;
      if (flagged) ++fp;
    }
  }
  if (r.positives > 0) r.tpr = static_cast<double>(tp) / static_cast<double>(r.positives);
  if (r.negatives > 0) r.fpr = static_cast<double>(fp) / static_cast<double>(r.negatives);
  return r;
}

double ConditionalPerplexity(const Backend& backend,
                             const std::vector<TokenId>& prompt,
                             const std::vector<TokenId>& continuation) {
  if (continuation.empty()) throw ArgumentError("perplexity of an empty continuation");
  if (prompt.empty()) throw ArgumentError("conditional perplexity needs a prompt");
  std::vector<TokenId> tokens = prompt;
  tokens.insert(tokens.end(), continuation.begin(), continuation.end());
  ForwardOptions fwd;
  fwd.logits_from = prompt.size() - 1;
  fwd.prompt_len = prompt.size();
  const ForwardResult res = backend.Forward(tokens, fwd);
  double nll = 0.0;
  for (std::size_t i = 0; i < continuation.size(); ++i) {
    const auto row = res.logits.row(i);  // predicts tokens[prompt.size() + i]
    double mx = -std::numeric_limits<double>::infinity();
    for (float l : row) mx = std::max(mx, static_cast<double>(l));
    double z = 0.0;
    for (float l : row) z += std::exp(static_cast<double>(l) - mx);
    nll -= static_cast<double>(row[continuation[i]]) - mx - std::log(z);
  }
  return std::exp(nll / static_cast<double>(continuation.size()));
}

double PplRatio(const Backend& backend, const std::vector<TokenId>& prompt,
                const std::vector<TokenId>& continuation_wm,
                const std::vector<TokenId>& continuation_bl) {
  return ConditionalPerplexity(backend, prompt, continuation_wm) /
         ConditionalPerplexity(backend, prompt, continuation_bl);
}

}  // namespace slam
