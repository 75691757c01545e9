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

#include "slam/detector.h"

#include <cmath>
#include <functional>

#include "slam/error.h"
#include "slam/log.h"
#include "slam/parallel.h"
#include "slam/selection.h"

namespace slam {
namespace {

using MeanFn = std::function<double(const FeatureRecord&, const TokenSpan&)>;

struct RawScore {
  std::map<std::string, double> per_feature_z;
  std::set<std::string> active_set;
  double z_raw = 0.0;
  std::size_t num_tokens = 0;
};

const FeatureNull& NullFor(const NullStats& nulls, const std::string& id) {
  const auto it = nulls.per_feature.find(id);
  if (it == nulls.per_feature.end()) {
    throw ArgumentError("null statistics have no entry for selected feature " + id);
  }
  return it->second;
}

StoufferResult ScoreSpan(const std::vector<FeatureRecord>& selected,
                         const TokenSpan& span, const NullStats& nulls,
                         const MeanFn& mean_fn, double z_min,
                         std::map<std::string, double>& z_out,
                         const std::string& suffix) {
  std::map<std::string, double> z;
  for (const auto& rec : selected) {
    const FeatureNull& null = NullFor(nulls, rec.feature_id);
    z[rec.feature_id] = FeatureZ(mean_fn(rec, span), span.end - span.begin, null);
  }
  for (const auto& [id, v] : z) z_out[id + suffix] = v;
  return Stouffer(z, z_min);
}

RawScore ScoreText(const std::vector<TokenId>& tokens, std::size_t prompt_len,
                   std::optional<TokenId> separator, const WatermarkKey& key,
                   const std::string& doc_id, const DirectionBank& bank,
                   const SelectionSpec& spec, const NullStats& nulls,
                   const MeanFn& mean_fn, double z_min) {
  if (tokens.size() <= prompt_len) {
    throw ArgumentError("no continuation tokens to score");
  }
  RawScore score;
  score.num_tokens = tokens.size() - prompt_len;
  if (!spec.sentence_level) {
    const auto sel = SelectFeatures(bank, spec, HmacSeed(key, doc_id, 0));
    const TokenSpan span{prompt_len, tokens.size()};
    const auto st = ScoreSpan(sel, span, nulls, mean_fn, z_min, score.per_feature_z, "");
    score.z_raw = st.z_raw;
    score.active_set = st.active_set;
    return score;
  }
  const auto spans = ContinuationSentences(tokens, prompt_len, separator);
  const auto selections = SelectionForText(key, doc_id, spec, bank, spans.size());
  std::map<std::string, double> sentence_z;
  std::map<std::string, std::set<std::string>> sentence_active;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const std::string suffix = "@" + std::to_string(s);
    const auto st = ScoreSpan(selections.at(s), spans[s], nulls, mean_fn, z_min,
                              score.per_feature_z, suffix);
    sentence_z[std::to_string(s)] = st.z_raw;
    for (const auto& id : st.active_set) sentence_active[std::to_string(s)].insert(id + suffix);
  }
  const auto combined = Stouffer(sentence_z, z_min);
  score.z_raw = combined.z_raw;
  for (const auto& s : combined.active_set) {
    for (const auto& id : sentence_active[s]) score.active_set.insert(id);
  }
  return score;
}

void CheckRegime(const NullStats& nulls, const WatermarkKey& key,
                 const DirectionBank& bank, const SelectionSpec& spec) {
  if (nulls.selection.sentence_level != spec.sentence_level) {
    throw ArgumentError(
        "null statistics were fitted with sentence_level=" +
        std::string(nulls.selection.sentence_level ? "true" : "false") +
        " but detection uses the other mode; refit the nulls");
  }
  if (!(nulls.selection == spec)) {
    LogWarning("selection spec differs from the one the nulls were fitted with");
  }
  if (!nulls.bank_id.empty() && nulls.bank_id != bank.bank_id) {
    LogWarning("null statistics were fitted for bank " + nulls.bank_id +
               ", detecting with " + bank.bank_id);
  }
  if (!nulls.key_digest.empty() && nulls.key_digest != key.Digest()) {
    LogWarning("null statistics were fitted under a different key");
  }
}

DetectionResult Finish(const RawScore& raw, const NullStats& nulls,
                       const DetectOptions& options) {
  DetectionResult r;
  r.per_feature_z = raw.per_feature_z;
  r.active_set = raw.active_set;
  r.z_raw = raw.z_raw;
  r.z_hat = Calibrate(raw.z_raw, nulls.mu_raw, nulls.sigma_raw);
  r.threshold = options.threshold;
  r.decision = r.z_hat >= options.threshold;
  r.num_tokens_scored = raw.num_tokens;
  return r;
}

std::vector<LayerId> SelectedLayers(const DirectionBank& bank, std::size_t pool) {
  std::set<LayerId> layers;
  for (std::size_t i = 0; i < pool && i < bank.records.size(); ++i) {
    layers.insert(bank.records[i].layer);
  }
  return {layers.begin(), layers.end()};
}

}  // namespace

ProjectionMean FeatureProjectionMean(const ActivationTrace& trace,
                                     const FeatureRecord& record,
                                     bool skip_prompt) {
  return FeatureProjectionMean(trace, record, skip_prompt ? trace.prompt_len : 0,
                               trace.num_tokens());
}

ProjectionMean FeatureProjectionMean(const ActivationTrace& trace,
                                     const FeatureRecord& record,
                                     std::size_t begin, std::size_t end) {
  if (end > trace.num_tokens() || begin >= end) {
    throw ArgumentError("no tokens to score for feature " + record.feature_id);
  }
  const FloatMatrix& acts = trace.layer(record.layer);
  if (acts.cols() != record.direction.size()) {
    throw DimensionError("feature " + record.feature_id +
                         " direction length does not match trace d_model");
  }
  double sum = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    const auto row = acts.row(t);
    double dot = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      dot += static_cast<double>(row[i]) * record.direction[i];
    }
    sum += dot;
  }
  return {sum / static_cast<double>(end - begin), end - begin};
}

double FeatureZ(double mean, std::size_t num_tokens, const FeatureNull& null) {
  if (!(null.sigma > 0.0)) throw InvariantError("null sigma must be positive");
  if (num_tokens == 0) throw ArgumentError("feature z needs T >= 1");
  return (mean - null.mu) / (null.sigma / std::sqrt(static_cast<double>(num_tokens)));
}

StoufferResult Stouffer(const std::map<std::string, double>& z_values,
                        double z_min) {
  StoufferResult r;
  double sum = 0.0;
  for (const auto& [id, z] : z_values) {
    if (z >= z_min) {
      r.active_set.insert(id);
      sum += z;
    }
  }
  if (!r.active_set.empty()) {
    r.z_raw = sum / std::sqrt(static_cast<double>(r.active_set.size()));
  }
  return r;
}

double Calibrate(double z_raw, double mu_raw, double sigma_raw) {
  if (!(sigma_raw > 0.0)) throw InvariantError("sigma_raw must be positive");
  return (z_raw - mu_raw) / sigma_raw;
}

std::vector<TokenSpan> ContinuationSentences(const std::vector<TokenId>& tokens,
                                             std::size_t prompt_len,
                                             std::optional<TokenId> separator) {
  std::vector<TokenSpan> out;
  std::size_t begin = prompt_len;
  if (separator.has_value()) {
    for (std::size_t t = prompt_len; t < tokens.size(); ++t) {
      if (tokens[t] == *separator) {
        out.push_back({begin, t + 1});
        begin = t + 1;
      }
    }
  }
  if (begin < tokens.size()) out.push_back({begin, tokens.size()});
  return out;
}

DetectionResult DetectFromTrace(const ActivationTrace& trace,
                                std::optional<TokenId> separator,
                                const WatermarkKey& key,
                                const std::string& doc_id,
                                const DirectionBank& bank,
                                const SelectionSpec& spec,
                                const NullStats& nulls,
                                const DetectOptions& options) {
  CheckRegime(nulls, key, bank, spec);
  const MeanFn mean_fn = [&](const FeatureRecord& rec, const TokenSpan& s) {
    return FeatureProjectionMean(trace, rec, s.begin, s.end).mean;
  };
  const auto raw = ScoreText(trace.tokens, trace.prompt_len, separator, key,
                             doc_id, bank, spec, nulls, mean_fn, options.z_min);
  return Finish(raw, nulls, options);
}

DetectionResult Detect(const Backend& backend,
                       const std::vector<TokenId>& tokens,
                       std::size_t prompt_len, const WatermarkKey& key,
                       const std::string& doc_id, const DirectionBank& bank,
                       const SelectionSpec& spec, const NullStats& nulls,
                       const DetectOptions& options) {
  if (tokens.size() <= prompt_len) {
    throw ArgumentError("no continuation tokens to score");
  }
  ForwardOptions fwd;
  fwd.record_layers = SelectedLayers(bank, spec.pool_size);
  fwd.logits_from = prompt_len;
  fwd.want_logits = false;
  fwd.prompt_len = prompt_len;
  const ForwardResult res = backend.Forward(tokens, fwd);
  return DetectFromTrace(res.trace, backend.tokenizer().SentenceSeparator(), key,
                         doc_id, bank, spec, nulls, options);
}

NullStats FitNulls(const Backend& backend,
                   const std::vector<BaselineText>& baseline,
                   const WatermarkKey& key, const DirectionBank& bank,
                   const SelectionSpec& spec, double z_min, std::size_t jobs) {
  spec.Validate();
  if (baseline.size() < kMinBaselineTexts) {
    throw ArgumentError("null fitting needs at least " +
                        std::to_string(kMinBaselineTexts) + " baseline texts, got " +
                        std::to_string(baseline.size()));
  }
  if (baseline.size() < kRecommendedBaselineTexts) {
    LogWarning("fitting nulls on " + std::to_string(baseline.size()) +
               " texts; 100 or more are recommended");
  }
  std::set<LayerId> layer_set;
  for (const auto& r : bank.records) layer_set.insert(r.layer);
  const std::vector<LayerId> layers(layer_set.begin(), layer_set.end());
  const std::size_t nrec = bank.records.size();

  // proj[text][record][t - prompt_len]
  std::vector<std::vector<std::vector<double>>> proj(baseline.size());
  ParallelFor(baseline.size(), jobs, [&](std::size_t i) {
    const BaselineText& text = baseline[i];
    if (text.tokens.size() <= text.prompt_len) {
      throw ArgumentError("baseline text " + text.doc_id + " has no continuation");
    }
    ForwardOptions fwd;
    fwd.record_layers = layers;
    fwd.logits_from = text.prompt_len;
    fwd.want_logits = false;
    fwd.prompt_len = text.prompt_len;
    const ForwardResult res = backend.Forward(text.tokens, fwd);
    auto& out = proj[i];
    out.resize(nrec);
    for (std::size_t r = 0; r < nrec; ++r) {
      const FeatureRecord& rec = bank.records[r];
      const FloatMatrix& acts = res.trace.layer(rec.layer);
      for (std::size_t t = text.prompt_len; t < text.tokens.size(); ++t) {
        const auto row = acts.row(t);
        double dot = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) {
          dot += static_cast<double>(row[k]) * rec.direction[k];
        }
        out[r].push_back(dot);
      }
    }
  });

  NullStats nulls;
  nulls.fitted_on = baseline.size();
  nulls.key_digest = key.Digest();
  nulls.bank_id = bank.bank_id;
  nulls.selection = spec;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < nrec; ++r) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& text : proj) {
      for (double v : text[r]) sum += v;
      count += text[r].size();
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& text : proj) {
      for (double v : text[r]) ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    if (!(sd > 0.0)) {
      throw InvariantError("per-token projection variance is zero for feature " +
                           bank.records[r].feature_id);
    }
    nulls.per_feature[bank.records[r].feature_id] = {mean, sd};
    index[bank.records[r].feature_id] = r;
  }

  const auto separator = backend.tokenizer().SentenceSeparator();
  std::vector<double> z_raw(baseline.size());
  ParallelFor(baseline.size(), jobs, [&](std::size_t i) {
    const BaselineText& text = baseline[i];
    const MeanFn mean_fn = [&](const FeatureRecord& rec, const TokenSpan& s) {
      const auto& v = proj[i][index.at(rec.feature_id)];
      double sum = 0.0;
      for (std::size_t t = s.begin; t < s.end; ++t) sum += v[t - text.prompt_len];
      return sum / static_cast<double>(s.end - s.begin);
    };
    z_raw[i] = ScoreText(text.tokens, text.prompt_len, separator, key, text.doc_id,
                         bank, spec, nulls, mean_fn, z_min)
                   .z_raw;
  });
  double m = 0.0;
  for (double z : z_raw) m += z;
  m /= static_cast<double>(z_raw.size());
  double ss = 0.0;
  for (double z : z_raw) ss += (z - m) * (z - m);
  nulls.mu_raw = m;
  nulls.sigma_raw = std::sqrt(ss / static_cast<double>(z_raw.size()));
  if (!(nulls.sigma_raw > 0.0)) {
    throw InvariantError("bank-level null sigma is zero; baseline corpus is degenerate");
  }
  return nulls;
}

}  // namespace slam
