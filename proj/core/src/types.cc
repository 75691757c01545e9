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

#include "slam/types.h"

#include <algorithm>
#include <cmath>

#include "slam/crypto.h"
#include "slam/error.h"

namespace slam {

FloatMatrix::FloatMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

FloatMatrix::FloatMatrix(std::size_t rows, std::size_t cols,
                         std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix payload has " + std::to_string(data_.size()) +
                         " values, expected " + std::to_string(rows * cols));
  }
}

const FloatMatrix& ActivationTrace::layer(LayerId layer) const {
  auto it = activations.find(layer);
  if (it == activations.end()) {
    throw ArgumentError("layer " + std::to_string(layer) +
                        " not present in trace");
  }
  return it->second;
}

void ActivationTrace::Validate() const {
  if (d_model == 0) throw InvariantError("trace d_model must be positive");
  if (prompt_len > tokens.size()) {
    throw InvariantError("prompt_len exceeds token count");
  }
  for (std::size_t i = 0; i < layer_ids.size(); ++i) {
    if (layer_ids[i] < 0) throw InvariantError("negative layer id in trace");
    if (i > 0 && layer_ids[i] <= layer_ids[i - 1]) {
      throw InvariantError("trace layer ids must be strictly increasing");
    }
  }
  if (activations.size() != layer_ids.size()) {
    throw InvariantError("trace layer list and activation map disagree");
  }
  for (LayerId l : layer_ids) {
    auto it = activations.find(l);
    if (it == activations.end()) {
      throw InvariantError("missing activations for layer " +
                           std::to_string(l));
    }
    if (it->second.rows() != tokens.size() || it->second.cols() != d_model) {
      throw DimensionError(
          "layer " + std::to_string(l) + " matrix is " +
          std::to_string(it->second.rows()) + "x" +
          std::to_string(it->second.cols()) + ", expected " +
          std::to_string(tokens.size()) + "x" + std::to_string(d_model));
    }
  }
}

void SaeSpec::Validate() const {
  if (n_features == 0 || d_model == 0) {
    throw InvariantError("SAE dimensions must be positive");
  }
  if (encoder.rows() != n_features || encoder.cols() != d_model) {
    throw DimensionError("SAE encoder must be n_features x d_model");
  }
  if (decoder.rows() != n_features || decoder.cols() != d_model) {
    throw DimensionError("SAE decoder must be n_features x d_model");
  }
  if (encoder_bias.size() != n_features) {
    throw DimensionError("SAE encoder bias must have n_features entries");
  }
}

const char* PolarityName(Polarity p) {
  return p == Polarity::kForward ? "forward" : "reverse";
}

Polarity ParsePolarity(const std::string& name) {
  if (name == "forward") return Polarity::kForward;
  if (name == "reverse") return Polarity::kReverse;
  throw ArgumentError("unknown polarity '" + name + "'");
}

void FeatureRecord::Validate() const {
  if (direction.empty()) {
    throw InvariantError(feature_id + ": empty direction");
  }
  double norm2 = 0.0;
  for (float v : direction) norm2 += static_cast<double>(v) * v;
  const double norm = std::sqrt(norm2);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw InvariantError(feature_id + ": direction norm " +
                         std::to_string(norm) + " is not 1");
  }
  if (purity < 0.0 || purity > 1.0) {
    throw InvariantError(feature_id + ": purity outside [0,1]");
  }
  if (consistency < 0.0 || composite < 0.0) {
    throw InvariantError(feature_id + ": negative consistency/composite");
  }
  if (quality_weight < 0.0 || quality_weight > 1.0) {
    throw InvariantError(feature_id + ": quality_weight outside [0,1]");
  }
  const double expected = std::abs(delta_mu) * purity * consistency;
  if (std::abs(composite - expected) > 1e-9 * std::max(1.0, expected)) {
    throw InvariantError(feature_id +
                         ": composite != |delta_mu| * purity * consistency");
  }
}

void SortRecords(std::vector<FeatureRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const FeatureRecord& a, const FeatureRecord& b) {
                     if (a.composite != b.composite) {
                       return a.composite > b.composite;
                     }
                     return a.feature_id < b.feature_id;
                   });
}

void DirectionBank::Validate() const {
  if (anchor_size > pool_size) {
    throw InvariantError("bank anchor_size exceeds pool_size");
  }
  if (pool_size > records.size()) {
    throw InvariantError("bank pool_size exceeds number of records");
  }
  std::set<std::string> ids;
  const std::size_t dim = records.empty() ? 0 : records.front().direction.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].Validate();
    if (records[i].direction.size() != dim) {
      throw DimensionError("bank records disagree on d_model");
    }
    if (!ids.insert(records[i].feature_id).second) {
      throw InvariantError("duplicate feature_id " + records[i].feature_id);
    }
    if (i > 0 && records[i].composite > records[i - 1].composite) {
      throw InvariantError("bank records are not sorted by composite");
    }
  }
}

const FeatureRecord* DirectionBank::Find(const std::string& feature_id) const {
  for (const auto& r : records) {
    if (r.feature_id == feature_id) return &r;
  }
  return nullptr;
}

std::size_t DirectionBank::d_model() const {
  return records.empty() ? 0 : records.front().direction.size();
}

WatermarkKey WatermarkKey::FromSecret(std::vector<std::uint8_t> secret,
                                      std::string key_id) {
  WatermarkKey key;
  key.secret = std::move(secret);
  key.Validate();
  if (key_id.empty()) {
    // Fingerprint under a distinct domain so it differs from Digest().
    std::vector<std::uint8_t> msg = {'k', 'e', 'y', '-', 'i', 'd', 0x1f};
    msg.insert(msg.end(), key.secret.begin(), key.secret.end());
    const Digest32 d = Sha256(msg);
    key_id = "key-" + HexEncode(std::span(d).first(4));
  }
  key.key_id = std::move(key_id);
  return key;
}

WatermarkKey WatermarkKey::FromHex(const std::string& hex, std::string key_id) {
  return FromSecret(HexDecode(hex), std::move(key_id));
}

std::string WatermarkKey::Digest() const {
  std::vector<std::uint8_t> msg = {'n', 'u', 'l', 'l', 's', 0x1f};
  msg.insert(msg.end(), secret.begin(), secret.end());
  const Digest32 d = Sha256(msg);
  return HexEncode(std::span(d).first(16));
}

void WatermarkKey::Validate() const {
  if (secret.size() < kMinSecretBytes) {
    throw ArgumentError("watermark key secret must be at least " +
                        std::to_string(kMinSecretBytes) + " bytes");
  }
}

void SelectionSpec::Validate() const {
  if (anchor_size > pool_size) {
    throw ArgumentError("selection anchor_size exceeds pool_size");
  }
  if (features_per_doc < 1 || features_per_doc > pool_size) {
    throw ArgumentError("features_per_doc must lie in [1, pool_size]");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ArgumentError("selection temperature must be positive");
  }
}

void NullStats::Validate() const {
  for (const auto& [id, n] : per_feature) {
    if (!(n.sigma > 0.0) || !std::isfinite(n.sigma) || !std::isfinite(n.mu)) {
      throw InvariantError("null sigma for " + id + " must be positive");
    }
  }
  if (!(sigma_raw > 0.0) || !std::isfinite(sigma_raw) ||
      !std::isfinite(mu_raw)) {
    throw InvariantError("bank-level null sigma must be positive");
  }
  selection.Validate();
}

void NullStats::Validate(const DirectionBank& bank) const {
  Validate();
  for (const auto& r : bank.records) {
    if (per_feature.count(r.feature_id) == 0) {
      throw InvariantError("null statistics missing feature " + r.feature_id);
    }
  }
}

}  // namespace slam
