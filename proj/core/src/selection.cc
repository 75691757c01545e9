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

#include "slam/selection.h"

#include <algorithm>
#include <cmath>

#include "slam/error.h"
#include "slam/log.h"

namespace slam {

Digest32 HmacSeed(const WatermarkKey& key, const std::string& doc_id,
                  std::uint64_t sentence_idx) {
  if (doc_id.empty()) {
    throw ArgumentError("doc_id must be non-empty for keyed selection");
  }
  key.Validate();
  std::vector<std::uint8_t> msg(doc_id.begin(), doc_id.end());
  msg.push_back(0x1f);
  AppendU64(msg, sentence_idx);
  return HmacSha256(key.secret, msg);
}

Digest32 DeriveSeed(const Digest32& seed, std::uint64_t index) {
  std::vector<std::uint8_t> msg(seed.begin(), seed.end());
  AppendU64(msg, index);
  return Sha256(msg);
}

double UniformFromSeed(const Digest32& seed, std::uint64_t counter) {
  const Digest32 d = DeriveSeed(seed, counter);
  const std::uint64_t x = LoadU64(std::span(d).first(8));
  if (x == 0) return 0x1.0p-64;
  return static_cast<double>(x) * 0x1.0p-64;
}

std::vector<FeatureRecord> SelectFeatures(const DirectionBank& bank,
                                          const SelectionSpec& spec,
                                          const Digest32& seed) {
  spec.Validate();
  if (bank.records.size() < spec.pool_size) {
    throw ArgumentError("bank has " + std::to_string(bank.records.size()) +
                        " records, selection pool needs " +
                        std::to_string(spec.pool_size));
  }
  // Records are stored composite-sorted, so the pool is the prefix. The
  // anchor tier (first anchor_size entries) is always inside the pool; it
  // only guarantees eligibility and gets no extra weight.
  struct Keyed {
    double key;  // ln(-ln u) - ln(w); smaller is better
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  for (std::size_t r = 0; r < spec.pool_size; ++r) {
    const FeatureRecord& rec = bank.records[r];
    const double q = spec.use_quality_weight ? rec.quality_weight : 1.0;
    const double base = rec.composite * q;
    if (!(base > 0.0)) {
      LogWarning("selection skips " + rec.feature_id +
                 ": non-positive weight");
      continue;
    }
    // u^(1/w) ordering computed in the log domain: maximizing ln(u)/w is
    // minimizing ln(-ln u) - ln w, which stays finite for tiny weights.
    const double log_w = std::log(base) / spec.temperature;
    const double u = UniformFromSeed(seed, r);
    keyed.push_back({std::log(-std::log(u)) - log_w, r});
  }
  if (keyed.empty()) {
    throw ArgumentError("every record in the selection pool has weight <= 0");
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const Keyed& a, const Keyed& b) { return a.key < b.key; });
  const std::size_t n = std::min(spec.features_per_doc, keyed.size());
  std::vector<FeatureRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(bank.records[keyed[i].index]);
  return out;
}

std::map<std::size_t, std::vector<FeatureRecord>> SelectionForText(
    const WatermarkKey& key, const std::string& doc_id,
    const SelectionSpec& spec, const DirectionBank& bank,
    std::size_t num_sentences) {
  std::map<std::size_t, std::vector<FeatureRecord>> out;
  const std::size_t n = spec.sentence_level ? std::max<std::size_t>(1, num_sentences) : 1;
  for (std::size_t s = 0; s < n; ++s) {
    out[s] = SelectFeatures(bank, spec, HmacSeed(key, doc_id, s));
  }
  return out;
}

}  // namespace slam
