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
// Keyed per-document feature selection.
//
// A document's seed is HMAC-SHA256(secret, utf8(doc_id) | 0x1F |
// le_u64(sentence_idx)). Uniforms are derived from the seed with a counter
// construction over SHA-256, so the draw is identical on every platform.
// Sampling is weighted without replacement using exponential keys: item r
// gets key u_r^(1/w_r) and the F largest keys win.

#ifndef SLAM_SELECTION_H_
#define SLAM_SELECTION_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slam/crypto.h"
#include "slam/types.h"

namespace slam {

// Throws ArgumentError on an empty doc_id.
Digest32 HmacSeed(const WatermarkKey& key, const std::string& doc_id,
                  std::uint64_t sentence_idx);

// u = first 8 bytes of SHA-256(seed | le_u64(counter)) read little-endian,
// divided by 2^64. A zero draw is lifted to 2^-64 so logs stay finite.
double UniformFromSeed(const Digest32& seed, std::uint64_t counter);

// SHA-256(seed | le_u64(index)); used to derive per-candidate generation
// seeds.
Digest32 DeriveSeed(const Digest32& seed, std::uint64_t index);

// Returns spec.features_per_doc records (fewer only when records with
// non-positive weight had to be skipped), ordered by descending key.
// Throws ArgumentError when the bank holds fewer than pool_size records or
// every pool weight is non-positive.
std::vector<FeatureRecord> SelectFeatures(const DirectionBank& bank,
                                          const SelectionSpec& spec,
                                          const Digest32& seed);

// Sentence index -> selection. A single entry at 0 unless
// spec.sentence_level is set.
std::map<std::size_t, std::vector<FeatureRecord>> SelectionForText(
    const WatermarkKey& key, const std::string& doc_id,
    const SelectionSpec& spec, const DirectionBank& bank,
    std::size_t num_sentences);

}  // namespace slam

#endif  // SLAM_SELECTION_H_
