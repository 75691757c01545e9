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

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>

#include "slam/crypto.h"
#include "slam/error.h"
#include "slam/selection.h"
#include "test_util.h"

namespace slam {
namespace {

WatermarkKey SequentialKey() {
  std::vector<std::uint8_t> s(16);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<std::uint8_t>(i);
  return WatermarkKey::FromSecret(s, "seq");
}

WatermarkKey RandomKey(std::mt19937_64& rng) {
  std::vector<std::uint8_t> s(32);
  for (auto& b : s) b = static_cast<std::uint8_t>(rng());
  return WatermarkKey::FromSecret(s, "rk");
}

DirectionBank WeightedBank(const std::vector<double>& composites, std::size_t anchor = 0) {
  DirectionBank b;
  b.bank_id = "w";
  b.model_id = "m";
  for (std::size_t i = 0; i < composites.size(); ++i) {
    FeatureRecord r;
    r.feature_id = "f" + std::to_string(i);
    r.direction = {1.0f};
    r.delta_mu = composites[i];
    r.purity = 1.0;
    r.consistency = 1.0;
    r.composite = composites[i];
    b.records.push_back(r);
  }
  b.pool_size = composites.size();
  b.anchor_size = anchor == 0 ? composites.size() : anchor;
  return b;
}

SelectionSpec Spec(std::size_t f, std::size_t pool, double tau, std::size_t anchor = 0) {
  SelectionSpec s;
  s.features_per_doc = f;
  s.pool_size = pool;
  s.anchor_size = anchor == 0 ? std::min<std::size_t>(pool, f) : anchor;
  s.temperature = tau;
  return s;
}

Digest32 SeedFor(std::uint64_t i) {
  std::vector<std::uint8_t> m;
  AppendU64(m, i);
  return Sha256(m);
}

// Digests below were produced by a separate HMAC-SHA256 implementation over
// the message utf8(doc_id) | 0x1F | le_u64(sentence) with key bytes 0..15.
TEST(HmacSeed, MatchesReferenceDigests) {
  const auto key = SequentialKey();
  EXPECT_EQ(HexEncode(HmacSeed(key, "doc-1", 0)),
            "56d481d4f8dd7af5d3a0aa017a8ae81b51b52e348fb8e82a9750efc0fe3b1ee2");
  EXPECT_EQ(HexEncode(HmacSeed(key, "doc-1", 1)),
            "718a2d8b1cf2e05c26e6edb1556e9aee185dd4f52a27ece1507b57cedd2afc8f");
}

TEST(HmacSeed, SeparatorPreventsConcatenationAmbiguity) {
  const auto key = SequentialKey();
  EXPECT_EQ(HexEncode(HmacSeed(key, "doc1", 12)),
            "ff37eebcca94b6379986407ebb489300f74b744cd56a4c854de595475ae6b16a");
  EXPECT_EQ(HexEncode(HmacSeed(key, "doc11", 2)),
            "ccfca832e4d2d5bf411cc8dd1a5a7bc38cc117d374ec43a32e23d970ecfe33d6");
}

TEST(HmacSeed, DeterministicAndKeyDependent) {
  std::mt19937_64 rng(3);
  const auto k1 = RandomKey(rng);
  const auto k2 = RandomKey(rng);
  EXPECT_EQ(HmacSeed(k1, "x", 4), HmacSeed(k1, "x", 4));
  EXPECT_NE(HmacSeed(k1, "x", 4), HmacSeed(k2, "x", 4));
}

TEST(HmacSeed, EverySingleBitFlipOfSecretChangesSeed) {
  const auto key = SequentialKey();
  const auto ref = HmacSeed(key, "doc", 0);
  for (std::size_t byte = 0; byte < key.secret.size(); ++byte) {
    for (int bit = 0; bit < 8; ++bit) {
      auto s = key.secret;
      s[byte] ^= static_cast<std::uint8_t>(1u << bit);
      EXPECT_NE(HmacSeed(WatermarkKey::FromSecret(s), "doc", 0), ref);
    }
  }
}

TEST(HmacSeed, EmptyDocIdRejected) {
  EXPECT_THROW(HmacSeed(SequentialKey(), "", 0), ArgumentError);
}

TEST(UniformFromSeed, MatchesReferenceCounterConstruction) {
  const auto seed = HmacSeed(SequentialKey(), "doc-1", 0);
  EXPECT_DOUBLE_EQ(UniformFromSeed(seed, 0), 0.9393545282112028);
  EXPECT_DOUBLE_EQ(UniformFromSeed(seed, 1), 0.9180856644892453);
  EXPECT_DOUBLE_EQ(UniformFromSeed(seed, 2), 0.22020573721684905);
}

TEST(SelectFeatures, EqualWeightsExhaustPool) {
  const auto bank = WeightedBank({1, 1, 1, 1});
  const auto sel = SelectFeatures(bank, Spec(4, 4, 1.0), SeedFor(0));
  std::set<std::string> ids;
  for (const auto& r : sel) ids.insert(r.feature_id);
  EXPECT_EQ(ids.size(), 4u);
}

TEST(SelectFeatures, KeyOrderMatchesDirectExponentialKeys) {
  // Oracle: keys u_r^(1/w_r) evaluated directly, F largest win.
  std::mt19937_64 rng(5);
  std::vector<double> comp;
  for (int i = 0; i < 10; ++i) comp.push_back(3.0 - 0.2 * i);
  const auto bank = WeightedBank(comp, 5);
  const auto spec = Spec(7, 10, 0.3, 5);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto seed = SeedFor(t);
    std::vector<std::pair<double, std::size_t>> keys;
    for (std::size_t r = 0; r < 10; ++r) {
      const double w = std::pow(comp[r], 1.0 / 0.3);
      keys.push_back({std::pow(UniformFromSeed(seed, r), 1.0 / w), r});
    }
    std::sort(keys.rbegin(), keys.rend());
    const auto sel = SelectFeatures(bank, spec, seed);
    ASSERT_EQ(sel.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(sel[i].feature_id, "f" + std::to_string(keys[i].second));
    }
  }
}

TEST(SelectFeatures, UniformFrequenciesPassChiSquare) {
  constexpr int kTrials = 100000;
  const auto bank = WeightedBank(std::vector<double>(10, 1.0));
  const auto spec = Spec(1, 10, 1.0, 1);
  std::vector<double> counts(10, 0.0);
  for (int t = 0; t < kTrials; ++t) {
    const auto sel = SelectFeatures(bank, spec, SeedFor(static_cast<std::uint64_t>(t)));
    counts[std::stoul(sel[0].feature_id.substr(1))] += 1.0;
  }
  const double expected = kTrials / 10.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(9);
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  EXPECT_GT(p, 0.01) << "chi2=" << chi2;
}

TEST(SelectFeatures, ProportionalAtUnitTemperature) {
  constexpr int kTrials = 100000;
  const auto bank = WeightedBank({4.0, 1.0});
  const auto spec = Spec(1, 2, 1.0, 1);
  int first = 0;
  for (int t = 0; t < kTrials; ++t) {
    if (SelectFeatures(bank, spec, SeedFor(static_cast<std::uint64_t>(t)))[0].feature_id == "f0") {
      ++first;
    }
  }
  EXPECT_NEAR(static_cast<double>(first) / kTrials, 0.8, 0.01);
}

TEST(SelectFeatures, LowTemperatureConvergesToTopF) {
  const auto bank = WeightedBank({5, 4.5, 4, 3.5, 3, 2.5, 2, 1.5, 1, 0.5}, 5);
  const auto spec = Spec(3, 10, 0.01, 5);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto sel = SelectFeatures(bank, spec, SeedFor(t));
    std::set<std::string> ids;
    for (const auto& r : sel) ids.insert(r.feature_id);
    EXPECT_EQ(ids, (std::set<std::string>{"f0", "f1", "f2"}));
  }
}

TEST(SelectFeatures, AnchorIsNotForcedInclusion) {
  // F <= anchor: anchor records can still be passed over.
  const auto bank = WeightedBank(std::vector<double>(10, 1.0), 5);
  const auto spec = Spec(2, 10, 1.0, 5);
  bool outside = false;
  for (std::uint64_t t = 0; t < 500 && !outside; ++t) {
    const auto sel = SelectFeatures(bank, spec, SeedFor(t));
    for (const auto& r : sel) {
      if (std::stoul(r.feature_id.substr(1)) >= 5) outside = true;
    }
  }
  EXPECT_TRUE(outside);
}

TEST(SelectFeatures, OnlyPoolRecordsEligibleAndNoDuplicates) {
  std::mt19937_64 rng(8);
  const auto bank = testing::RandomBank(rng, 20, 4);
  const auto spec = Spec(7, 10, 0.3, 5);
  for (std::uint64_t t = 0; t < 300; ++t) {
    const auto sel = SelectFeatures(bank, spec, SeedFor(t));
    std::set<std::string> ids;
    for (const auto& r : sel) {
      ids.insert(r.feature_id);
      const auto it = std::find(bank.records.begin(), bank.records.end(), r);
      ASSERT_NE(it, bank.records.end());
      EXPECT_LT(static_cast<std::size_t>(it - bank.records.begin()), 10u);
    }
    EXPECT_EQ(ids.size(), 7u);
  }
}

TEST(SelectFeatures, NonPositiveWeightsSkippedThenRejected) {
  auto bank = WeightedBank({2.0, 1.0, 1.0});
  bank.records[2].quality_weight = 0.0;
  const auto sel = SelectFeatures(bank, Spec(3, 3, 1.0, 1), SeedFor(1));
  EXPECT_EQ(sel.size(), 2u);
  for (auto& r : bank.records) r.quality_weight = 0.0;
  EXPECT_THROW(SelectFeatures(bank, Spec(1, 3, 1.0, 1), SeedFor(1)), ArgumentError);
}

TEST(SelectFeatures, QualityWeightCanBeIgnored) {
  auto bank = WeightedBank({1.0, 1.0});
  bank.records[0].quality_weight = 0.0;
  auto spec = Spec(2, 2, 1.0, 1);
  spec.use_quality_weight = false;
  EXPECT_EQ(SelectFeatures(bank, spec, SeedFor(0)).size(), 2u);
}

TEST(SelectFeatures, BankSmallerThanPoolRejected) {
  const auto bank = WeightedBank({1, 1, 1});
  EXPECT_THROW(SelectFeatures(bank, Spec(2, 4, 1.0, 2), SeedFor(0)), ArgumentError);
}

TEST(SelectionForText, DocumentLevelHasOneEntry) {
  std::mt19937_64 rng(9);
  const auto bank = testing::RandomBank(rng, 12, 4);
  const auto key = RandomKey(rng);
  const auto m = SelectionForText(key, "doc", SelectionSpec{}, bank, 5);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m.count(0));
}

TEST(SelectionForText, SentenceLevelDeterministicPerSentence) {
  std::mt19937_64 rng(10);
  const auto bank = testing::RandomBank(rng, 12, 4);
  const auto key = RandomKey(rng);
  SelectionSpec spec;
  spec.sentence_level = true;
  const auto a = SelectionForText(key, "doc", spec, bank, 3);
  const auto b = SelectionForText(key, "doc", spec, bank, 3);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(a.at(s), SelectFeatures(bank, spec, HmacSeed(key, "doc", s)));
  }
}

TEST(SelectionForText, NeighbouringDocIdsGetDifferentSelections) {
  // Ordered 7-of-10 draws under equal weights collide with probability
  // 1/604800 per sentence; with three sentences a collision is ~2^-57.
  std::mt19937_64 rng(11);
  const auto bank = WeightedBank(std::vector<double>(10, 1.0), 5);
  SelectionSpec spec = Spec(7, 10, 1.0, 5);
  spec.sentence_level = true;
  int collisions = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto key = RandomKey(rng);
    if (SelectionForText(key, "doc-a", spec, bank, 3) ==
        SelectionForText(key, "doc-b", spec, bank, 3)) {
      ++collisions;
    }
  }
  EXPECT_EQ(collisions, 0);
}

}  // namespace
}  // namespace slam
