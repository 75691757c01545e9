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

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "slam/detector.h"
#include "slam/error.h"
#include "slam/selection.h"
#include "test_util.h"

namespace slam {
namespace {

using testing::World;

// Every position's residual is the same fixed vector at every layer.
class ConstantBackend : public Backend {
 public:
  explicit ConstantBackend(std::size_t d) : d_(d) {}
  ForwardResult Forward(std::span<const TokenId> tokens,
                        const ForwardOptions& options) const override {
    CountForward();
    ForwardResult r;
    r.trace.model_id = "const";
    r.trace.d_model = d_;
    r.trace.tokens.assign(tokens.begin(), tokens.end());
    r.trace.prompt_len = options.prompt_len;
    r.trace.layer_ids = options.record_layers;
    for (LayerId l : options.record_layers) {
      FloatMatrix m(tokens.size(), d_);
      for (float& x : m.data()) x = 0.25f;
      r.trace.activations.emplace(l, std::move(m));
    }
    return r;
  }
  const Tokenizer& tokenizer() const override { return tok_; }
  std::vector<LayerId> layers() const override { return {0}; }
  std::size_t d_model() const override { return d_; }
  std::string model_id() const override { return "const"; }

 private:
  struct Tok : Tokenizer {
    std::vector<TokenId> Encode(std::string_view) const override { return {}; }
    std::string Decode(std::span<const TokenId>) const override { return ""; }
    std::size_t vocab_size() const override { return 4; }
  } tok_;
  std::size_t d_;
};

TEST(FeatureProjectionMean, ConstantRowsGiveInnerProduct) {
  std::mt19937_64 rng(1);
  auto t = testing::RandomTrace(rng, {0}, 9, 6);
  const auto h = testing::Gaussian(rng, 6);
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t i = 0; i < 6; ++i) t.activations.at(0)(r, i) = static_cast<float>(h[i]);
  }
  const auto rec = testing::RandomRecord(rng, "a/L0/fwd/m0", 6, 0, 1.0);
  double dot = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    dot += static_cast<double>(static_cast<float>(h[i])) * rec.direction[i];
  }
  const auto pm = FeatureProjectionMean(t, rec, false);
  EXPECT_NEAR(pm.mean, dot, 1e-12);
  EXPECT_EQ(pm.num_tokens, 9u);
}

TEST(FeatureProjectionMean, OrthogonalDirectionGivesZero) {
  std::mt19937_64 rng(2);
  auto t = testing::RandomTrace(rng, {0}, 5, 4);
  for (std::size_t r = 0; r < 5; ++r) t.activations.at(0)(r, 0) = 0.0f;
  FeatureRecord rec;
  rec.feature_id = "x";
  rec.direction = {1.0f, 0.0f, 0.0f, 0.0f};
  EXPECT_EQ(FeatureProjectionMean(t, rec, false).mean, 0.0);
}

TEST(FeatureProjectionMean, MatchesNaiveLoopAndSkipsPrompt) {
  std::mt19937_64 rng(3);
  const auto t = testing::RandomTrace(rng, {0, 2}, 10, 16, 3);
  const auto rec = testing::RandomRecord(rng, "a/L2/fwd/m0", 16, 2, 1.0);
  double sum = 0.0;
  for (std::size_t r = 3; r < 10; ++r) {
    for (std::size_t i = 0; i < 16; ++i) {
      sum += static_cast<double>(t.activations.at(2)(r, i)) * rec.direction[i];
    }
  }
  const auto pm = FeatureProjectionMean(t, rec);
  EXPECT_NEAR(pm.mean, sum / 7.0, 1e-9);
  EXPECT_EQ(pm.num_tokens, 7u);
}

TEST(FeatureProjectionMean, MissingLayerOrEmptySpanThrows) {
  std::mt19937_64 rng(4);
  const auto t = testing::RandomTrace(rng, {0}, 4, 3, 4);
  const auto rec = testing::RandomRecord(rng, "a/L0/fwd/m0", 3, 0, 1.0);
  EXPECT_THROW(FeatureProjectionMean(t, rec), ArgumentError);
  auto other = rec;
  other.layer = 5;
  EXPECT_THROW(FeatureProjectionMean(t, other, false), ArgumentError);
}

TEST(FeatureZ, HandValues) {
  const FeatureNull n{1.5, 0.4};
  EXPECT_EQ(FeatureZ(1.5, 10, n), 0.0);
  EXPECT_DOUBLE_EQ(FeatureZ(1.9, 1, n), 1.0);
  EXPECT_DOUBLE_EQ(FeatureZ(1.7, 16, n), 2.0);
  EXPECT_THROW(FeatureZ(1.0, 1, FeatureNull{0.0, 0.0}), InvariantError);
  EXPECT_THROW(FeatureZ(1.0, 0, n), ArgumentError);
}

TEST(Stouffer, HandValuesAndFilter) {
  EXPECT_DOUBLE_EQ(Stouffer({{"a", 3.0}}).z_raw, 3.0);
  EXPECT_DOUBLE_EQ(Stouffer({{"a", 2}, {"b", 2}, {"c", 2}, {"d", 2}}).z_raw, 4.0);
  const auto r = Stouffer({{"a", 3.0}, {"b", 0.4}, {"c", -1.0}});
  EXPECT_DOUBLE_EQ(r.z_raw, 3.0);
  EXPECT_EQ(r.active_set, (std::set<std::string>{"a"}));
  // The retention threshold is inclusive.
  EXPECT_EQ(Stouffer({{"a", 0.5}}).active_set.size(), 1u);
}

TEST(Stouffer, EmptyActiveSetGivesZero) {
  const auto r = Stouffer({{"a", 0.1}, {"b", -3.0}});
  EXPECT_EQ(r.z_raw, 0.0);
  EXPECT_TRUE(r.active_set.empty());
  EXPECT_EQ(Stouffer({}).z_raw, 0.0);
}

TEST(Stouffer, ExactFormulaUnderAdditionAndIncrease) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    std::map<std::string, double> z;
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double v = 0.5 + 3.0 * UniformUnit(rng);
      z["f" + std::to_string(i)] = v;
      sum += v;
    }
    EXPECT_NEAR(Stouffer(z).z_raw, sum / std::sqrt(5.0), 1e-12);
    auto up = z;
    up["f0"] += 0.1;
    EXPECT_GT(Stouffer(up).z_raw, Stouffer(z).z_raw);
    auto added = z;
    added["g"] = 0.5;
    EXPECT_NEAR(Stouffer(added).z_raw, (sum + 0.5) / std::sqrt(6.0), 1e-12);
  }
}

TEST(Calibrate, HandValuesAndInclusiveBoundary) {
  EXPECT_EQ(Calibrate(1.3, 1.3, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(Calibrate(1.0 + 2.0 * 0.5, 1.0, 0.5), 2.0);
  EXPECT_THROW(Calibrate(1.0, 0.0, 0.0), InvariantError);
  // Decision uses >= : a z_hat of exactly 2.0 is a positive.
  NullStats nulls;
  nulls.mu_raw = 0.0;
  nulls.sigma_raw = 1.0;
  nulls.per_feature["x"] = {0.0, 1.0};
  nulls.selection.features_per_doc = 1;
  nulls.selection.pool_size = 1;
  nulls.selection.anchor_size = 1;
  DirectionBank bank;
  bank.records.push_back(FeatureRecord{});
  bank.records[0].feature_id = "x";
  bank.records[0].direction = {1.0f};
  bank.records[0].composite = 1.0;
  ActivationTrace t;
  t.d_model = 1;
  t.layer_ids = {0};
  t.tokens = {5, 5, 5, 5};
  t.activations.emplace(0, FloatMatrix(4, 1, {1.0f, 1.0f, 1.0f, 1.0f}));
  const auto key = DemoKey(1);
  // mean 1, sigma 1, T = 4 -> z = 2 -> z_raw = 2 -> z_hat = 2.
  const auto r = DetectFromTrace(t, std::nullopt, key, "d", bank, nulls.selection, nulls);
  EXPECT_DOUBLE_EQ(r.z_hat, 2.0);
  EXPECT_TRUE(r.decision);
}

TEST(Calibrate, GaussianTailMatchesQuotedFalsePositiveRate) {
  // Under a standard normal null, P(z_hat >= 2) = Phi(-2) ~ 2.3%.
  const double tail = 0.5 * std::erfc(2.0 / std::sqrt(2.0));
  EXPECT_NEAR(tail, 0.0228, 1e-4);
  EXPECT_NEAR(tail, 0.023, 5e-4);
}

TEST(ContinuationSentences, SplitsAfterSeparator) {
  const std::vector<TokenId> t = {9, 9, 3, 4, 0, 5, 0, 6, 7};
  const auto s = ContinuationSentences(t, 2, TokenId{0});
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].begin, 2u);
  EXPECT_EQ(s[0].end, 5u);
  EXPECT_EQ(s[1].begin, 5u);
  EXPECT_EQ(s[1].end, 7u);
  EXPECT_EQ(s[2].end, 9u);
  EXPECT_EQ(ContinuationSentences(t, 2, std::nullopt).size(), 1u);
}

TEST(Detect, ExactlyOneForwardPerCall) {
  const auto& w = World();
  const auto& backend = w.world.backend();
  const auto& text = w.baseline[0];
  for (int i = 0; i < 100; ++i) {
    const auto before = backend.forward_count();
    Detect(backend, text.tokens, text.prompt_len, w.key, text.doc_id, w.bank, w.spec, w.nulls);
    EXPECT_EQ(backend.forward_count() - before, 1u);
  }
}

TEST(Detect, ProjectionScaleInvariance) {
  // Scaling activations and per-feature null moments by c leaves z_j fixed.
  std::mt19937_64 rng(6);
  auto t = testing::RandomTrace(rng, {0}, 12, 8, 2);
  const auto rec = testing::RandomRecord(rng, "a/L0/fwd/m0", 8, 0, 1.0);
  const FeatureNull n{0.1, 0.9};
  const auto pm = FeatureProjectionMean(t, rec);
  const double z = FeatureZ(pm.mean, pm.num_tokens, n);
  for (float& x : t.activations.at(0).data()) x *= 4.0f;
  const auto pm4 = FeatureProjectionMean(t, rec);
  EXPECT_NEAR(FeatureZ(pm4.mean, pm4.num_tokens, {0.4, 3.6}), z, 1e-9);
}

TEST(FitNulls, SelfStandardizesOnFittingCorpus) {
  const auto& w = World();
  const auto res = DetectCorpus(w.world.backend(), w.baseline, w.key, w.bank, w.spec, w.nulls);
  double m = 0.0;
  for (const auto& r : res) m += r.z_hat;
  m /= static_cast<double>(res.size());
  double ss = 0.0;
  for (const auto& r : res) ss += (r.z_hat - m) * (r.z_hat - m);
  EXPECT_NEAR(m, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(res.size())), 1.0, 1e-9);
}

TEST(FitNulls, DuplicatedCorpusGivesIdenticalNulls) {
  const auto& w = World();
  std::vector<BaselineText> sub(w.baseline.begin(), w.baseline.begin() + 40);
  auto twice = sub;
  twice.insert(twice.end(), sub.begin(), sub.end());
  const auto a = FitNulls(w.world.backend(), sub, w.key, w.bank, w.spec);
  const auto b = FitNulls(w.world.backend(), twice, w.key, w.bank, w.spec);
  for (const auto& [id, n] : a.per_feature) {
    EXPECT_NEAR(b.per_feature.at(id).mu, n.mu, 1e-12 * (1 + std::abs(n.mu)));
    EXPECT_NEAR(b.per_feature.at(id).sigma, n.sigma, 1e-12 * n.sigma);
  }
  EXPECT_NEAR(a.mu_raw, b.mu_raw, 1e-12);
  EXPECT_NEAR(a.sigma_raw, b.sigma_raw, 1e-12);
  EXPECT_EQ(b.fitted_on, 80u);
}

TEST(FitNulls, ConstantActivationsRejected) {
  std::mt19937_64 rng(7);
  const auto bank = testing::RandomBank(rng, 10, 4);
  std::vector<BaselineText> base(30);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = {"t" + std::to_string(i), {2, 2, 3, 3, 3}, 2};
  }
  ConstantBackend backend(4);
  EXPECT_THROW(FitNulls(backend, base, DemoKey(1), bank, SelectionSpec{}), InvariantError);
}

TEST(FitNulls, TooFewTextsRejected) {
  const auto& w = World();
  std::vector<BaselineText> few(w.baseline.begin(), w.baseline.begin() + 29);
  EXPECT_THROW(FitNulls(w.world.backend(), few, w.key, w.bank, w.spec), ArgumentError);
}

TEST(FitNulls, RecordsProvenanceWithoutSecret) {
  const auto& w = World();
  EXPECT_EQ(w.nulls.key_digest, w.key.Digest());
  EXPECT_EQ(w.nulls.bank_id, w.bank.bank_id);
  EXPECT_EQ(w.nulls.fitted_on, 100u);
  EXPECT_EQ(w.nulls.per_feature.size(), w.bank.records.size());
}

TEST(Detect, SentenceModeNeedsMatchingNulls) {
  const auto& w = World();
  SelectionSpec spec = w.spec;
  spec.sentence_level = true;
  const auto& text = w.baseline[0];
  EXPECT_THROW(Detect(w.world.backend(), text.tokens, text.prompt_len, w.key, text.doc_id,
                      w.bank, spec, w.nulls),
               ArgumentError);
}

TEST(Detect, SentenceModeScoresEverySentence) {
  const auto& w = World();
  SelectionSpec spec = w.spec;
  spec.sentence_level = true;
  const auto nulls = FitNulls(w.world.backend(), w.baseline, w.key, w.bank, spec);
  const auto& text = w.baseline[3];
  const auto r = Detect(w.world.backend(), text.tokens, text.prompt_len, w.key, text.doc_id,
                        w.bank, spec, nulls);
  const auto spans = ContinuationSentences(text.tokens, text.prompt_len, kSeparatorToken);
  ASSERT_GT(spans.size(), 1u);
  EXPECT_EQ(r.per_feature_z.size(), spans.size() * spec.features_per_doc);
  for (const auto& id : r.active_set) EXPECT_NE(id.find('@'), std::string::npos);
}

TEST(Detect, EmptyActiveSetCalibratesZeroRaw) {
  const auto& w = World();
  DetectOptions opt;
  opt.z_min = 1e9;
  const auto& text = w.baseline[1];
  const auto r = Detect(w.world.backend(), text.tokens, text.prompt_len, w.key, text.doc_id,
                        w.bank, w.spec, w.nulls, opt);
  EXPECT_TRUE(r.active_set.empty());
  EXPECT_EQ(r.z_raw, 0.0);
  EXPECT_DOUBLE_EQ(r.z_hat, -w.nulls.mu_raw / w.nulls.sigma_raw);
}

// Key separation: text watermarked under key A, scored under an unrelated
// key B (with B's own nulls), should look like unwatermarked text.
TEST(Detect, WrongKeyIsIndistinguishableFromNull) {
  const auto& w = World();
  const auto kb = DemoKey(8);
  const auto nb = FitNulls(w.world.backend(), w.baseline, kb, w.bank, w.spec);
  const auto wm =
      GenerateWatermarkedCorpus(w.world, "doc", 60, w.key, w.bank, w.spec, w.nulls, w.params);
  std::vector<BaselineText> texts;
  for (const auto& e : wm) texts.push_back(e.text);
  const auto wrong = DetectCorpus(w.world.backend(), texts, kb, w.bank, w.spec, nb);
  const auto clean = DetectCorpus(w.world.backend(),
                                  GenerateBaseline(w.world, "eval", 60, w.params), kb, w.bank,
                                  w.spec, nb);
  auto moments = [](const std::vector<DetectionResult>& v) {
    double m = 0.0;
    for (const auto& r : v) m += r.z_hat;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (const auto& r : v) ss += (r.z_hat - m) * (r.z_hat - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [m1, v1] = moments(wrong);
  const auto [m2, v2] = moments(clean);
  const double se = std::sqrt(v1 / 60.0 + v2 / 60.0);
  const double t = (m1 - m2) / se;
  const double df = (v1 / 60 + v2 / 60) * (v1 / 60 + v2 / 60) /
                    ((v1 / 60) * (v1 / 60) / 59 + (v2 / 60) * (v2 / 60) / 59);
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  EXPECT_GT(p, 0.01) << "wrong-key mean z_hat " << m1 << ", unwatermarked mean " << m2;
}

}  // namespace
}  // namespace slam
