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

#include <algorithm>
#include <cmath>

#include "slam/error.h"
#include "slam/sae.h"
#include "test_util.h"

namespace slam {
namespace {

SaeSpec RandomSae(std::mt19937_64& rng, std::size_t f, std::size_t d, double bias_sigma = 0.5) {
  SaeSpec s;
  s.sae_id = "r";
  s.n_features = f;
  s.d_model = d;
  s.encoder = FloatMatrix(f, d);
  s.decoder = FloatMatrix(f, d);
  for (float& x : s.encoder.data()) x = static_cast<float>(StandardNormal(rng));
  for (float& x : s.decoder.data()) x = static_cast<float>(StandardNormal(rng));
  for (std::size_t j = 0; j < f; ++j) {
    s.encoder_bias.push_back(static_cast<float>(bias_sigma * StandardNormal(rng)));
  }
  return s;
}

std::vector<double> NaiveCode(const SaeSpec& s, std::span<const float> h) {
  std::vector<double> out(s.n_features);
  for (std::size_t j = 0; j < s.n_features; ++j) {
    double acc = s.encoder_bias[j];
    for (std::size_t i = 0; i < s.d_model; ++i) {
      acc += static_cast<double>(s.encoder(j, i)) * h[i];
    }
    out[j] = acc > 0.0 ? acc : 0.0;
  }
  return out;
}

TEST(EncodeToken, ZeroInputNonPositiveBiasGivesZero) {
  std::mt19937_64 rng(1);
  auto s = RandomSae(rng, 5, 3);
  for (float& b : s.encoder_bias) b = -std::abs(b);
  const std::vector<float> h(3, 0.0f);
  for (double v : EncodeToken(s, h)) EXPECT_EQ(v, 0.0);
}

TEST(EncodeToken, IdentityRowsGiveOneHot) {
  SaeSpec s;
  s.n_features = 3;
  s.d_model = 3;
  s.encoder = FloatMatrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  s.decoder = s.encoder;
  s.encoder_bias = {0, 0, 0};
  const std::vector<float> e1 = {0, 1, 0};
  EXPECT_EQ(EncodeToken(s, e1), (std::vector<double>{0, 1, 0}));
}

TEST(EncodeToken, MatchesNaiveMatvec) {
  std::mt19937_64 rng(2);
  const auto s = RandomSae(rng, 4, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> h(3);
    for (float& x : h) x = static_cast<float>(StandardNormal(rng));
    const auto got = EncodeToken(s, h);
    const auto want = NaiveCode(s, h);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got[j], want[j], 1e-9);
  }
}

TEST(EncodeToken, AlwaysNonNegative) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = RandomSae(rng, 7, 5, 2.0);
    std::vector<float> h(5);
    for (float& x : h) x = static_cast<float>(3.0 * StandardNormal(rng));
    for (double v : EncodeToken(s, h)) EXPECT_GE(v, 0.0);
  }
}

TEST(EncodeToken, DimensionMismatchThrows) {
  std::mt19937_64 rng(4);
  const auto s = RandomSae(rng, 2, 3);
  const std::vector<float> h(4, 0.0f);
  EXPECT_THROW(EncodeToken(s, h), DimensionError);
}

TEST(MeanPoolEncode, SingleTokenEqualsItsCode) {
  std::mt19937_64 rng(5);
  const auto s = RandomSae(rng, 6, 4);
  const auto t = testing::RandomTrace(rng, {0}, 1, 4);
  const auto pooled = MeanPoolEncode(s, t, 0, false);
  EXPECT_EQ(pooled.num_tokens, 1u);
  EXPECT_EQ(pooled.values, EncodeToken(s, t.layer(0).row(0)));
}

TEST(MeanPoolEncode, MatchesBruteForceAndIsNotCodeOfMean) {
  std::mt19937_64 rng(6);
  const auto s = RandomSae(rng, 6, 4);
  const auto t = testing::RandomTrace(rng, {0}, 5, 4);
  const auto pooled = MeanPoolEncode(s, t, 0, false);
  std::vector<double> sum(6, 0.0);
  std::vector<float> mean_h(4, 0.0f);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto c = NaiveCode(s, t.layer(0).row(r));
    for (std::size_t j = 0; j < 6; ++j) sum[j] += c[j];
    for (std::size_t i = 0; i < 4; ++i) mean_h[i] += t.layer(0)(r, i) / 5.0f;
  }
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(pooled.values[j], sum[j] / 5.0, 1e-9);
  const auto code_of_mean = NaiveCode(s, mean_h);
  double diff = 0.0;
  for (std::size_t j = 0; j < 6; ++j) diff += std::abs(code_of_mean[j] - pooled.values[j]);
  EXPECT_GT(diff, 1e-3);
}

TEST(MeanPoolEncode, PermutationInvariant) {
  std::mt19937_64 rng(7);
  const auto s = RandomSae(rng, 5, 3);
  auto t = testing::RandomTrace(rng, {0}, 6, 3);
  const auto a = MeanPoolEncode(s, t, 0, false);
  auto& m = t.activations.at(0);
  std::vector<float> rows = m.data();
  // Reverse the rows.
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t i = 0; i < 3; ++i) m(r, i) = rows[(5 - r) * 3 + i];
  }
  const auto b = MeanPoolEncode(s, t, 0, false);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.values[j], b.values[j], 1e-12);
}

TEST(MeanPoolEncode, SkipPromptAndEmptySpan) {
  std::mt19937_64 rng(8);
  const auto s = RandomSae(rng, 4, 3);
  auto t = testing::RandomTrace(rng, {0}, 4, 3, 3);
  const auto p = MeanPoolEncode(s, t, 0, true);
  EXPECT_EQ(p.num_tokens, 1u);
  EXPECT_EQ(p.values, EncodeToken(s, t.layer(0).row(3)));
  t.prompt_len = 4;
  EXPECT_THROW(MeanPoolEncode(s, t, 0, true), ArgumentError);
  EXPECT_THROW(MeanPoolEncode(s, t, 9, false), ArgumentError);
}

// Independent clip -> matvec -> normalize.
std::vector<double> DecodeOracle(const SaeSpec& s, std::vector<double> v,
                                 const std::vector<double>& dmu) {
  double dot = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) dot += v[j] * dmu[j];
  if (dot < 0) {
    for (double& x : v) x = -x;
  }
  std::vector<double> out(s.d_model, 0.0);
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double c = std::max(0.0, v[j]);
    for (std::size_t i = 0; i < s.d_model; ++i) out[i] += c * s.decoder(j, i);
  }
  double n = 0.0;
  for (double x : out) n += x * x;
  for (double& x : out) x /= std::sqrt(n);
  return out;
}

TEST(DecodeDirection, OneHotGivesNormalizedDecoderRow) {
  std::mt19937_64 rng(9);
  const auto s = RandomSae(rng, 4, 5);
  std::vector<double> v(4, 0.0);
  v[2] = 1.0;
  std::vector<double> dmu(4, 0.0);
  dmu[2] = 0.7;
  const auto d = DecodeDirection(s, v, dmu);
  double n = 0.0;
  for (std::size_t i = 0; i < 5; ++i) n += s.decoder(2, i) * s.decoder(2, i);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(d[i], s.decoder(2, i) / std::sqrt(n), 1e-6);
  // Negated mode is sign-aligned back to the same result.
  v[2] = -1.0;
  EXPECT_EQ(DecodeDirection(s, v, dmu), d);
}

TEST(DecodeDirection, MixedSignsMatchOracle) {
  std::mt19937_64 rng(10);
  const auto s = RandomSae(rng, 6, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = testing::Gaussian(rng, 6);
    const auto dmu = testing::Gaussian(rng, 6);
    const auto got = DecodeDirection(s, v, dmu);
    const auto want = DecodeOracle(s, v, dmu);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(DecodeDirection, UnitNormScaleAndSignInvariance) {
  std::mt19937_64 rng(11);
  const auto s = RandomSae(rng, 8, 6);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = testing::Gaussian(rng, 8);
    const auto dmu = testing::Gaussian(rng, 8);
    const auto a = DecodeDirection(s, v, dmu);
    double n = 0.0;
    for (float x : a) n += static_cast<double>(x) * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    auto scaled = v;
    for (double& x : scaled) x *= 3.7;
    const auto b = DecodeDirection(s, scaled, dmu);
    auto neg = v;
    for (double& x : neg) x = -x;
    const auto c = DecodeDirection(s, neg, dmu);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(a[i], b[i], 1e-6);
      EXPECT_NEAR(a[i], c[i], 1e-6);
    }
  }
}

TEST(DecodeDirection, AllClippedIsDegenerate) {
  std::mt19937_64 rng(12);
  const auto s = RandomSae(rng, 3, 2);
  // After alignment with dmu the mode is non-positive everywhere.
  const std::vector<double> v = {-1.0, 0.0, 0.0};
  const std::vector<double> dmu = {-1.0, 0.0, 0.0};
  // v . dmu > 0, so no flip; clipping removes everything.
  EXPECT_THROW(DecodeDirection(s, v, dmu), DegenerateDirectionError);
}

TEST(DecodeDirection, ZeroDotReportsTie) {
  std::mt19937_64 rng(13);
  const auto s = RandomSae(rng, 2, 3);
  const std::vector<double> v = {1.0, 0.0};
  const std::vector<double> dmu = {0.0, 1.0};
  bool tie = false;
  DecodeDirection(s, v, dmu, &tie);
  EXPECT_TRUE(tie);
}

}  // namespace
}  // namespace slam
