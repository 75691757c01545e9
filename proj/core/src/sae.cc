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

#include "slam/sae.h"

#include <cmath>
#include <string>

#include "slam/error.h"

namespace slam {

std::vector<double> EncodeToken(const SaeSpec& sae, std::span<const float> h) {
  if (h.size() != sae.d_model) {
    throw DimensionError("residual vector has length " +
                         std::to_string(h.size()) + ", SAE expects " +
                         std::to_string(sae.d_model));
  }
  std::vector<double> code(sae.n_features);
  for (std::size_t j = 0; j < sae.n_features; ++j) {
    const auto w = sae.encoder.row(j);
    double acc = sae.encoder_bias[j];
    for (std::size_t i = 0; i < h.size(); ++i) {
      acc += static_cast<double>(w[i]) * h[i];
    }
    code[j] = acc > 0.0 ? acc : 0.0;
  }
  return code;
}

PooledCode MeanPoolEncode(const SaeSpec& sae, const ActivationTrace& trace,
                          LayerId layer, bool skip_prompt) {
  const FloatMatrix& acts = trace.layer(layer);
  const std::size_t begin = skip_prompt ? trace.prompt_len : 0;
  const std::size_t end = trace.num_tokens();
  if (end <= begin) {
    throw ArgumentError("no tokens to pool: scored span is empty");
  }
  PooledCode pooled;
  pooled.values.assign(sae.n_features, 0.0);
  for (std::size_t t = begin; t < end; ++t) {
    const auto code = EncodeToken(sae, acts.row(t));
    for (std::size_t j = 0; j < code.size(); ++j) pooled.values[j] += code[j];
  }
  pooled.num_tokens = end - begin;
  const double inv = 1.0 / static_cast<double>(pooled.num_tokens);
  for (double& v : pooled.values) v *= inv;
  return pooled;
}

std::vector<float> DecodeDirection(const SaeSpec& sae,
                                   std::span<const double> mode,
                                   std::span<const double> delta_mu,
                                   bool* sign_tie) {
  if (mode.size() != sae.n_features || delta_mu.size() != sae.n_features) {
    throw DimensionError("mode and delta_mu must have n_features entries");
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < mode.size(); ++j) dot += mode[j] * delta_mu[j];
  if (sign_tie != nullptr) *sign_tie = (dot == 0.0);
  const double sign = dot < 0.0 ? -1.0 : 1.0;

  std::vector<double> out(sae.d_model, 0.0);
  for (std::size_t j = 0; j < mode.size(); ++j) {
    const double c = sign * mode[j];
    if (c <= 0.0) continue;
    const auto row = sae.decoder.row(j);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * row[i];
  }
  double norm2 = 0.0;
  for (double v : out) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  if (!(norm >= kDegenerateNorm)) {
    throw DegenerateDirectionError(
        "clipped mode has no positive mass through the decoder");
  }
  std::vector<float> dir(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    dir[i] = static_cast<float>(out[i] / norm);
  }
  return dir;
}

}  // namespace slam
