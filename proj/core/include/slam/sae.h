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
// Sparse-autoencoder encode/decode used by feature mining. Detection never
// touches this module: it projects the residual stream onto pre-decoded
// directions instead.

#ifndef SLAM_SAE_H_
#define SLAM_SAE_H_

#include <span>
#include <vector>

#include "slam/types.h"

namespace slam {

// rectify(encoder * h + encoder_bias). Throws DimensionError when
// h.size() != d_model.
std::vector<double> EncodeToken(const SaeSpec& sae, std::span<const float> h);

// Mean of per-token codes. Tokens are encoded one at a time and pooled
// afterwards; pooling the residual first would feed the SAE an input it was
// never trained on.
struct PooledCode {
  std::vector<double> values;  // n_features, all >= 0
  std::size_t num_tokens = 0;
};

// Pools over all tokens, or over the continuation only when skip_prompt.
// Throws ArgumentError if the layer is missing or the span is empty.
PooledCode MeanPoolEncode(const SaeSpec& sae, const ActivationTrace& trace,
                          LayerId layer, bool skip_prompt);

// Norm below which a decoded direction is considered degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

// Maps an SAE-space mode to a residual-space unit vector: flip the mode so
// that mode . delta_mu > 0, clip negative entries, project through the
// decoder, normalise. A zero dot product keeps the sign as given and sets
// *sign_tie. Throws DegenerateDirectionError if the projection vanishes.
std::vector<float> DecodeDirection(const SaeSpec& sae,
                                   std::span<const double> mode,
                                   std::span<const double> delta_mu,
                                   bool* sign_tie = nullptr);

}  // namespace slam

#endif  // SLAM_SAE_H_
