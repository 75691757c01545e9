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
// Deterministic synthetic model and world.
//
// The model is attention-free: position t sees only its own token and the
// previous one,
//
//   x_t   = E[tok_t] + prev_mix * E[tok_{t-1}]
//   h     <- h + P tanh(W_l h + b_l)        for l = 0..L-1
//   logit = bias_v + readout_gain * max(0, s_v <g_p, h_L> - threshold)
//
// where P projects out the planted subspace span{g_1..g_G}. Planted
// components therefore flow unchanged from the embedding to the readout,
// and a steering vector along g_p added at any layer raises the logits of
// the "+" token group of phenomenon p (and lowers the "-" group). Every
// matrix is drawn from the spec seed.

#ifndef SLAM_SYNTHETIC_H_
#define SLAM_SYNTHETIC_H_

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "slam/attacks.h"
#include "slam/backend.h"
#include "slam/mining.h"
#include "slam/types.h"

namespace slam {

struct BackendSpec {
  std::size_t vocab_size = 256;
  std::size_t d_model = 64;
  std::size_t num_layers = 8;
  std::uint64_t seed = 7;
  std::size_t num_planted = 6;
  double plant_gain = 2.0;
  double noise_sigma = 0.5;

  // Shape of the model; rarely changed.
  std::size_t group_size = 8;        // tokens per planted group and sign
  std::size_t sentence_len = 16;     // tokens per synthetic sentence
  double embed_noise = 1.0;
  double planted_embed = 1.0;        // |<E[v], g_p>| for group tokens
  double prev_mix = 0.3;
  double spectral_norm = 0.95;
  double layer_bias_sigma = 0.1;
  double unigram_sigma = 0.5;
  double readout_gain = 4.0;
  double readout_threshold = 2.0;

  // Throws ArgumentError (e.g. num_planted > d_model).
  void Validate() const;
};

inline constexpr TokenId kSeparatorToken = 0;
inline constexpr TokenId kUnknownToken = 1;

class SyntheticTokenizer : public Tokenizer {
 public:
  // Word list indexed by token id; words[0] must be "." and words[1]
  // "<unk>".
  explicit SyntheticTokenizer(std::vector<std::string> words);

  // Whitespace split; a trailing '.' on a word becomes a separator token.
  // Unknown words map to <unk>.
  std::vector<TokenId> Encode(std::string_view text) const override;
  // Words joined by spaces, separators attached to the preceding word.
  std::string Decode(std::span<const TokenId> tokens) const override;
  std::size_t vocab_size() const override { return words_.size(); }
  std::optional<TokenId> SentenceSeparator() const override {
    return kSeparatorToken;
  }
  bool IsSpecial(TokenId token) const override { return token <= 1; }

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(const BackendSpec& spec);

  ForwardResult Forward(std::span<const TokenId> tokens,
                        const ForwardOptions& options) const override;
  const Tokenizer& tokenizer() const override { return tokenizer_; }
  std::vector<LayerId> layers() const override;
  std::size_t d_model() const override { return spec_.d_model; }
  std::string model_id() const override;

  const BackendSpec& spec() const { return spec_; }
  // G x d_model orthonormal rows.
  const std::vector<std::vector<double>>& planted() const { return planted_; }
  // Planted group of a token (-1 for none) and its sign (+1 / -1).
  int group_of(TokenId t) const { return group_[t]; }
  int sign_of(TokenId t) const { return sign_[t]; }
  // Projects v onto the complement of the planted subspace, in place.
  void ProjectComplement(std::vector<double>& v) const;

 private:
  BackendSpec spec_;
  SyntheticTokenizer tokenizer_;
  std::vector<std::vector<double>> planted_;
  std::vector<int> group_;
  std::vector<int> sign_;
  std::vector<double> embed_;               // V x d
  std::vector<std::vector<double>> w_;      // L of d x d (P W P, rescaled)
  std::vector<std::vector<double>> b_;      // L of d
  std::vector<double> unigram_;             // V
};

struct PhenomenonInfo {
  std::string name;
  std::size_t index = 0;
  LayerId peak_layer = 0;
  double delta = 0.0;  // plant_gain * (1 + 0.5 u)
};

struct PairOptions {
  std::size_t pairs_per_domain = 10;
  std::size_t tokens_per_text = 24;
  std::uint64_t seed = 1;
  // Negative means "use spec.noise_sigma".
  double noise_sigma = -1.0;
};

class SyntheticWorld {
 public:
  static constexpr std::size_t kNumDomains = 5;
  static constexpr std::size_t kSaeFeatures = 128;
  static constexpr double kPlantedBias = 8.0;
  static constexpr double kNuisanceScale = 1.0;
  static constexpr double kProfileWidth = 0.7;
  // Distractor biases put each distractor's firing rate near this value on
  // unsteered traces.
  static constexpr double kDistractorFiringRate = 0.01;

  explicit SyntheticWorld(const BackendSpec& spec);

  const BackendSpec& spec() const { return backend_->spec(); }
  const SyntheticBackend& backend() const { return *backend_; }
  std::shared_ptr<const SyntheticBackend> shared_backend() const {
    return backend_;
  }
  // One SAE per layer; the same dictionary with layer-calibrated biases.
  const std::vector<SaeSpec>& saes() const { return saes_; }
  const SaeSpec& sae(LayerId layer) const;
  const std::vector<PhenomenonInfo>& phenomena() const { return phenomena_; }
  const std::vector<std::string>& domains() const { return domains_; }
  const std::vector<std::vector<double>>& nuisance() const { return nuisance_; }

  // SAE feature indices of the planted rows: +g_p at 2p, -g_p at 2p + 1.
  // Nuisance rows follow, then distractors.
  static std::size_t PlantedFeature(std::size_t p, bool positive) {
    return 2 * p + (positive ? 0 : 1);
  }
  std::size_t first_distractor() const {
    return 2 * spec().num_planted + kNumDomains;
  }

  // Relative strength of phenomenon p's plant at a layer, in (0, 1].
  double Profile(std::size_t p, LayerId layer) const;

  std::map<std::string, std::vector<ContrastivePair>> GeneratePairs(
      const PairOptions& options) const;

  // 15 random ordinary words followed by a separator.
  std::vector<TokenId> RandomPrompt(std::mt19937_64& rng) const;

  // Synonyms: words of the same planted group and sign are synonyms of each
  // other; ordinary words come in small synonym sets with a fraction left
  // uncovered.
  Lexicon BuildLexicon() const;

  // Digest of the spec used as the world id.
  std::string world_id() const;

 private:
  ActivationTrace BaseTrace(std::mt19937_64& rng, std::size_t n) const;

  std::shared_ptr<SyntheticBackend> backend_;
  std::vector<SaeSpec> saes_;
  std::vector<PhenomenonInfo> phenomena_;
  std::vector<std::string> domains_;
  std::vector<std::vector<double>> nuisance_;
};

std::string BackendSpecToJson(const BackendSpec& spec);
// Unknown keys are rejected; missing keys keep defaults.
BackendSpec BackendSpecFromJson(const std::string& text);

}  // namespace slam

#endif  // SLAM_SYNTHETIC_H_
