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

#include "slam/synthetic.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "slam/crypto.h"
#include "slam/error.h"

namespace slam {
namespace {

using Json = nlohmann::json;

// Distinct sub-streams of the world seed.
constexpr std::uint64_t kStreamWords = 0x776f726473ULL;
constexpr std::uint64_t kStreamModel = 0x6d6f64656cULL;
constexpr std::uint64_t kStreamWorld = 0x776f726c64ULL;
constexpr std::uint64_t kStreamLexicon = 0x6c6578ULL;

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void Normalize(std::vector<double>& v) {
  const double n = std::sqrt(Dot(v, v));
  for (double& x : v) x /= n;
}

std::vector<double> GaussianVector(std::mt19937_64& rng, std::size_t n,
                                   double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * StandardNormal(rng);
  return v;
}

std::vector<std::string> MakeWords(std::size_t n, std::uint64_t seed) {
  static const char kConsonants[] = "bcdfghklmnprstvz";
  static const char kVowels[] = "aeiou";
  std::mt19937_64 rng(seed ^ kStreamWords);
  std::vector<std::string> words = {".", "<unk>"};
  std::set<std::string> seen(words.begin(), words.end());
  while (words.size() < n) {
    const std::size_t syllables = 1 + UniformIndex(rng, 4);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kConsonants[UniformIndex(rng, 16)];
      w += kVowels[UniformIndex(rng, 5)];
    }
    if (UniformIndex(rng, 2) == 0) w += kConsonants[UniformIndex(rng, 16)];
    if (w.size() < 3 || !seen.insert(w).second) continue;
    words.push_back(w);
  }
  return words;
}

}  // namespace

void BackendSpec::Validate() const {
  if (d_model == 0 || num_layers == 0) {
    throw ArgumentError("d_model and num_layers must be positive");
  }
  if (num_planted > d_model) {
    throw ArgumentError("num_planted (" + std::to_string(num_planted) +
                        ") exceeds d_model (" + std::to_string(d_model) + ")");
  }
  if (2 + 2 * num_planted * group_size > vocab_size) {
    throw ArgumentError("vocab_size too small for the planted token groups");
  }
  if (noise_sigma < 0.0 || plant_gain < 0.0) {
    throw ArgumentError("noise_sigma and plant_gain must be non-negative");
  }
  if (sentence_len < 2) throw ArgumentError("sentence_len must be >= 2");
}

// --- tokenizer --------------------------------------------------------------

SyntheticTokenizer::SyntheticTokenizer(std::vector<std::string> words)
    : words_(std::move(words)) {
  if (words_.size() < 2 || words_[0] != "." || words_[1] != "<unk>") {
    throw ArgumentError("synthetic vocabulary must start with '.', '<unk>'");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<TokenId>(i));
  }
}

std::vector<TokenId> SyntheticTokenizer::Encode(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    std::size_t dots = 0;
    while (dots < word.size() && word[word.size() - 1 - dots] == '.') ++dots;
    const std::string_view core = word.substr(0, word.size() - dots);
    if (!core.empty()) {
      const auto it = index_.find(std::string(core));
      out.push_back(it == index_.end() ? kUnknownToken : it->second);
    }
    for (std::size_t d = 0; d < dots; ++d) out.push_back(kSeparatorToken);
    i = j;
  }
  return out;
}

std::string SyntheticTokenizer::Decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t >= words_.size()) throw ArgumentError("token id out of range");
    if (t == kSeparatorToken) {
      out += '.';
      continue;
    }
    if (!out.empty()) out += ' ';
    out += words_[t];
  }
  return out;
}

// --- backend ----------------------------------------------------------------

SyntheticBackend::SyntheticBackend(const BackendSpec& spec)
    : spec_(spec), tokenizer_((spec.Validate(), MakeWords(spec.vocab_size, spec.seed))) {
  const std::size_t d = spec.d_model;
  const std::size_t v = spec.vocab_size;
  std::mt19937_64 rng(spec.seed ^ kStreamModel);

  // Planted directions: modified Gram-Schmidt over Gaussian draws.
  for (std::size_t p = 0; p < spec.num_planted; ++p) {
    for (;;) {
      auto g = GaussianVector(rng, d, 1.0);
      for (const auto& q : planted_) {
        const double c = Dot(g, q);
        for (std::size_t i = 0; i < d; ++i) g[i] -= c * q[i];
      }
      if (std::sqrt(Dot(g, g)) < 1e-6) continue;
      Normalize(g);
      planted_.push_back(std::move(g));
      break;
    }
  }

  group_.assign(v, -1);
  sign_.assign(v, 0);
  for (std::size_t p = 0; p < spec.num_planted; ++p) {
    for (int s = 0; s < 2; ++s) {
      for (std::size_t k = 0; k < spec.group_size; ++k) {
        const std::size_t id = 2 + (2 * p + s) * spec.group_size + k;
        group_[id] = static_cast<int>(p);
        sign_[id] = s == 0 ? 1 : -1;
      }
    }
  }

  embed_.resize(v * d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t t = 0; t < v; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      embed_[t * d + i] = spec.embed_noise * StandardNormal(rng) * inv_sqrt_d;
    }
    if (group_[t] >= 0) {
      const auto& g = planted_[group_[t]];
      for (std::size_t i = 0; i < d; ++i) {
        embed_[t * d + i] += spec.planted_embed * sign_[t] * g[i];
      }
    }
  }

  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d);
  for (const auto& g : planted_) {
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), d);
    proj -= gv * gv.transpose();
  }
  for (std::size_t l = 0; l < spec.num_layers; ++l) {
    Eigen::MatrixXd m(d, d);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) m(r, c) = StandardNormal(rng) * inv_sqrt_d;
    }
    m = proj * m * proj;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double top = svd.singularValues()(0);
    if (top > 0.0) m *= spec.spectral_norm / top;
    std::vector<double> flat(d * d);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) flat[r * d + c] = m(r, c);
    }
    w_.push_back(std::move(flat));
    b_.push_back(GaussianVector(rng, d, spec.layer_bias_sigma));
  }
  unigram_ = GaussianVector(rng, v, spec.unigram_sigma);
}

std::vector<LayerId> SyntheticBackend::layers() const {
  std::vector<LayerId> out(spec_.num_layers);
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = static_cast<LayerId>(l);
  return out;
}

std::string SyntheticBackend::model_id() const {
  const Digest32 d = Sha256(BackendSpecToJson(spec_));
  return "synthetic-" + HexEncode(std::span(d).first(6));
}

void SyntheticBackend::ProjectComplement(std::vector<double>& v) const {
  for (const auto& g : planted_) {
    const double c = Dot(v, g);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * g[i];
  }
}

ForwardResult SyntheticBackend::Forward(std::span<const TokenId> tokens,
                                        const ForwardOptions& options) const {
  if (tokens.empty()) throw ArgumentError("forward needs at least one token");
  CheckPlan(options.plan);
  const std::size_t n = tokens.size();
  const std::size_t d = spec_.d_model;
  const std::size_t v = spec_.vocab_size;
  for (TokenId t : tokens) {
    if (t >= v) throw ArgumentError("token id " + std::to_string(t) + " out of range");
  }
  if (options.logits_from >= n) {
    throw ArgumentError("logits_from must be < number of tokens");
  }
  if (options.prompt_len > n) throw ArgumentError("prompt_len exceeds tokens");
  CountForward();

  ForwardResult result;
  auto& trace = result.trace;
  trace.model_id = model_id();
  trace.d_model = d;
  trace.tokens.assign(tokens.begin(), tokens.end());
  trace.prompt_len = options.prompt_len;
  std::set<LayerId> record(options.record_layers.begin(), options.record_layers.end());
  for (LayerId l : record) {
    if (l < 0 || static_cast<std::size_t>(l) >= spec_.num_layers) {
      throw ArgumentError("cannot record layer " + std::to_string(l));
    }
    trace.layer_ids.push_back(l);
    trace.activations.emplace(l, FloatMatrix(n, d));
  }
  if (options.want_logits) result.logits = FloatMatrix(n - options.logits_from, v);

  std::vector<double> h(d);
  std::vector<double> pre(d);
  for (std::size_t t = options.logits_from; t < n; ++t) {
    const double* e = &embed_[tokens[t] * d];
    for (std::size_t i = 0; i < d; ++i) h[i] = e[i];
    if (t > 0) {
      const double* ep = &embed_[tokens[t - 1] * d];
      for (std::size_t i = 0; i < d; ++i) h[i] += spec_.prev_mix * ep[i];
    }
    for (std::size_t l = 0; l < spec_.num_layers; ++l) {
      const double* w = w_[l].data();
      for (std::size_t r = 0; r < d; ++r) {
        double acc = b_[l][r];
        const double* row = w + r * d;
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * h[c];
        pre[r] = std::tanh(acc);
      }
      ProjectComplement(pre);
      for (std::size_t i = 0; i < d; ++i) h[i] += pre[i];
      const LayerId lid = static_cast<LayerId>(l);
      if (options.plan != nullptr && t >= options.plan->apply_from_token) {
        const auto it = options.plan->per_layer.find(lid);
        if (it != options.plan->per_layer.end()) {
          for (std::size_t i = 0; i < d; ++i) h[i] += options.plan->alpha * it->second[i];
        }
      }
      if (record.count(lid) != 0) {
        auto row = trace.activations.at(lid).row(t);
        for (std::size_t i = 0; i < d; ++i) row[i] = static_cast<float>(h[i]);
      }
    }
    if (options.want_logits) {
      std::vector<double> proj(planted_.size());
      for (std::size_t p = 0; p < planted_.size(); ++p) proj[p] = Dot(h, planted_[p]);
      auto out = result.logits.row(t - options.logits_from);
      for (std::size_t tok = 0; tok < v; ++tok) {
        double logit = unigram_[tok];
        if (group_[tok] >= 0) {
          const double a = sign_[tok] * proj[group_[tok]] - spec_.readout_threshold;
          if (a > 0.0) logit += spec_.readout_gain * a;
        }
        out[tok] = static_cast<float>(logit);
      }
    }
  }
  return result;
}

// --- world ------------------------------------------------------------------

SyntheticWorld::SyntheticWorld(const BackendSpec& spec)
    : backend_(std::make_shared<SyntheticBackend>(spec)) {
  const std::size_t d = spec.d_model;
  const std::size_t g_count = spec.num_planted;
  std::mt19937_64 rng(spec.seed ^ kStreamWorld);

  for (std::size_t p = 0; p < g_count; ++p) {
    PhenomenonInfo info;
    info.name = "phen-" + std::to_string(p);
    info.index = p;
    const std::size_t span = spec.num_layers > 2 ? spec.num_layers - 2 : spec.num_layers;
    info.peak_layer = static_cast<LayerId>((spec.num_layers > 2 ? 1 : 0) +
                                           UniformIndex(rng, span));
    info.delta = spec.plant_gain * (1.0 + 0.5 * UniformUnit(rng));
    phenomena_.push_back(info);
  }

  // Domain nuisance: complement-space vectors with zero mean across domains.
  std::vector<std::vector<double>> raw;
  for (std::size_t k = 0; k < kNumDomains; ++k) {
    auto v = GaussianVector(rng, d, 1.0);
    backend_->ProjectComplement(v);
    raw.push_back(std::move(v));
  }
  std::vector<double> mean(d, 0.0);
  for (const auto& v : raw) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += v[i] / kNumDomains;
  }
  for (std::size_t k = 0; k < kNumDomains; ++k) {
    for (std::size_t i = 0; i < d; ++i) raw[k][i] -= mean[i];
    domains_.push_back("domain-" + std::to_string(k));
  }
  // Rescale all by one common factor so the zero mean survives.
  double avg_norm = 0.0;
  for (const auto& v : raw) avg_norm += std::sqrt(Dot(v, v)) / kNumDomains;
  for (auto& v : raw) {
    for (double& x : v) x *= kNuisanceScale / avg_norm;
  }
  nuisance_ = raw;

  // Dictionary rows.
  std::vector<std::vector<double>> rows;
  std::vector<double> bias;
  for (std::size_t p = 0; p < g_count; ++p) {
    for (double s : {1.0, -1.0}) {
      std::vector<double> r = backend_->planted()[p];
      for (double& x : r) x *= s;
      rows.push_back(std::move(r));
      bias.push_back(kPlantedBias);
    }
  }
  for (const auto& v : nuisance_) {
    std::vector<double> r = v;
    Normalize(r);
    rows.push_back(std::move(r));
    bias.push_back(0.0);
  }
  const std::size_t first_distractor = rows.size();
  while (rows.size() < kSaeFeatures) {
    auto r = GaussianVector(rng, d, 1.0);
    Normalize(r);
    rows.push_back(std::move(r));
    bias.push_back(0.0);  // calibrated per layer below
  }

  // Calibrate distractor biases on unsteered traces carrying the same
  // isotropic noise as contrastive pairs. A unit row sees that noise as
  // N(0, sigma^2) on its pre-activation.
  std::vector<ActivationTrace> calib;
  std::mt19937_64 calib_rng(spec.seed ^ kStreamWorld ^ 0xca11bULL);
  for (int i = 0; i < 32; ++i) calib.push_back(BaseTrace(calib_rng, 24));

  for (std::size_t l = 0; l < spec.num_layers; ++l) {
    SaeSpec sae;
    sae.layer = static_cast<LayerId>(l);
    sae.sae_id = "synthetic-sae-L" + std::to_string(l);
    sae.n_features = rows.size();
    sae.d_model = d;
    sae.encoder = FloatMatrix(rows.size(), d);
    sae.decoder = FloatMatrix(rows.size(), d);
    sae.encoder_bias.resize(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t i = 0; i < d; ++i) {
        sae.encoder(j, i) = static_cast<float>(rows[j][i]);
        sae.decoder(j, i) = static_cast<float>(rows[j][i]);
      }
      sae.encoder_bias[j] = static_cast<float>(bias[j]);
    }
    for (std::size_t j = first_distractor; j < rows.size(); ++j) {
      std::vector<double> pre;
      for (const auto& tr : calib) {
        const auto& acts = tr.layer(sae.layer);
        for (std::size_t t = 0; t < tr.num_tokens(); ++t) {
          double acc = 0.0;
          for (std::size_t i = 0; i < d; ++i) acc += sae.encoder(j, i) * acts(t, i);
          pre.push_back(acc + spec.noise_sigma * StandardNormal(calib_rng));
        }
      }
      const auto q = static_cast<std::size_t>(
          std::floor((1.0 - kDistractorFiringRate) * static_cast<double>(pre.size() - 1)));
      std::nth_element(pre.begin(), pre.begin() + static_cast<std::ptrdiff_t>(q), pre.end());
      sae.encoder_bias[j] = static_cast<float>(-pre[q]);
    }
    saes_.push_back(std::move(sae));
  }
}

const SaeSpec& SyntheticWorld::sae(LayerId layer) const {
  for (const auto& s : saes_) {
    if (s.layer == layer) return s;
  }
  throw ArgumentError("no synthetic SAE at layer " + std::to_string(layer));
}

double SyntheticWorld::Profile(std::size_t p, LayerId layer) const {
  const double x = static_cast<double>(layer - phenomena_.at(p).peak_layer);
  return std::exp(-x * x / (2.0 * kProfileWidth * kProfileWidth));
}

ActivationTrace SyntheticWorld::BaseTrace(std::mt19937_64& rng,
                                          std::size_t n) const {
  const std::size_t v = spec().vocab_size;
  std::vector<TokenId> tokens(n);
  for (auto& t : tokens) t = static_cast<TokenId>(2 + UniformIndex(rng, v - 2));
  ForwardOptions opts;
  opts.record_layers = backend_->layers();
  opts.want_logits = false;
  return backend_->Forward(tokens, opts).trace;
}

std::map<std::string, std::vector<ContrastivePair>> SyntheticWorld::GeneratePairs(
    const PairOptions& options) const {
  const double sigma = options.noise_sigma < 0.0 ? spec().noise_sigma : options.noise_sigma;
  const std::size_t d = spec().d_model;
  std::mt19937_64 rng(options.seed);
  std::map<std::string, std::vector<ContrastivePair>> out;
  for (const auto& ph : phenomena_) {
    const auto& g = backend_->planted()[ph.index];
    auto& list = out[ph.name];
    for (std::size_t k = 0; k < domains_.size(); ++k) {
      for (std::size_t i = 0; i < options.pairs_per_domain; ++i) {
        ContrastivePair pair;
        pair.pair_id = ph.name + "/" + domains_[k] + "/" + std::to_string(i);
        pair.phenomenon = ph.name;
        pair.domain = domains_[k];
        pair.pos = BaseTrace(rng, options.tokens_per_text);
        pair.neg = pair.pos;
        for (LayerId l : pair.pos.layer_ids) {
          const double shift = ph.delta * Profile(ph.index, l);
          auto& pm = pair.pos.activations.at(l);
          auto& nm = pair.neg.activations.at(l);
          for (std::size_t t = 0; t < pm.rows(); ++t) {
            for (std::size_t c = 0; c < d; ++c) {
              const double base = pm(t, c);
              const double np = sigma * StandardNormal(rng);
              const double nn = sigma * StandardNormal(rng);
              pm(t, c) = static_cast<float>(base + shift * g[c] + nuisance_[k][c] + np);
              nm(t, c) = static_cast<float>(base - shift * g[c] + nn);
            }
          }
        }
        list.push_back(std::move(pair));
      }
    }
  }
  return out;
}

std::vector<TokenId> SyntheticWorld::RandomPrompt(std::mt19937_64& rng) const {
  const std::size_t v = spec().vocab_size;
  std::vector<TokenId> tokens;
  for (std::size_t i = 0; i + 1 < spec().sentence_len; ++i) {
    tokens.push_back(static_cast<TokenId>(2 + UniformIndex(rng, v - 2)));
  }
  tokens.push_back(kSeparatorToken);
  return tokens;
}

Lexicon SyntheticWorld::BuildLexicon() const {
  const auto& words =
      static_cast<const SyntheticTokenizer&>(backend_->tokenizer()).words();
  const std::size_t v = spec().vocab_size;
  Lexicon lex;
  std::map<std::pair<int, int>, std::vector<TokenId>> groups;
  std::vector<TokenId> ordinary;
  for (TokenId t = 2; t < v; ++t) {
    if (backend_->group_of(t) >= 0) {
      groups[{backend_->group_of(t), backend_->sign_of(t)}].push_back(t);
    } else {
      ordinary.push_back(t);
    }
  }
  auto link = [&](const std::vector<TokenId>& set) {
    for (TokenId a : set) {
      for (TokenId b : set) {
        if (a != b) lex[words[a]].push_back(words[b]);
      }
    }
  };
  for (const auto& [key, set] : groups) link(set);
  std::mt19937_64 rng(spec().seed ^ kStreamLexicon);
  for (std::size_t i = ordinary.size(); i > 1; --i) {
    std::swap(ordinary[i - 1], ordinary[UniformIndex(rng, i)]);
  }
  // About 70% of ordinary words are covered, in synonym sets of four.
  const std::size_t covered = (ordinary.size() * 7 / 10) / 4 * 4;
  for (std::size_t i = 0; i < covered; i += 4) {
    link({ordinary.begin() + i, ordinary.begin() + i + 4});
  }
  return lex;
}

std::string SyntheticWorld::world_id() const {
  const Digest32 d = Sha256(BackendSpecToJson(spec()));
  return HexEncode(std::span(d).first(8));
}

std::string BackendSpecToJson(const BackendSpec& s) {
  Json j;
  j["vocab_size"] = s.vocab_size;
  j["d_model"] = s.d_model;
  j["num_layers"] = s.num_layers;
  j["seed"] = s.seed;
  j["num_planted"] = s.num_planted;
  j["plant_gain"] = s.plant_gain;
  j["noise_sigma"] = s.noise_sigma;
  j["group_size"] = s.group_size;
  j["sentence_len"] = s.sentence_len;
  j["embed_noise"] = s.embed_noise;
  j["planted_embed"] = s.planted_embed;
  j["prev_mix"] = s.prev_mix;
  j["spectral_norm"] = s.spectral_norm;
  j["layer_bias_sigma"] = s.layer_bias_sigma;
  j["unigram_sigma"] = s.unigram_sigma;
  j["readout_gain"] = s.readout_gain;
  j["readout_threshold"] = s.readout_threshold;
  return j.dump(2);
}

BackendSpec BackendSpecFromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("backend spec: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ParseError("backend spec must be an object", 0);
  BackendSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "vocab_size") s.vocab_size = value.get<std::size_t>();
    else if (key == "d_model") s.d_model = value.get<std::size_t>();
    else if (key == "num_layers") s.num_layers = value.get<std::size_t>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else if (key == "num_planted") s.num_planted = value.get<std::size_t>();
    else if (key == "plant_gain") s.plant_gain = value.get<double>();
    else if (key == "noise_sigma") s.noise_sigma = value.get<double>();
    else if (key == "group_size") s.group_size = value.get<std::size_t>();
    else if (key == "sentence_len") s.sentence_len = value.get<std::size_t>();
    else if (key == "embed_noise") s.embed_noise = value.get<double>();
    else if (key == "planted_embed") s.planted_embed = value.get<double>();
    else if (key == "prev_mix") s.prev_mix = value.get<double>();
    else if (key == "spectral_norm") s.spectral_norm = value.get<double>();
    else if (key == "layer_bias_sigma") s.layer_bias_sigma = value.get<double>();
    else if (key == "unigram_sigma") s.unigram_sigma = value.get<double>();
    else if (key == "readout_gain") s.readout_gain = value.get<double>();
    else if (key == "readout_threshold") s.readout_threshold = value.get<double>();
    else throw ArgumentError("unknown backend spec key '" + key + "'");
  }
  s.Validate();
  return s;
}

}  // namespace slam
