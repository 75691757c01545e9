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
// Core domain types shared by every module: activation traces, SAE
// dictionaries, mined feature records and banks, watermark keys, null
// statistics and detection results.

#ifndef SLAM_TYPES_H_
#define SLAM_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace slam {

using TokenId = std::uint32_t;
using LayerId = int;

// Dense row-major float32 matrix. Storage is float32 because that is the
// interchange precision of traces and banks; arithmetic on it is done in
// double by the callers.
class FloatMatrix {
 public:
  FloatMatrix() = default;
  FloatMatrix(std::size_t rows, std::size_t cols);
  FloatMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  std::span<float> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  float& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  float operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const FloatMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Per-token residual-stream activations for one text.
struct ActivationTrace {
  std::string model_id;
  std::vector<LayerId> layer_ids;  // strictly increasing
  std::size_t d_model = 0;
  std::vector<TokenId> tokens;
  std::map<LayerId, FloatMatrix> activations;  // num_tokens x d_model each
  std::size_t prompt_len = 0;

  std::size_t num_tokens() const { return tokens.size(); }
  bool has_layer(LayerId layer) const {
    return activations.count(layer) != 0;
  }
  // Throws ArgumentError when `layer` was not recorded.
  const FloatMatrix& layer(LayerId layer) const;

  // Throws InvariantError / DimensionError on malformed traces.
  void Validate() const;

  bool operator==(const ActivationTrace&) const = default;
};

// Encode/decode pair of one sparse autoencoder. Codes are
// rectify(encoder * h + encoder_bias); decoder rows map features back into
// the residual stream.
struct SaeSpec {
  std::string sae_id;
  LayerId layer = 0;
  std::size_t n_features = 0;
  std::size_t d_model = 0;
  FloatMatrix encoder;  // n_features x d_model
  std::vector<float> encoder_bias;  // n_features
  FloatMatrix decoder;  // n_features x d_model

  void Validate() const;
  bool operator==(const SaeSpec&) const = default;
};

enum class Polarity { kForward, kReverse };

const char* PolarityName(Polarity p);
// Throws ArgumentError on anything but "forward" / "reverse".
Polarity ParsePolarity(const std::string& name);

// One mined structural direction in residual space.
struct FeatureRecord {
  std::string feature_id;
  std::string phenomenon;
  LayerId layer = 0;
  std::vector<float> direction;  // unit norm, length d_model
  int mode_index = 0;
  Polarity polarity = Polarity::kForward;
  double delta_mu = 0.0;
  double purity = 0.0;
  double consistency = 0.0;
  double composite = 0.0;
  double quality_weight = 1.0;

  // Checks unit norm (1e-6) and composite == |delta_mu|*purity*consistency
  // (1e-9). Throws InvariantError.
  void Validate() const;
  bool operator==(const FeatureRecord&) const = default;
};

// Versioned, composite-sorted collection of feature records.
struct DirectionBank {
  std::string bank_id;
  std::string model_id;
  int k = 1;
  std::vector<FeatureRecord> records;  // composite non-increasing
  std::size_t anchor_size = 5;
  std::size_t pool_size = 10;
  std::string created_with;  // digest of the mining configuration

  void Validate() const;
  // nullptr when absent.
  const FeatureRecord* Find(const std::string& feature_id) const;
  std::size_t d_model() const;
  bool operator==(const DirectionBank&) const = default;
};

// Sorts records by composite descending, ties broken by feature_id so the
// order is reproducible.
void SortRecords(std::vector<FeatureRecord>& records);

// Secret watermarking key. The secret must never be written into any
// artifact; only `key_id` and `Digest()` leave the process.
struct WatermarkKey {
  std::vector<std::uint8_t> secret;  // >= 16 bytes
  std::string key_id;

  static constexpr std::size_t kMinSecretBytes = 16;

  // Builds a key from raw bytes; key_id defaults to a short fingerprint.
  static WatermarkKey FromSecret(std::vector<std::uint8_t> secret,
                                 std::string key_id = "");
  // Parses a hex-encoded secret (whitespace tolerated).
  static WatermarkKey FromHex(const std::string& hex, std::string key_id = "");

  // One-way fingerprint used to tie null statistics to a key.
  std::string Digest() const;
  void Validate() const;
};

// Parameters of the per-document keyed feature selection.
struct SelectionSpec {
  std::size_t features_per_doc = 7;
  std::size_t pool_size = 10;
  std::size_t anchor_size = 5;
  double temperature = 0.3;
  bool sentence_level = false;
  bool use_quality_weight = true;

  void Validate() const;
  bool operator==(const SelectionSpec&) const = default;
};

struct FeatureNull {
  double mu = 0.0;
  double sigma = 1.0;
  bool operator==(const FeatureNull&) const = default;
};

// Null moments of per-token projections (per feature) and of the combined
// statistic (bank level).
struct NullStats {
  std::map<std::string, FeatureNull> per_feature;
  double mu_raw = 0.0;
  double sigma_raw = 1.0;
  std::size_t fitted_on = 0;
  std::string key_digest;
  std::string bank_id;
  SelectionSpec selection;

  void Validate() const;
  // Also checks coverage of every record in `bank`.
  void Validate(const DirectionBank& bank) const;
  bool operator==(const NullStats&) const = default;
};

struct DetectionResult {
  std::map<std::string, double> per_feature_z;
  std::set<std::string> active_set;
  double z_raw = 0.0;
  double z_hat = 0.0;
  bool decision = false;
  double threshold = 2.0;
  std::size_t num_tokens_scored = 0;
};

}  // namespace slam

#endif  // SLAM_TYPES_H_
