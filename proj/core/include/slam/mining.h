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
// Contrastive feature mining.
//
// For one phenomenon and one layer, every pair (x+, x-) is mean-pool
// encoded through the SAE. Per-feature statistics over the pairs drive a
// two-stage funnel (gap fraction, then composite score); the surviving
// features' difference matrix is decomposed by SVD and each right singular
// vector becomes one residual-space direction via DecodeDirection.

#ifndef SLAM_MINING_H_
#define SLAM_MINING_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slam/types.h"

namespace slam {

struct ContrastivePair {
  std::string pair_id;
  std::string phenomenon;
  std::string domain;
  ActivationTrace pos;  // carries the target construction
  ActivationTrace neg;
};

struct ContrastiveStats {
  std::vector<double> delta_mu;  // mean over pairs of pooled(x+) - pooled(x-)
  std::map<std::string, std::vector<double>> per_domain_delta_mu;
  std::vector<double> gap_fraction;  // fraction with pooled(x+) > pooled(x-)
};

// Throws ArgumentError on an empty pair list.
ContrastiveStats ComputeContrastiveStats(std::span<const ContrastivePair> pairs,
                                         const SaeSpec& sae, LayerId layer);

// Purity is the gap fraction itself; kept as a named step so score tables
// read naturally.
std::vector<double> Purity(std::span<const double> gap_fraction);

inline constexpr double kConsistencyEpsilon = 1e-8;
inline constexpr double kConsistencyMax = 100.0;

// |mean| / (population std + eps) of each feature's per-domain delta_mu,
// clamped to [0, c_max]. Throws ArgumentError with fewer than two domains.
std::vector<double> Consistency(
    const std::map<std::string, std::vector<double>>& per_domain_delta_mu,
    double epsilon = kConsistencyEpsilon, double c_max = kConsistencyMax);

struct FunnelThresholds {
  double gap_min = 0.80;        // inclusive
  double composite_min = 0.05;  // inclusive
};

struct FeatureScore {
  double delta_mu = 0.0;
  double purity = 0.0;
  double consistency = 0.0;
  double composite = 0.0;
  double gap_fraction = 0.0;
};

struct MiningReport {
  std::string phenomenon;
  LayerId layer = 0;
  Polarity polarity = Polarity::kForward;
  std::size_t candidates_total = 0;
  std::size_t passed_gap = 0;
  std::size_t passed_composite = 0;
  std::map<std::size_t, FeatureScore> per_feature;
  std::size_t modes_extracted = 0;
  std::size_t records_admitted = 0;
  std::vector<std::string> warnings;
};

// Indices j with gap_fraction_j >= gap_min and
// |delta_mu_j| * purity_j * consistency_j >= composite_min, ascending.
// Fills the funnel counts and per-feature scores of *report when given.
std::vector<std::size_t> CompositeFilter(std::span<const double> delta_mu,
                                         std::span<const double> purity,
                                         std::span<const double> consistency,
                                         std::span<const double> gap_fraction,
                                         const FunnelThresholds& thresholds,
                                         MiningReport* report = nullptr);

// Row-major dense double matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) {
    return values[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

struct ModeSet {
  std::vector<std::vector<double>> modes;  // unit vectors, length cols
  std::vector<double> singular_values;     // descending, same length
  std::vector<bool> sign_ties;             // mode . delta_mu == 0
  std::vector<std::string> warnings;
};

// Top-k right singular vectors of `differences`, each flipped so that
// mode . delta_mu > 0. Requesting more modes than the numerical rank
// returns only rank modes and records a warning. Throws ArgumentError when
// rows < k.
ModeSet ModesFromDifferences(const DenseMatrix& differences,
                             std::span<const double> delta_mu, std::size_t k);

// Difference matrix D (one row per pair, pooled(x+) - pooled(x-)).
DenseMatrix DifferenceMatrix(std::span<const ContrastivePair> pairs,
                             const SaeSpec& sae, LayerId layer);

// SVD modes over all SAE features.
ModeSet SvdModes(std::span<const ContrastivePair> pairs, const SaeSpec& sae,
                 LayerId layer, std::size_t k);

struct MiningConfig {
  std::size_t k = 10;
  bool bidirectional = true;
  std::size_t cap = 200;
  std::uint64_t seed = 42;
  FunnelThresholds thresholds;
  // Records kept per phenomenon after merging layers; 0 means 2k.
  std::size_t max_records_per_phenomenon = 0;
};

// Deterministic uniform subsample without replacement of at most `cap`
// indices out of n, returned in ascending order.
std::vector<std::size_t> SubsampleIndices(std::size_t n, std::size_t cap,
                                          std::uint64_t seed);

// Copies of the pairs with x+ and x- exchanged.
std::vector<ContrastivePair> ReversePairs(std::span<const ContrastivePair> pairs);

// Mines one (phenomenon, layer) unit. Zero survivors yields an empty
// result. Reports (one per polarity) are appended to *reports when given.
std::vector<FeatureRecord> MinePhenomenon(std::span<const ContrastivePair> pairs,
                                          const SaeSpec& sae, LayerId layer,
                                          const MiningConfig& config,
                                          std::vector<MiningReport>* reports =
                                              nullptr);

// Mines every phenomenon at every layer that has an SAE, trims each
// phenomenon to its strongest records and merges into one sorted bank.
DirectionBank MineBank(const std::map<std::string, std::vector<ContrastivePair>>&
                           pairs_by_phenomenon,
                       const std::vector<SaeSpec>& saes,
                       const std::vector<LayerId>& layers,
                       const MiningConfig& config, const std::string& model_id,
                       std::vector<MiningReport>* reports = nullptr);

// Digest of the mining configuration recorded in DirectionBank::created_with.
std::string MiningConfigDigest(const MiningConfig& config,
                               const std::vector<LayerId>& layers);

}  // namespace slam

#endif  // SLAM_MINING_H_
