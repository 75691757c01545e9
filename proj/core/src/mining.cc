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

#include "slam/mining.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "slam/backend.h"
#include "slam/crypto.h"
#include "slam/error.h"
#include "slam/log.h"
#include "slam/parallel.h"
#include "slam/sae.h"

namespace slam {
namespace {

// Per-pair pooled differences plus the domain label of each row.
struct PairDifferences {
  DenseMatrix d;
  std::vector<std::string> domains;
};

PairDifferences ComputeDifferences(std::span<const ContrastivePair> pairs,
                                   const SaeSpec& sae, LayerId layer) {
  if (pairs.empty()) throw ArgumentError("contrastive stats need >= 1 pair");
  PairDifferences out;
  out.d = DenseMatrix(pairs.size(), sae.n_features);
  out.domains.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto pos = MeanPoolEncode(sae, pairs[i].pos, layer, false);
    const auto neg = MeanPoolEncode(sae, pairs[i].neg, layer, false);
    for (std::size_t j = 0; j < sae.n_features; ++j) {
      out.d(i, j) = pos.values[j] - neg.values[j];
    }
    out.domains.push_back(pairs[i].domain);
  }
  return out;
}

ContrastiveStats StatsFromDifferences(const PairDifferences& diffs) {
  const std::size_t n = diffs.d.rows;
  const std::size_t f = diffs.d.cols;
  ContrastiveStats stats;
  stats.delta_mu.assign(f, 0.0);
  stats.gap_fraction.assign(f, 0.0);
  std::map<std::string, std::size_t> domain_counts;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dom = stats.per_domain_delta_mu[diffs.domains[i]];
    if (dom.empty()) dom.assign(f, 0.0);
    ++domain_counts[diffs.domains[i]];
    for (std::size_t j = 0; j < f; ++j) {
      const double v = diffs.d(i, j);
      stats.delta_mu[j] += v;
      dom[j] += v;
      if (v > 0.0) stats.gap_fraction[j] += 1.0;
    }
  }
  for (std::size_t j = 0; j < f; ++j) {
    stats.delta_mu[j] /= static_cast<double>(n);
    stats.gap_fraction[j] /= static_cast<double>(n);
  }
  for (auto& [name, vec] : stats.per_domain_delta_mu) {
    const double inv = 1.0 / static_cast<double>(domain_counts[name]);
    for (double& v : vec) v *= inv;
  }
  return stats;
}

std::string RecordId(const std::string& phenomenon, LayerId layer,
                     Polarity polarity, std::size_t mode) {
  std::ostringstream os;
  os << phenomenon << "/L" << layer << "/"
     << (polarity == Polarity::kForward ? "fwd" : "rev") << "/m" << mode;
  return os.str();
}

// Mines one polarity of one unit; the pairs are already oriented.
std::vector<FeatureRecord> MineOriented(std::span<const ContrastivePair> pairs,
                                        const SaeSpec& sae, LayerId layer,
                                        const MiningConfig& config,
                                        Polarity polarity,
                                        MiningReport& report) {
  report.layer = layer;
  report.polarity = polarity;
  report.phenomenon = pairs.empty() ? "" : pairs.front().phenomenon;

  const PairDifferences diffs = ComputeDifferences(pairs, sae, layer);
  const ContrastiveStats stats = StatsFromDifferences(diffs);
  const auto purity = Purity(stats.gap_fraction);
  const auto consistency = Consistency(stats.per_domain_delta_mu);
  const auto survivors =
      CompositeFilter(stats.delta_mu, purity, consistency, stats.gap_fraction,
                      config.thresholds, &report);
  if (survivors.empty()) return {};

  // SVD over the surviving columns only; modes are embedded back into the
  // full feature space before decoding.
  DenseMatrix sub(diffs.d.rows, survivors.size());
  std::vector<double> sub_delta(survivors.size());
  for (std::size_t c = 0; c < survivors.size(); ++c) {
    sub_delta[c] = stats.delta_mu[survivors[c]];
    for (std::size_t r = 0; r < diffs.d.rows; ++r) {
      sub(r, c) = diffs.d(r, survivors[c]);
    }
  }
  std::size_t k = config.k;
  if (k > sub.rows) {
    report.warnings.push_back("k=" + std::to_string(k) + " exceeds " +
                              std::to_string(sub.rows) + " pairs; clamped");
    k = sub.rows;
  }
  ModeSet modes = ModesFromDifferences(sub, sub_delta, k);
  for (auto& w : modes.warnings) report.warnings.push_back(w);
  report.modes_extracted = modes.modes.size();

  std::vector<FeatureRecord> records;
  for (std::size_t m = 0; m < modes.modes.size(); ++m) {
    std::vector<double> full(sae.n_features, 0.0);
    for (std::size_t c = 0; c < survivors.size(); ++c) {
      full[survivors[c]] = modes.modes[m][c];
    }
    // Mode-level statistics: each pair's difference projected on the mode.
    std::map<std::string, std::vector<double>> per_domain;
    std::map<std::string, std::size_t> counts;
    double sum = 0.0;
    double positive = 0.0;
    for (std::size_t r = 0; r < sub.rows; ++r) {
      double proj = 0.0;
      for (std::size_t c = 0; c < sub.cols; ++c) {
        proj += sub(r, c) * modes.modes[m][c];
      }
      sum += proj;
      if (proj > 0.0) positive += 1.0;
      auto& slot = per_domain[diffs.domains[r]];
      if (slot.empty()) slot.assign(1, 0.0);
      slot[0] += proj;
      ++counts[diffs.domains[r]];
    }
    for (auto& [name, v] : per_domain) {
      v[0] /= static_cast<double>(counts[name]);
    }
    FeatureRecord rec;
    rec.phenomenon = report.phenomenon;
    rec.layer = layer;
    rec.mode_index = static_cast<int>(m);
    rec.polarity = polarity;
    rec.delta_mu = sum / static_cast<double>(sub.rows);
    rec.purity = positive / static_cast<double>(sub.rows);
    rec.consistency = Consistency(per_domain)[0];
    rec.composite = std::abs(rec.delta_mu) * rec.purity * rec.consistency;
    rec.quality_weight = 1.0;
    rec.feature_id = RecordId(rec.phenomenon, layer, polarity, m);
    if (rec.composite < config.thresholds.composite_min) {
      report.warnings.push_back(rec.feature_id + ": mode composite " +
                                std::to_string(rec.composite) +
                                " below threshold; dropped");
      continue;
    }
    try {
      rec.direction = DecodeDirection(sae, full, stats.delta_mu);
    } catch (const DegenerateDirectionError&) {
      report.warnings.push_back(rec.feature_id +
                                ": degenerate decoded direction; dropped");
      continue;
    }
    records.push_back(std::move(rec));
  }
  report.records_admitted = records.size();
  return records;
}

}  // namespace

ContrastiveStats ComputeContrastiveStats(std::span<const ContrastivePair> pairs,
                                         const SaeSpec& sae, LayerId layer) {
  return StatsFromDifferences(ComputeDifferences(pairs, sae, layer));
}

std::vector<double> Purity(std::span<const double> gap_fraction) {
  return {gap_fraction.begin(), gap_fraction.end()};
}

std::vector<double> Consistency(
    const std::map<std::string, std::vector<double>>& per_domain_delta_mu,
    double epsilon, double c_max) {
  if (per_domain_delta_mu.size() < 2) {
    throw ArgumentError("consistency needs at least two domains, got " +
                        std::to_string(per_domain_delta_mu.size()));
  }
  const std::size_t f = per_domain_delta_mu.begin()->second.size();
  for (const auto& [name, v] : per_domain_delta_mu) {
    if (v.size() != f) throw DimensionError("domain " + name + " size mismatch");
  }
  const double nd = static_cast<double>(per_domain_delta_mu.size());
  std::vector<double> out(f);
  for (std::size_t j = 0; j < f; ++j) {
    double mean = 0.0;
    for (const auto& [name, v] : per_domain_delta_mu) mean += v[j];
    mean /= nd;
    double var = 0.0;
    for (const auto& [name, v] : per_domain_delta_mu) {
      var += (v[j] - mean) * (v[j] - mean);
    }
    const double sd = std::sqrt(var / nd);
    out[j] = std::clamp(std::abs(mean) / (sd + epsilon), 0.0, c_max);
  }
  return out;
}

std::vector<std::size_t> CompositeFilter(std::span<const double> delta_mu,
                                         std::span<const double> purity,
                                         std::span<const double> consistency,
                                         std::span<const double> gap_fraction,
                                         const FunnelThresholds& thresholds,
                                         MiningReport* report) {
  const std::size_t f = delta_mu.size();
  if (purity.size() != f || consistency.size() != f || gap_fraction.size() != f) {
    throw DimensionError("composite filter inputs disagree in length");
  }
  std::vector<std::size_t> survivors;
  std::size_t passed_gap = 0;
  for (std::size_t j = 0; j < f; ++j) {
    const double composite = std::abs(delta_mu[j]) * purity[j] * consistency[j];
    if (report != nullptr) {
      report->per_feature[j] = {delta_mu[j], purity[j], consistency[j],
                                composite, gap_fraction[j]};
    }
    if (gap_fraction[j] < thresholds.gap_min) continue;
    ++passed_gap;
    if (composite < thresholds.composite_min) continue;
    survivors.push_back(j);
  }
  if (report != nullptr) {
    report->candidates_total = f;
    report->passed_gap = passed_gap;
    report->passed_composite = survivors.size();
  }
  return survivors;
}

ModeSet ModesFromDifferences(const DenseMatrix& differences,
                             std::span<const double> delta_mu, std::size_t k) {
  if (delta_mu.size() != differences.cols) {
    throw DimensionError("delta_mu length must equal difference columns");
  }
  if (differences.rows < k) {
    throw ArgumentError("need at least k=" + std::to_string(k) +
                        " pairs, got " + std::to_string(differences.rows));
  }
  ModeSet out;
  if (k == 0 || differences.cols == 0) return out;

  Eigen::MatrixXd d(differences.rows, differences.cols);
  for (std::size_t r = 0; r < differences.rows; ++r) {
    for (std::size_t c = 0; c < differences.cols; ++c) d(r, c) = differences(r, c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = sv.size() > 0
                         ? sv(0) * static_cast<double>(std::max(d.rows(), d.cols())) *
                               std::numeric_limits<double>::epsilon()
                         : 0.0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  if (k > rank) {
    out.warnings.push_back("requested k=" + std::to_string(k) +
                           " modes but difference matrix has rank " +
                           std::to_string(rank));
    k = rank;
  }
  const Eigen::MatrixXd& v = svd.matrixV();
  for (std::size_t m = 0; m < k; ++m) {
    std::vector<double> mode(differences.cols);
    double dot = 0.0;
    for (std::size_t c = 0; c < differences.cols; ++c) {
      mode[c] = v(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(m));
      dot += mode[c] * delta_mu[c];
    }
    if (dot < 0.0) {
      for (double& x : mode) x = -x;
    }
    const bool tie = (dot == 0.0);
    if (tie) {
      out.warnings.push_back("mode " + std::to_string(m) +
                             " is orthogonal to delta_mu; sign left as computed");
    }
    out.modes.push_back(std::move(mode));
    out.singular_values.push_back(sv(static_cast<Eigen::Index>(m)));
    out.sign_ties.push_back(tie);
  }
  return out;
}

DenseMatrix DifferenceMatrix(std::span<const ContrastivePair> pairs,
                             const SaeSpec& sae, LayerId layer) {
  return ComputeDifferences(pairs, sae, layer).d;
}

ModeSet SvdModes(std::span<const ContrastivePair> pairs, const SaeSpec& sae,
                 LayerId layer, std::size_t k) {
  const PairDifferences diffs = ComputeDifferences(pairs, sae, layer);
  const ContrastiveStats stats = StatsFromDifferences(diffs);
  ModeSet modes = ModesFromDifferences(diffs.d, stats.delta_mu, k);
  for (const auto& w : modes.warnings) LogWarning(w);
  return modes;
}

std::vector<std::size_t> SubsampleIndices(std::size_t n, std::size_t cap,
                                          std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= cap) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `cap` slots are a uniform sample.
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + UniformIndex(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<ContrastivePair> ReversePairs(std::span<const ContrastivePair> pairs) {
  std::vector<ContrastivePair> out(pairs.begin(), pairs.end());
  for (auto& p : out) std::swap(p.pos, p.neg);
  return out;
}

std::vector<FeatureRecord> MinePhenomenon(std::span<const ContrastivePair> pairs,
                                          const SaeSpec& sae, LayerId layer,
                                          const MiningConfig& config,
                                          std::vector<MiningReport>* reports) {
  for (const auto& p : pairs) {
    if (p.phenomenon != pairs.front().phenomenon) {
      throw ArgumentError("MinePhenomenon expects pairs of one phenomenon");
    }
  }
  const auto keep = SubsampleIndices(pairs.size(), config.cap, config.seed);
  std::vector<ContrastivePair> sample;
  sample.reserve(keep.size());
  for (std::size_t i : keep) sample.push_back(pairs[i]);

  MiningReport forward_report;
  auto records = MineOriented(sample, sae, layer, config, Polarity::kForward,
                              forward_report);
  if (reports != nullptr) reports->push_back(forward_report);
  if (config.bidirectional) {
    const auto reversed = ReversePairs(sample);
    MiningReport reverse_report;
    auto rev = MineOriented(reversed, sae, layer, config, Polarity::kReverse,
                            reverse_report);
    if (reports != nullptr) reports->push_back(reverse_report);
    for (auto& r : rev) records.push_back(std::move(r));
  }
  return records;
}

DirectionBank MineBank(
    const std::map<std::string, std::vector<ContrastivePair>>& pairs_by_phenomenon,
    const std::vector<SaeSpec>& saes, const std::vector<LayerId>& layers,
    const MiningConfig& config, const std::string& model_id,
    std::vector<MiningReport>* reports) {
  struct Unit {
    const std::string* phenomenon;
    const std::vector<ContrastivePair>* pairs;
    const SaeSpec* sae;
    LayerId layer;
  };
  std::vector<Unit> units;
  for (const auto& [name, pairs] : pairs_by_phenomenon) {
    for (LayerId layer : layers) {
      const SaeSpec* sae = nullptr;
      for (const auto& s : saes) {
        if (s.layer == layer) sae = &s;
      }
      if (sae == nullptr) {
        throw ArgumentError("no SAE provided for layer " + std::to_string(layer));
      }
      units.push_back({&name, &pairs, sae, layer});
    }
  }

  std::vector<std::vector<FeatureRecord>> unit_records(units.size());
  std::vector<std::vector<MiningReport>> unit_reports(units.size());
  ParallelFor(units.size(), 0, [&](std::size_t i) {
    const Unit& u = units[i];
    unit_records[i] =
        MinePhenomenon(*u.pairs, *u.sae, u.layer, config, &unit_reports[i]);
  });

  const std::size_t per_phenomenon_cap = config.max_records_per_phenomenon == 0
                                             ? 2 * config.k
                                             : config.max_records_per_phenomenon;
  std::map<std::string, std::vector<FeatureRecord>> grouped;
  for (std::size_t i = 0; i < units.size(); ++i) {
    auto& dst = grouped[*units[i].phenomenon];
    for (auto& r : unit_records[i]) dst.push_back(std::move(r));
    if (reports != nullptr) {
      for (auto& rep : unit_reports[i]) reports->push_back(std::move(rep));
    }
  }

  DirectionBank bank;
  bank.model_id = model_id;
  bank.k = static_cast<int>(config.k);
  for (auto& [name, recs] : grouped) {
    SortRecords(recs);
    if (recs.size() > per_phenomenon_cap) recs.resize(per_phenomenon_cap);
    for (auto& r : recs) bank.records.push_back(std::move(r));
  }
  SortRecords(bank.records);
  bank.created_with = MiningConfigDigest(config, layers);
  bank.bank_id = "bank-" + bank.created_with.substr(0, 12);
  if (bank.records.size() < bank.pool_size) {
    LogWarning("mined bank has only " + std::to_string(bank.records.size()) +
               " records; shrinking selection pool");
    bank.pool_size = bank.records.size();
    bank.anchor_size = std::min(bank.anchor_size, bank.pool_size);
  }
  return bank;
}

std::string MiningConfigDigest(const MiningConfig& config,
                               const std::vector<LayerId>& layers) {
  std::ostringstream os;
  os.precision(17);
  os << "k=" << config.k << ";bidirectional=" << config.bidirectional
     << ";cap=" << config.cap << ";seed=" << config.seed
     << ";gap_min=" << config.thresholds.gap_min
     << ";composite_min=" << config.thresholds.composite_min
     << ";max_records=" << config.max_records_per_phenomenon << ";layers=";
  for (LayerId l : layers) os << l << ",";
  const Digest32 d = Sha256(os.str());
  return HexEncode(d);
}

}  // namespace slam
