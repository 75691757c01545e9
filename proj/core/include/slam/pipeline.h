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
// End-to-end plumbing shared by the command-line tool, the sweep and the
// acceptance suite: documents on disk, synthetic-world materialization,
// corpus generation/detection and the ablation sweep.

#ifndef SLAM_PIPELINE_H_
#define SLAM_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "slam/attacks.h"
#include "slam/backend.h"
#include "slam/detector.h"
#include "slam/generator.h"
#include "slam/mining.h"
#include "slam/synthetic.h"
#include "slam/types.h"

namespace slam {

// A text split into the prompt it was conditioned on and its continuation.
// Any other JSON fields ride along in `meta`.
struct Document {
  std::string doc_id;
  std::string prompt;
  std::string continuation;
  nlohmann::json meta = nlohmann::json::object();
};

std::string SerializeDocument(const Document& doc);
Document DeserializeDocument(const std::string& text);
// Writes <dir>/<doc_id>.json.
void SaveDocument(const Document& doc, const std::filesystem::path& dir);
// Every *.json in dir, ordered by file name.
std::vector<Document> LoadDocuments(const std::filesystem::path& dir);

// prompt + continuation tokens and the prompt length.
BaselineText DocumentTokens(const Tokenizer& tok, const Document& doc);
Document MakeDocument(const Tokenizer& tok, const std::string& doc_id,
                      const std::vector<TokenId>& prompt,
                      const std::vector<TokenId>& continuation);

// Deterministic demo key for a synthetic world. Not for real use.
WatermarkKey DemoKey(std::uint64_t seed);

// 64-bit seed from SHA-256(label | 0x1F | le_u64(a) | le_u64(b)).
std::uint64_t DeriveU64(const std::string& label, std::uint64_t a,
                        std::uint64_t b = 0);

// Generation defaults for the synthetic backend (forced separators).
GenerationParams SyntheticGenerationParams(const BackendSpec& spec);

// Prompt i of a named stream; streams are disjoint random sequences.
std::vector<TokenId> StreamPrompt(const SyntheticWorld& world,
                                  const std::string& stream, std::size_t i);

// Unwatermarked continuations for prompts 0..count-1 of `stream`, doc ids
// "<stream>-NNNN".
std::vector<BaselineText> GenerateBaseline(const SyntheticWorld& world,
                                           const std::string& stream,
                                           std::size_t count,
                                           const GenerationParams& params,
                                           std::size_t jobs = 0);

// Same records with each direction replaced by a random unit vector.
DirectionBank RandomDirectionBank(const DirectionBank& bank, std::uint64_t seed);

// Scores pool records by how little steering with each one alone inflates
// continuation perplexity: q = min(1, mean PPL(unsteered) / PPL(steered)).
void AssignQualityWeights(const Backend& backend, DirectionBank& bank,
                          const std::vector<std::vector<TokenId>>& prompts,
                          const GenerationParams& params);

struct CorpusEntry {
  BaselineText text;  // doc_id + tokens + prompt_len
  DetectionResult detection;
  std::size_t candidates_tried = 0;
};

// Watermarks prompts 0..count-1 of `stream` (doc ids "<stream>-NNNN").
std::vector<CorpusEntry> GenerateWatermarkedCorpus(
    const SyntheticWorld& world, const std::string& stream, std::size_t count,
    const WatermarkKey& key, const DirectionBank& bank,
    const SelectionSpec& spec, const NullStats& nulls,
    const GenerationParams& params, std::size_t jobs = 0);

std::vector<DetectionResult> DetectCorpus(const Backend& backend,
                                          const std::vector<BaselineText>& texts,
                                          const WatermarkKey& key,
                                          const DirectionBank& bank,
                                          const SelectionSpec& spec,
                                          const NullStats& nulls,
                                          const DetectOptions& options = {},
                                          std::size_t jobs = 0);

// --- synthetic world on disk -------------------------------------------------

struct WorldOptions {
  PairOptions pairs;
  std::size_t num_prompts = 20;
  std::size_t num_baseline = 100;
};

// Writes world.json, sae.slamsae.json, pairs/, prompts.json, baseline/,
// lexicon.tsv and key.hex under dir.
void MaterializeWorld(const BackendSpec& spec, const WorldOptions& options,
                      const std::filesystem::path& dir, std::size_t jobs = 0);

std::string WorldJson(const SyntheticWorld& world);
// Rebuilds the world from world.json.
BackendSpec LoadWorldSpec(const std::filesystem::path& world_json);

void SavePairs(const std::map<std::string, std::vector<ContrastivePair>>& pairs,
               const std::filesystem::path& dir);
std::map<std::string, std::vector<ContrastivePair>> LoadPairs(
    const std::filesystem::path& dir);

// prompts.json: [{"doc_id": ..., "prompt": ...}, ...]
std::vector<Document> LoadPrompts(const std::filesystem::path& path);

std::string MiningReportsToJson(const std::vector<MiningReport>& reports);

// --- sweep -------------------------------------------------------------------

struct SweepConfig {
  BackendSpec spec;
  PairOptions pairs;
  std::vector<std::size_t> ks = {1, 5, 10};
  std::vector<double> alphas = {1.0, 2.0, 4.0};
  std::vector<std::size_t> fs = {7};
  std::size_t docs = 50;
  std::size_t baseline = 100;
  bool random_directions = false;
  bool quality_filter = true;
  std::size_t jobs = 0;
};

struct SweepRow {
  std::size_t k = 0;
  double alpha = 0.0;
  std::size_t f = 0;
  std::size_t bank_size = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  double mean_z_hat = 0.0;
  double distinct_n = 0.0;
  double self_bleu = 0.0;
  double ppl_ratio = 0.0;
};

std::vector<SweepRow> RunSweep(const SweepConfig& config);
std::string SweepToJson(const SweepConfig& config, const std::vector<SweepRow>& rows);

}  // namespace slam

#endif  // SLAM_PIPELINE_H_
