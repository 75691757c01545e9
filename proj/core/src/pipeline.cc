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

#include "slam/pipeline.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "slam/crypto.h"
#include "slam/error.h"
#include "slam/io.h"
#include "slam/metrics.h"
#include "slam/parallel.h"
#include "slam/sae.h"

namespace slam {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

std::string Padded(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::string SafeName(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

std::vector<std::string> ContinuationWords(const Tokenizer& tok, const BaselineText& t) {
  const std::vector<TokenId> cont(t.tokens.begin() + static_cast<std::ptrdiff_t>(t.prompt_len),
                                  t.tokens.end());
  return SplitWords(tok.Decode(cont));
}

}  // namespace

// --- documents ----------------------------------------------------------------

std::string SerializeDocument(const Document& doc) {
  Json j = doc.meta.is_object() ? doc.meta : Json::object();
  j["doc_id"] = doc.doc_id;
  j["prompt"] = doc.prompt;
  j["continuation"] = doc.continuation;
  return Dump(j);
}

Document DeserializeDocument(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("document: ") + e.what(), e.byte);
  }
  if (!j.is_object() || !j.contains("doc_id") || !j.contains("continuation")) {
    throw ParseError("document must be an object with doc_id and continuation", 0);
  }
  Document d;
  d.doc_id = j["doc_id"].get<std::string>();
  d.prompt = j.value("prompt", "");
  d.continuation = j["continuation"].get<std::string>();
  j.erase("doc_id");
  j.erase("prompt");
  j.erase("continuation");
  d.meta = std::move(j);
  return d;
}

void SaveDocument(const Document& doc, const fs::path& dir) {
  fs::create_directories(dir);
  WriteTextFile(dir / (SafeName(doc.doc_id) + ".json"), SerializeDocument(doc));
}

std::vector<Document> LoadDocuments(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> out;
  for (const auto& f : files) {
    try {
      out.push_back(DeserializeDocument(ReadTextFile(f)));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what(), e.offset());
    }
  }
  return out;
}

BaselineText DocumentTokens(const Tokenizer& tok, const Document& doc) {
  BaselineText t;
  t.doc_id = doc.doc_id;
  t.tokens = tok.Encode(doc.prompt);
  t.prompt_len = t.tokens.size();
  const auto cont = tok.Encode(doc.continuation);
  t.tokens.insert(t.tokens.end(), cont.begin(), cont.end());
  return t;
}

Document MakeDocument(const Tokenizer& tok, const std::string& doc_id,
                      const std::vector<TokenId>& prompt,
                      const std::vector<TokenId>& continuation) {
  Document d;
  d.doc_id = doc_id;
  d.prompt = tok.Decode(prompt);
  d.continuation = tok.Decode(continuation);
  return d;
}

// --- seeds and corpora --------------------------------------------------------

std::uint64_t DeriveU64(const std::string& label, std::uint64_t a, std::uint64_t b) {
  std::vector<std::uint8_t> msg(label.begin(), label.end());
  msg.push_back(0x1f);
  AppendU64(msg, a);
  AppendU64(msg, b);
  const Digest32 d = Sha256(msg);
  return LoadU64(std::span(d).first(8));
}

WatermarkKey DemoKey(std::uint64_t seed) {
  std::vector<std::uint8_t> msg = {'d', 'e', 'm', 'o', '-', 'k', 'e', 'y', 0x1f};
  AppendU64(msg, seed);
  const Digest32 d = Sha256(msg);
  return WatermarkKey::FromSecret({d.begin(), d.end()}, "demo-" + std::to_string(seed));
}

GenerationParams SyntheticGenerationParams(const BackendSpec& spec) {
  GenerationParams p;
  p.alpha = spec.plant_gain;
  p.sentence_len = spec.sentence_len;
  return p;
}

std::vector<TokenId> StreamPrompt(const SyntheticWorld& world, const std::string& stream,
                                  std::size_t i) {
  std::mt19937_64 rng(DeriveU64("prompt:" + stream, world.spec().seed, i));
  return world.RandomPrompt(rng);
}

std::vector<BaselineText> GenerateBaseline(const SyntheticWorld& world,
                                           const std::string& stream, std::size_t count,
                                           const GenerationParams& params,
                                           std::size_t jobs) {
  std::vector<BaselineText> out(count);
  ParallelFor(count, jobs, [&](std::size_t i) {
    BaselineText& t = out[i];
    t.doc_id = stream + "-" + Padded(i);
    t.tokens = StreamPrompt(world, stream, i);
    t.prompt_len = t.tokens.size();
    const auto cont = GenerateUnwatermarked(
        world.backend(), t.tokens, params, DeriveU64("sample:" + stream, world.spec().seed, i));
    t.tokens.insert(t.tokens.end(), cont.begin(), cont.end());
  });
  return out;
}

DirectionBank RandomDirectionBank(const DirectionBank& bank, std::uint64_t seed) {
  DirectionBank out = bank;
  std::mt19937_64 rng(seed);
  for (auto& r : out.records) {
    double n2 = 0.0;
    std::vector<double> v(r.direction.size());
    for (double& x : v) {
      x = StandardNormal(rng);
      n2 += x * x;
    }
    const double n = std::sqrt(n2);
    for (std::size_t i = 0; i < v.size(); ++i) r.direction[i] = static_cast<float>(v[i] / n);
  }
  out.bank_id = bank.bank_id + "-random";
  return out;
}

void AssignQualityWeights(const Backend& backend, DirectionBank& bank,
                          const std::vector<std::vector<TokenId>>& prompts,
                          const GenerationParams& params) {
  if (prompts.empty()) return;
  std::vector<double> base_ppl(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto cont = GenerateUnwatermarked(backend, prompts[i], params,
                                            DeriveU64("quality", i));
    base_ppl[i] = ConditionalPerplexity(backend, prompts[i], cont);
  }
  const std::size_t pool = std::min(bank.pool_size, bank.records.size());
  ParallelFor(pool, 0, [&](std::size_t r) {
    double ratio = 0.0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const std::map<std::size_t, SteeringPlan> plans = {
          {0, BuildPlan({bank.records[r]}, params.alpha, prompts[i].size())}};
      const auto cont =
          SampleContinuation(backend, prompts[i], &plans, params, DeriveU64("quality", i));
      ratio += base_ppl[i] / ConditionalPerplexity(backend, prompts[i], cont);
    }
    bank.records[r].quality_weight = std::min(1.0, ratio / static_cast<double>(prompts.size()));
  });
}

std::vector<CorpusEntry> GenerateWatermarkedCorpus(
    const SyntheticWorld& world, const std::string& stream, std::size_t count,
    const WatermarkKey& key, const DirectionBank& bank, const SelectionSpec& spec,
    const NullStats& nulls, const GenerationParams& params, std::size_t jobs) {
  std::vector<CorpusEntry> out(count);
  ParallelFor(count, jobs, [&](std::size_t i) {
    CorpusEntry& e = out[i];
    e.text.doc_id = stream + "-" + Padded(i);
    const auto prompt = StreamPrompt(world, stream, i);
    GenerationOutput g = GenerateWatermarked(world.backend(), prompt, key, e.text.doc_id,
                                             bank, spec, nulls, params);
    e.text.tokens = std::move(g.tokens);
    e.text.prompt_len = g.prompt_len;
    e.detection = std::move(g.detection);
    e.candidates_tried = g.candidates_tried;
  });
  return out;
}

std::vector<DetectionResult> DetectCorpus(const Backend& backend,
                                          const std::vector<BaselineText>& texts,
                                          const WatermarkKey& key, const DirectionBank& bank,
                                          const SelectionSpec& spec, const NullStats& nulls,
                                          const DetectOptions& options, std::size_t jobs) {
  std::vector<DetectionResult> out(texts.size());
  ParallelFor(texts.size(), jobs, [&](std::size_t i) {
    out[i] = Detect(backend, texts[i].tokens, texts[i].prompt_len, key, texts[i].doc_id, bank,
                    spec, nulls, options);
  });
  return out;
}

// --- world on disk ------------------------------------------------------------

std::string WorldJson(const SyntheticWorld& world) {
  Json j;
  j["format"] = "slamworld";
  j["schema_version"] = kSchemaVersion;
  j["spec"] = Json::parse(BackendSpecToJson(world.spec()));
  j["world_id"] = world.world_id();
  j["model_id"] = world.backend().model_id();
  Json ph = Json::array();
  for (const auto& p : world.phenomena()) {
    ph.push_back({{"name", p.name},
                  {"peak_layer", p.peak_layer},
                  {"delta", p.delta},
                  {"sae_feature_forward", SyntheticWorld::PlantedFeature(p.index, true)},
                  {"sae_feature_reverse", SyntheticWorld::PlantedFeature(p.index, false)}});
  }
  j["phenomena"] = std::move(ph);
  j["domains"] = world.domains();
  return Dump(j);
}

BackendSpec LoadWorldSpec(const fs::path& world_json) {
  Json j;
  try {
    j = Json::parse(ReadTextFile(world_json));
  } catch (const Json::parse_error& e) {
    throw ParseError(world_json.string() + ": " + e.what(), e.byte);
  }
  if (!j.is_object() || j.value("format", "") != "slamworld" || !j.contains("spec")) {
    throw ParseError(world_json.string() + " is not a slamworld document", 0);
  }
  const auto v = j.value("schema_version", 0u);
  if (v != kSchemaVersion) throw VersionError(v, kSchemaVersion);
  return BackendSpecFromJson(j["spec"].dump());
}

void SavePairs(const std::map<std::string, std::vector<ContrastivePair>>& pairs,
               const fs::path& dir) {
  fs::create_directories(dir);
  Json list = Json::array();
  for (const auto& [name, ps] : pairs) {
    for (const auto& p : ps) {
      const std::string base = SafeName(p.pair_id);
      SaveTrace(p.pos, dir / (base + ".pos.slamtrace"));
      SaveTrace(p.neg, dir / (base + ".neg.slamtrace"));
      list.push_back({{"pair_id", p.pair_id},
                      {"phenomenon", p.phenomenon},
                      {"domain", p.domain},
                      {"pos", base + ".pos.slamtrace"},
                      {"neg", base + ".neg.slamtrace"}});
    }
  }
  Json j;
  j["format"] = "slampairs";
  j["schema_version"] = kSchemaVersion;
  j["pairs"] = std::move(list);
  WriteTextFile(dir / "index.json", Dump(j));
}

std::map<std::string, std::vector<ContrastivePair>> LoadPairs(const fs::path& dir) {
  const fs::path index = dir / "index.json";
  Json j;
  try {
    j = Json::parse(ReadTextFile(index));
  } catch (const Json::parse_error& e) {
    throw ParseError(index.string() + ": " + e.what(), e.byte);
  }
  if (!j.is_object() || j.value("format", "") != "slampairs") {
    throw ParseError(index.string() + " is not a slampairs index", 0);
  }
  const auto v = j.value("schema_version", 0u);
  if (v != kSchemaVersion) throw VersionError(v, kSchemaVersion);
  std::map<std::string, std::vector<ContrastivePair>> out;
  for (const auto& e : j.at("pairs")) {
    ContrastivePair p;
    p.pair_id = e.at("pair_id").get<std::string>();
    p.phenomenon = e.at("phenomenon").get<std::string>();
    p.domain = e.at("domain").get<std::string>();
    p.pos = LoadTrace(dir / e.at("pos").get<std::string>());
    p.neg = LoadTrace(dir / e.at("neg").get<std::string>());
    if (p.pos.model_id != p.neg.model_id || p.pos.layer_ids != p.neg.layer_ids) {
      throw InvariantError("pair " + p.pair_id + " traces disagree on model or layers");
    }
    out[p.phenomenon].push_back(std::move(p));
  }
  return out;
}

std::vector<Document> LoadPrompts(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(ReadTextFile(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  if (!j.is_array()) throw ParseError(path.string() + ": expected a JSON array", 0);
  std::vector<Document> out;
  for (const auto& e : j) {
    Document d;
    d.doc_id = e.at("doc_id").get<std::string>();
    d.prompt = e.at("prompt").get<std::string>();
    out.push_back(std::move(d));
  }
  return out;
}

void MaterializeWorld(const BackendSpec& spec, const WorldOptions& options,
                      const fs::path& dir, std::size_t jobs) {
  fs::create_directories(dir);
  const SyntheticWorld world(spec);
  const Tokenizer& tok = world.backend().tokenizer();
  WriteTextFile(dir / "world.json", WorldJson(world));
  SaveSaes(world.saes(), dir / "sae.slamsae.json");
  SavePairs(world.GeneratePairs(options.pairs), dir / "pairs");

  Json prompts = Json::array();
  for (std::size_t i = 0; i < options.num_prompts; ++i) {
    prompts.push_back({{"doc_id", "doc-" + Padded(i)},
                       {"prompt", tok.Decode(StreamPrompt(world, "doc", i))}});
  }
  WriteTextFile(dir / "prompts.json", Dump(prompts));

  const auto params = SyntheticGenerationParams(spec);
  const auto baseline = GenerateBaseline(world, "base", options.num_baseline, params, jobs);
  for (const auto& t : baseline) {
    const std::vector<TokenId> prompt(t.tokens.begin(),
                                      t.tokens.begin() + static_cast<std::ptrdiff_t>(t.prompt_len));
    const std::vector<TokenId> cont(t.tokens.begin() + static_cast<std::ptrdiff_t>(t.prompt_len),
                                    t.tokens.end());
    SaveDocument(MakeDocument(tok, t.doc_id, prompt, cont), dir / "baseline");
  }
  WriteTextFile(dir / "lexicon.tsv", SerializeLexicon(world.BuildLexicon()));
  SaveKeyFile(DemoKey(spec.seed), dir / "key.hex");
}

std::string MiningReportsToJson(const std::vector<MiningReport>& reports) {
  Json list = Json::array();
  for (const auto& r : reports) {
    Json per = Json::object();
    for (const auto& [idx, s] : r.per_feature) {
      per[std::to_string(idx)] = {{"delta_mu", s.delta_mu},
                                  {"purity", s.purity},
                                  {"consistency", s.consistency},
                                  {"composite", s.composite},
                                  {"gap_fraction", s.gap_fraction}};
    }
    list.push_back({{"phenomenon", r.phenomenon},
                    {"layer", r.layer},
                    {"polarity", PolarityName(r.polarity)},
                    {"candidates_total", r.candidates_total},
                    {"passed_gap", r.passed_gap},
                    {"passed_composite", r.passed_composite},
                    {"modes_extracted", r.modes_extracted},
                    {"records_admitted", r.records_admitted},
                    {"warnings", r.warnings},
                    {"per_feature", std::move(per)}});
  }
  Json j;
  j["format"] = "slamminingreport";
  j["schema_version"] = kSchemaVersion;
  j["units"] = std::move(list);
  return Dump(j);
}

// --- sweep --------------------------------------------------------------------

std::vector<SweepRow> RunSweep(const SweepConfig& config) {
  const SyntheticWorld world(config.spec);
  const Backend& backend = world.backend();
  const Tokenizer& tok = backend.tokenizer();
  const auto pairs = world.GeneratePairs(config.pairs);
  const WatermarkKey key = DemoKey(config.spec.seed);
  GenerationParams params = SyntheticGenerationParams(config.spec);
  const auto baseline = GenerateBaseline(world, "base", config.baseline, params, config.jobs);
  // Unwatermarked continuations of the evaluation prompts: FPR and the
  // perplexity reference.
  const auto unmarked = GenerateBaseline(world, "doc", config.docs, params, config.jobs);
  std::vector<std::vector<TokenId>> quality_prompts;
  for (std::size_t i = 0; i < 4; ++i) quality_prompts.push_back(StreamPrompt(world, "quality", i));

  double bl_ppl = 0.0;
  for (const auto& t : unmarked) {
    bl_ppl += ConditionalPerplexity(
        backend, {t.tokens.begin(), t.tokens.begin() + static_cast<std::ptrdiff_t>(t.prompt_len)},
        {t.tokens.begin() + static_cast<std::ptrdiff_t>(t.prompt_len), t.tokens.end()});
  }
  bl_ppl /= static_cast<double>(std::max<std::size_t>(1, unmarked.size()));

  std::vector<SweepRow> rows;
  for (std::size_t k : config.ks) {
    MiningConfig mc;
    mc.k = k;
    DirectionBank bank = MineBank(pairs, world.saes(), backend.layers(), mc, backend.model_id());
    if (config.random_directions) {
      bank = RandomDirectionBank(bank, DeriveU64("random-directions", config.spec.seed, k));
    }
    GenerationParams qp = params;
    qp.max_new_tokens = 48;
    AssignQualityWeights(backend, bank, quality_prompts, qp);
    for (std::size_t f : config.fs) {
      SelectionSpec spec;
      spec.pool_size = std::min(spec.pool_size, bank.records.size());
      spec.anchor_size = std::min(spec.anchor_size, spec.pool_size);
      spec.features_per_doc = std::min(f, spec.pool_size);
      spec.use_quality_weight = config.quality_filter;
      const NullStats nulls = FitNulls(backend, baseline, key, bank, spec, kDefaultZMin, config.jobs);
      const auto null_det = DetectCorpus(backend, unmarked, key, bank, spec, nulls, {}, config.jobs);
      std::size_t fp = 0;
      for (const auto& d : null_det) fp += d.decision ? 1 : 0;
      for (double alpha : config.alphas) {
        GenerationParams gp = params;
        gp.alpha = alpha;
        const auto corpus = GenerateWatermarkedCorpus(world, "doc", config.docs, key, bank, spec,
                                                      nulls, gp, config.jobs);
        SweepRow row;
        row.k = k;
        row.alpha = alpha;
        row.f = f;
        row.bank_size = bank.records.size();
        row.fpr = null_det.empty() ? 0.0 : static_cast<double>(fp) / null_det.size();
        std::vector<WordSeq> texts;
        double wm_ppl = 0.0;
        std::size_t tp = 0;
        for (const auto& e : corpus) {
          if (e.detection.decision) ++tp;
          row.mean_z_hat += e.detection.z_hat;
          texts.push_back(ContinuationWords(tok, e.text));
          row.distinct_n += DistinctN(texts.back());
          wm_ppl += ConditionalPerplexity(
              backend,
              {e.text.tokens.begin(), e.text.tokens.begin() + static_cast<std::ptrdiff_t>(e.text.prompt_len)},
              {e.text.tokens.begin() + static_cast<std::ptrdiff_t>(e.text.prompt_len), e.text.tokens.end()});
        }
        const double n = static_cast<double>(std::max<std::size_t>(1, corpus.size()));
        row.tpr = static_cast<double>(tp) / n;
        row.mean_z_hat /= n;
        row.distinct_n /= n;
        row.self_bleu = texts.size() >= 2 ? SelfBleu(texts) : 0.0;
        row.ppl_ratio = (wm_ppl / n) / bl_ppl;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string SweepToJson(const SweepConfig& config, const std::vector<SweepRow>& rows) {
  Json j;
  j["format"] = "slamsweep";
  j["schema_version"] = kSchemaVersion;
  j["config"] = {{"spec", Json::parse(BackendSpecToJson(config.spec))},
                 {"k", config.ks},
                 {"alpha", config.alphas},
                 {"features_per_doc", config.fs},
                 {"docs", config.docs},
                 {"baseline", config.baseline},
                 {"random_directions", config.random_directions},
                 {"quality_filter", config.quality_filter},
                 {"pairs_per_domain", config.pairs.pairs_per_domain},
                 {"pair_seed", config.pairs.seed}};
  Json list = Json::array();
  for (const auto& r : rows) {
    list.push_back({{"k", r.k},
                    {"alpha", r.alpha},
                    {"features_per_doc", r.f},
                    {"bank_size", r.bank_size},
                    {"tpr", r.tpr},
                    {"fpr", r.fpr},
                    {"mean_z_hat", r.mean_z_hat},
                    {"distinct_n", r.distinct_n},
                    {"self_bleu", r.self_bleu},
                    {"ppl_ratio", r.ppl_ratio}});
  }
  j["rows"] = std::move(list);
  return Dump(j);
}

}  // namespace slam
