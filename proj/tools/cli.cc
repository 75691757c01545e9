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

#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "slam/attacks.h"
#include "slam/bridge.h"
#include "slam/detector.h"
#include "slam/error.h"
#include "slam/generator.h"
#include "slam/io.h"
#include "slam/log.h"
#include "slam/metrics.h"
#include "slam/mining.h"
#include "slam/parallel.h"
#include "slam/pipeline.h"
#include "slam/selection.h"
#include "slam/synthetic.h"

namespace slam::cli {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

// Thrown for bad flag values found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

void Emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    if (out_path.find('/') != std::string::npos) {
      const fs::path parent = fs::path(out_path).parent_path();
      if (!parent.empty()) fs::create_directories(parent);
    }
    WriteTextFile(out_path, text);
  }
}

void RequireFile(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::exists(path)) throw Error(what + " not found: " + path);
}

// --- backend selection --------------------------------------------------------

struct BackendFlags {
  std::string kind = "synthetic";
  std::string world;
  std::uint64_t seed = 7;
  std::string bridge_cmd;
  std::size_t sentence_len = 0;
};

void AddBackendFlags(CLI::App* app, BackendFlags& f) {
  app->add_option("--backend", f.kind, "synthetic or bridge")
      ->check(CLI::IsMember({"synthetic", "bridge"}));
  app->add_option("--world", f.world, "world.json of a synthetic world");
  app->add_option("--seed", f.seed, "synthetic world seed when --world is absent");
  app->add_option("--bridge-cmd", f.bridge_cmd, "command running the bridge adapter");
  app->add_option("--sentence-len", f.sentence_len,
                  "force a separator every N tokens (bridge backend)");
}

struct BackendHandle {
  std::unique_ptr<Backend> backend;
  GenerationParams params;
};

BackendSpec WorldSpec(const BackendFlags& f) {
  if (!f.world.empty()) {
    RequireFile(f.world, "world file");
    return LoadWorldSpec(f.world);
  }
  BackendSpec spec;
  spec.seed = f.seed;
  return spec;
}

BackendHandle MakeBackend(const BackendFlags& f) {
  BackendHandle h;
  if (f.kind == "bridge") {
    if (f.bridge_cmd.empty()) throw UsageError("--backend bridge needs --bridge-cmd");
    h.backend = std::make_unique<BridgeBackend>(SplitCommand(f.bridge_cmd));
    h.params.sentence_len = f.sentence_len;
    return h;
  }
  const BackendSpec spec = WorldSpec(f);
  h.backend = std::make_unique<SyntheticBackend>(spec);
  h.params = SyntheticGenerationParams(spec);
  if (f.sentence_len > 0) h.params.sentence_len = f.sentence_len;
  return h;
}

// --- shared artifacts ---------------------------------------------------------

struct KeyFlags {
  std::string bank;
  std::string nulls;
  std::string key_file;
  std::string spec;
};

void AddBankFlag(CLI::App* app, KeyFlags& f) {
  app->add_option("--bank", f.bank, "direction bank (.slambank.json)");
}
void AddKeyFlag(CLI::App* app, KeyFlags& f) {
  app->add_option("--key-file", f.key_file, "watermark key file")->envname("SLAM_KEY_FILE");
}
void AddNullsFlag(CLI::App* app, KeyFlags& f) {
  app->add_option("--nulls", f.nulls, "null statistics (.slamnull.json)");
}
void AddSpecFlag(CLI::App* app, KeyFlags& f) {
  app->add_option("--spec", f.spec, "selection spec JSON (defaults, or the one in --nulls)");
}

DirectionBank LoadBankFlag(const KeyFlags& f) {
  RequireFile(f.bank, "bank file");
  return LoadBank(f.bank);
}
WatermarkKey LoadKeyFlag(const KeyFlags& f) {
  if (f.key_file.empty()) throw UsageError("--key-file (or SLAM_KEY_FILE) is required");
  RequireFile(f.key_file, "key file");
  return LoadKeyFile(f.key_file);
}
NullStats LoadNullsFlag(const KeyFlags& f) {
  RequireFile(f.nulls, "nulls file");
  return LoadNulls(f.nulls);
}
SelectionSpec SpecFlag(const KeyFlags& f, const std::optional<NullStats>& nulls) {
  if (!f.spec.empty()) {
    RequireFile(f.spec, "selection spec");
    return DeserializeSelectionSpec(ReadTextFile(f.spec));
  }
  return nulls ? nulls->selection : SelectionSpec{};
}

std::vector<LayerId> ParseLayers(const std::string& text) {
  std::vector<LayerId> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const int a = std::stoi(text.substr(0, dots));
      const int b = std::stoi(text.substr(dots + 2));
      if (b < a) throw UsageError("empty layer range " + text);
      for (int l = a; l <= b; ++l) out.push_back(l);
      return out;
    }
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) {
      if (!part.empty()) out.push_back(std::stoi(part));
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse layers '" + text + "' (use a..b or a,b,c)");
  }
  return out;
}

// --- subcommands --------------------------------------------------------------

struct SynthWorldCmd {
  std::uint64_t seed = 7;
  std::string out;
  std::size_t pairs_per_domain = 10;
  std::size_t prompts = 20;
  std::size_t baseline = 100;
  std::size_t jobs = 0;
  std::string spec_file;

  void Register(CLI::App* app) {
    app->add_option("--seed", seed, "world seed");
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--pairs-per-domain", pairs_per_domain, "contrastive pairs per domain");
    app->add_option("--prompts", prompts, "evaluation prompts to write");
    app->add_option("--baseline", baseline, "unwatermarked baseline documents to write");
    app->add_option("--world-spec", spec_file, "JSON overriding backend shape parameters");
    app->add_option("--jobs", jobs, "worker threads (0 = hardware)");
  }
  int Run(std::ostream& out_stream) {
    BackendSpec spec;
    if (!spec_file.empty()) {
      RequireFile(spec_file, "world spec");
      spec = BackendSpecFromJson(ReadTextFile(spec_file));
    }
    spec.seed = seed;
    WorldOptions opts;
    opts.pairs.pairs_per_domain = pairs_per_domain;
    opts.pairs.seed = DeriveU64("pairs", seed);
    opts.num_prompts = prompts;
    opts.num_baseline = baseline;
    MaterializeWorld(spec, opts, out, jobs);
    out_stream << "wrote synthetic world to " << out << "\n";
    return kExitOk;
  }
};

struct MineCmd {
  std::string pairs;
  std::string sae;
  std::string layers;
  std::size_t k = 10;
  bool bidirectional = true;
  std::size_t cap = 200;
  std::uint64_t seed = 42;
  double gap_min = 0.80;
  double composite_min = 0.05;
  std::size_t pool = 10;
  std::size_t anchor = 5;
  std::string out;
  std::string report;

  void Register(CLI::App* app) {
    app->add_option("--pairs", pairs, "pairs directory (index.json + traces)")->required();
    app->add_option("--sae", sae, "SAE dictionaries (.slamsae.json)")->required();
    app->add_option("--layers", layers, "layers to mine: a..b or a,b,c (default: every SAE)");
    app->add_option("--k", k, "SVD modes per unit")->check(CLI::PositiveNumber);
    app->add_flag("--bidirectional,!--forward-only", bidirectional,
                  "also mine with pairs reversed (default on)");
    app->add_option("--cap", cap, "max pairs per unit (subsampled)");
    app->add_option("--subsample-seed", seed, "seed of the pair subsample");
    app->add_option("--gap-min", gap_min, "funnel gap threshold (inclusive)");
    app->add_option("--composite-min", composite_min, "funnel composite threshold (inclusive)");
    app->add_option("--pool", pool, "pool size recorded in the bank");
    app->add_option("--anchor", anchor, "anchor size recorded in the bank");
    app->add_option("--out", out, "bank output (.slambank.json)")->required();
    app->add_option("--report", report, "mining report JSON");
  }
  int Run(std::ostream& out_stream) {
    const auto by_phen = LoadPairs(pairs);
    if (by_phen.empty()) throw Error("no pairs in " + pairs);
    const auto saes = LoadSaes(sae);
    std::vector<LayerId> ls;
    if (layers.empty()) {
      for (const auto& s : saes) ls.push_back(s.layer);
    } else {
      ls = ParseLayers(layers);
    }
    MiningConfig mc;
    mc.k = k;
    mc.bidirectional = bidirectional;
    mc.cap = cap;
    mc.seed = seed;
    mc.thresholds.gap_min = gap_min;
    mc.thresholds.composite_min = composite_min;
    std::vector<MiningReport> reports;
    const std::string model_id = by_phen.begin()->second.front().pos.model_id;
    DirectionBank bank = MineBank(by_phen, saes, ls, mc, model_id, &reports);
    bank.pool_size = std::min(pool, bank.records.size());
    bank.anchor_size = std::min(anchor, bank.pool_size);
    SaveBank(bank, out);
    if (!report.empty()) WriteTextFile(report, MiningReportsToJson(reports));
    out_stream << "mined " << bank.records.size() << " records into " << out << "\n";
    return kExitOk;
  }
};

struct SelectCmd {
  KeyFlags keys;
  std::string doc_id;
  std::size_t sentences = 1;
  std::string out;

  void Register(CLI::App* app) {
    AddBankFlag(app, keys);
    AddKeyFlag(app, keys);
    AddSpecFlag(app, keys);
    app->add_option("--doc-id", doc_id, "document id")->required();
    app->add_option("--sentences", sentences, "sentences to select for (sentence-level mode)");
    app->add_option("--out", out, "write JSON here instead of stdout");
  }
  int Run(std::ostream& out_stream) {
    const auto bank = LoadBankFlag(keys);
    const auto key = LoadKeyFlag(keys);
    const auto spec = SpecFlag(keys, std::nullopt);
    const auto sel = SelectionForText(key, doc_id, spec, bank, sentences);
    Json list = Json::array();
    for (const auto& [s, recs] : sel) {
      Json ids = Json::array();
      for (const auto& r : recs) ids.push_back(r.feature_id);
      list.push_back({{"sentence", s}, {"features", std::move(ids)}});
    }
    Json j = {{"doc_id", doc_id},
              {"bank_id", bank.bank_id},
              {"key_id", key.key_id},
              {"selection", Json::parse(SerializeSelectionSpec(spec))},
              {"selections", std::move(list)}};
    Emit(Dump(j), out, out_stream);
    return kExitOk;
  }
};

struct CalibrateCmd {
  BackendFlags backend;
  KeyFlags keys;
  std::string baseline_dir;
  double z_min = kDefaultZMin;
  bool sentence_level = false;
  std::string out;
  std::size_t jobs = 0;

  void Register(CLI::App* app) {
    AddBackendFlags(app, backend);
    AddBankFlag(app, keys);
    AddKeyFlag(app, keys);
    AddSpecFlag(app, keys);
    app->add_option("--baseline-dir", baseline_dir, "unwatermarked documents")->required();
    app->add_option("--z-min", z_min, "Stouffer activity floor");
    app->add_flag("--sentence-level", sentence_level, "calibrate the sentence-level regime");
    app->add_option("--out", out, "null statistics output (.slamnull.json)")->required();
    app->add_option("--jobs", jobs, "worker threads (0 = hardware)");
  }
  int Run(std::ostream& out_stream) {
    const auto bank = LoadBankFlag(keys);
    const auto key = LoadKeyFlag(keys);
    auto spec = SpecFlag(keys, std::nullopt);
    if (sentence_level) spec.sentence_level = true;
    auto h = MakeBackend(backend);
    std::vector<BaselineText> texts;
    for (const auto& d : LoadDocuments(baseline_dir)) {
      texts.push_back(DocumentTokens(h.backend->tokenizer(), d));
    }
    const NullStats nulls = FitNulls(*h.backend, texts, key, bank, spec, z_min, jobs);
    SaveNulls(nulls, out);
    out_stream << "fitted nulls on " << nulls.fitted_on << " texts into " << out << "\n";
    return kExitOk;
  }
};

struct GenerateCmd {
  BackendFlags backend;
  KeyFlags keys;
  std::string doc_id;
  std::string prompt_file;
  std::string prompts;
  std::string out;
  std::string out_dir;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 4;
  double threshold = kDefaultThreshold;
  std::size_t max_new_tokens = 200;
  double temperature = 0.7;
  double top_p = 0.9;
  bool unwatermarked = false;
  std::uint64_t sample_seed = 1;
  std::size_t jobs = 0;

  void Register(CLI::App* app) {
    AddBackendFlags(app, backend);
    AddBankFlag(app, keys);
    AddNullsFlag(app, keys);
    AddKeyFlag(app, keys);
    AddSpecFlag(app, keys);
    app->add_option("--doc-id", doc_id, "document id (single prompt)");
    app->add_option("--prompt-file", prompt_file, "prompt text (single prompt)");
    app->add_option("--prompts", prompts, "prompts.json for batch generation");
    app->add_option("--out", out, "output document (single prompt)");
    app->add_option("--out-dir", out_dir, "output directory (batch)");
    app->add_option("--alpha", alpha, "steering strength (default: world plant gain, else 2)");
    app->add_option("--n", n, "candidates per prompt")->check(CLI::PositiveNumber);
    app->add_option("--threshold", threshold, "early-stop threshold on z_hat");
    app->add_option("--max-new-tokens", max_new_tokens, "continuation length");
    app->add_option("--temperature", temperature, "sampling temperature");
    app->add_option("--top-p", top_p, "nucleus mass");
    app->add_flag("--unwatermarked", unwatermarked, "sample without steering");
    app->add_option("--sample-seed", sample_seed, "sampling seed for --unwatermarked");
    app->add_option("--jobs", jobs, "worker threads (0 = hardware)");
  }

  Document One(const Backend& b, const GenerationParams& params, const std::string& id,
               const std::string& prompt_text, const WatermarkKey* key,
               const DirectionBank* bank, const SelectionSpec* spec,
               const NullStats* nulls, std::size_t index) const {
    const auto prompt = b.tokenizer().Encode(prompt_text);
    if (prompt.empty()) throw Error("prompt for " + id + " is empty");
    Document d;
    if (unwatermarked) {
      const auto cont = GenerateUnwatermarked(b, prompt, params, DeriveU64(id, sample_seed, index));
      d = MakeDocument(b.tokenizer(), id, prompt, cont);
      d.meta["watermarked"] = false;
      return d;
    }
    const auto g = GenerateWatermarked(b, prompt, *key, id, *bank, *spec, *nulls, params);
    const std::vector<TokenId> cont(g.tokens.begin() + static_cast<std::ptrdiff_t>(g.prompt_len),
                                    g.tokens.end());
    d = MakeDocument(b.tokenizer(), id, prompt, cont);
    d.meta["watermarked"] = true;
    d.meta["alpha"] = params.alpha;
    d.meta["z_hat"] = g.detection.z_hat;
    d.meta["decision"] = g.detection.decision;
    d.meta["candidates_tried"] = g.candidates_tried;
    d.meta["degenerate_candidates"] = g.degenerate_candidates;
    return d;
  }

  int Run(std::ostream& out_stream) {
    if (prompts.empty() == prompt_file.empty()) {
      throw UsageError("give exactly one of --prompt-file or --prompts");
    }
    if (!prompt_file.empty() && doc_id.empty()) throw UsageError("--prompt-file needs --doc-id");
    if (!prompts.empty() && out_dir.empty()) throw UsageError("--prompts needs --out-dir");
    auto h = MakeBackend(backend);
    GenerationParams params = h.params;
    if (!std::isnan(alpha)) params.alpha = alpha;
    params.num_candidates = n;
    params.threshold = threshold;
    params.max_new_tokens = max_new_tokens;
    params.sampling.temperature = temperature;
    params.sampling.top_p = top_p;

    std::optional<DirectionBank> bank;
    std::optional<WatermarkKey> key;
    std::optional<NullStats> nulls;
    SelectionSpec spec;
    if (!unwatermarked) {
      bank = LoadBankFlag(keys);
      key = LoadKeyFlag(keys);
      nulls = LoadNullsFlag(keys);
      spec = SpecFlag(keys, nulls);
    }
    const auto* kp = key ? &*key : nullptr;
    const auto* bp = bank ? &*bank : nullptr;
    const auto* np = nulls ? &*nulls : nullptr;

    if (!prompt_file.empty()) {
      RequireFile(prompt_file, "prompt file");
      const Document d = One(*h.backend, params, doc_id, ReadTextFile(prompt_file), kp, bp,
                             &spec, np, 0);
      Emit(SerializeDocument(d), out, out_stream);
      return kExitOk;
    }
    RequireFile(prompts, "prompts file");
    const auto list = LoadPrompts(prompts);
    std::vector<Document> docs(list.size());
    // The bridge backend is a process per call, so documents run one after
    // another there; the synthetic backend is thread-safe.
    const std::size_t workers = backend.kind == "bridge" ? 1 : jobs;
    ParallelFor(list.size(), workers, [&](std::size_t i) {
      docs[i] = One(*h.backend, params, list[i].doc_id, list[i].prompt, kp, bp, &spec, np, i);
    });
    std::size_t flagged = 0;
    for (const auto& d : docs) {
      SaveDocument(d, out_dir);
      if (d.meta.value("decision", false)) ++flagged;
    }
    out_stream << "wrote " << docs.size() << " documents to " << out_dir;
    if (!unwatermarked) out_stream << " (" << flagged << " at or above threshold)";
    out_stream << "\n";
    return kExitOk;
  }
};

struct DetectCmd {
  BackendFlags backend;
  KeyFlags keys;
  std::string doc_id;
  std::string text_file;
  std::string prompt_file;
  std::string doc_file;
  std::string in_dir;
  std::string label;
  double threshold = kDefaultThreshold;
  double z_min = kDefaultZMin;
  bool json = false;
  std::string out;
  std::size_t jobs = 0;

  void Register(CLI::App* app) {
    AddBackendFlags(app, backend);
    AddBankFlag(app, keys);
    AddNullsFlag(app, keys);
    AddKeyFlag(app, keys);
    AddSpecFlag(app, keys);
    app->add_option("--doc-id", doc_id, "document id (with --text-file)");
    app->add_option("--text-file", text_file, "continuation text to score");
    app->add_option("--prompt-file", prompt_file, "prompt the text continues (optional)");
    app->add_option("--doc-file", doc_file, "document JSON to score");
    app->add_option("--in-dir", in_dir, "directory of document JSON files");
    app->add_option("--label", label, "ground-truth label recorded in batch scores")
        ->check(CLI::IsMember({"watermarked", "unwatermarked"}));
    app->add_option("--threshold", threshold, "decision threshold on z_hat");
    app->add_option("--z-min", z_min, "Stouffer activity floor");
    app->add_flag("--json", json, "print the full JSON result");
    app->add_option("--out", out, "write the JSON result here");
    app->add_option("--jobs", jobs, "worker threads (0 = hardware)");
  }
  int Run(std::ostream& out_stream) {
    const int sources = !text_file.empty() + !doc_file.empty() + !in_dir.empty();
    if (sources != 1) throw UsageError("give exactly one of --text-file, --doc-file or --in-dir");
    if (!text_file.empty() && doc_id.empty()) throw UsageError("--text-file needs --doc-id");
    const auto nulls = LoadNullsFlag(keys);
    const auto bank = LoadBankFlag(keys);
    const auto key = LoadKeyFlag(keys);
    const auto spec = SpecFlag(keys, nulls);
    auto h = MakeBackend(backend);
    const Tokenizer& tok = h.backend->tokenizer();
    DetectOptions opts{threshold, z_min};

    std::vector<Document> docs;
    if (!in_dir.empty()) {
      docs = LoadDocuments(in_dir);
    } else if (!doc_file.empty()) {
      RequireFile(doc_file, "document file");
      docs.push_back(DeserializeDocument(ReadTextFile(doc_file)));
    } else {
      RequireFile(text_file, "text file");
      Document d;
      d.doc_id = doc_id;
      d.continuation = ReadTextFile(text_file);
      if (!prompt_file.empty()) {
        RequireFile(prompt_file, "prompt file");
        d.prompt = ReadTextFile(prompt_file);
      }
      docs.push_back(std::move(d));
    }
    std::vector<BaselineText> texts;
    for (const auto& d : docs) texts.push_back(DocumentTokens(tok, d));
    const std::size_t workers = backend.kind == "bridge" ? 1 : jobs;
    const auto results = DetectCorpus(*h.backend, texts, key, bank, spec, nulls, opts, workers);

    if (in_dir.empty()) {
      Json j = Json::parse(DetectionResultToJson(results[0]));
      j["doc_id"] = docs[0].doc_id;
      if (json || !out.empty()) {
        Emit(Dump(j), out, out_stream);
      }
      if (!json) {
        out_stream << docs[0].doc_id << " z_hat=" << results[0].z_hat
                   << (results[0].decision ? " watermarked" : " not-watermarked") << "\n";
      }
      return kExitOk;
    }
    Json list = Json::array();
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      Json r = {{"doc_id", docs[i].doc_id},
                {"z_raw", results[i].z_raw},
                {"z_hat", results[i].z_hat},
                {"decision", results[i].decision},
                {"num_tokens_scored", results[i].num_tokens_scored}};
      if (!label.empty()) r["label"] = label;
      list.push_back(std::move(r));
      flagged += results[i].decision ? 1 : 0;
    }
    Json j = {{"format", "slamscores"},
              {"schema_version", kSchemaVersion},
              {"bank_id", bank.bank_id},
              {"threshold", threshold},
              {"results", std::move(list)}};
    if (json || !out.empty()) Emit(Dump(j), out, out_stream);
    if (!json) {
      out_stream << flagged << "/" << docs.size() << " documents at or above z_hat "
                 << threshold << "\n";
    }
    return kExitOk;
  }
};

struct AttackCmd {
  std::string kind;
  double rate = 0.3;
  std::uint64_t seed = 1;
  std::string in;
  std::string out;
  std::string lexicon;

  void Register(CLI::App* app) {
    app->add_option("--kind", kind, "delete, synonym, wordsub or reorder")
        ->required()
        ->check(CLI::IsMember({"delete", "synonym", "wordsub", "reorder"}));
    app->add_option("--rate", rate, "per-word probability")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", seed, "attack seed");
    app->add_option("--in", in, "input document directory")->required();
    app->add_option("--out", out, "output document directory")->required();
    app->add_option("--lexicon", lexicon, "synonym lexicon TSV (synonym attack)");
  }
  int Run(std::ostream& out_stream) {
    const AttackKind k = ParseAttackKind(kind);
    if (k == AttackKind::kSynonym && lexicon.empty()) {
      throw UsageError("--kind synonym needs --lexicon");
    }
    auto docs = LoadDocuments(in);
    Lexicon lex;
    if (!lexicon.empty()) {
      RequireFile(lexicon, "lexicon");
      lex = LoadLexicon(lexicon);
    }
    std::set<std::string> vocab;
    if (k == AttackKind::kWordSub) {
      std::vector<std::string> corpus;
      for (const auto& d : docs) corpus.push_back(d.continuation);
      vocab = BuildVocabulary(corpus);
    }
    for (auto& d : docs) {
      // Per-document seed so results do not depend on directory order.
      const std::uint64_t s = DeriveU64("attack:" + d.doc_id, seed);
      std::size_t changed = 0;
      switch (k) {
        case AttackKind::kDelete:
          d.continuation = WordDelete(d.continuation, rate, s);
          break;
        case AttackKind::kSynonym:
          d.continuation = SynonymSubstitute(d.continuation, rate, lex, s, &changed);
          break;
        case AttackKind::kWordSub:
          d.continuation = WordSubstitute(d.continuation, rate, vocab, s, &changed);
          break;
        case AttackKind::kReorder:
          d.continuation = SentenceReorder(d.continuation, s);
          break;
      }
      d.meta["attack"] = {{"kind", kind}, {"rate", rate}, {"seed", seed}};
      if (k == AttackKind::kSynonym || k == AttackKind::kWordSub) {
        d.meta["attack"]["substituted"] = changed;
      }
      SaveDocument(d, out);
    }
    out_stream << "attacked " << docs.size() << " documents into " << out << "\n";
    return kExitOk;
  }
};

struct EvalCmd {
  BackendFlags backend;
  std::vector<std::string> metrics = {"distinct", "selfbleu", "tpr"};
  std::string wm;
  std::string bl;
  std::vector<std::string> scores;
  double threshold = kDefaultThreshold;
  std::string out;

  void Register(CLI::App* app) {
    AddBackendFlags(app, backend);
    app->add_option("--metrics", metrics, "distinct,selfbleu,tpr,ppl")
        ->delimiter(',')
        ->check(CLI::IsMember({"distinct", "selfbleu", "tpr", "ppl"}));
    app->add_option("--wm", wm, "watermarked documents");
    app->add_option("--bl", bl, "unwatermarked documents");
    app->add_option("--scores", scores, "detect --in-dir score files (labelled)");
    app->add_option("--threshold", threshold, "decision threshold for tpr/fpr");
    app->add_option("--out", out, "report JSON (default stdout)");
  }

  static Json TextMetrics(const std::vector<Document>& docs, bool distinct, bool selfbleu) {
    std::vector<WordSeq> words;
    for (const auto& d : docs) words.push_back(SplitWords(d.continuation));
    Json j = {{"documents", docs.size()}};
    if (distinct) {
      double s = 0.0;
      for (const auto& w : words) s += DistinctN(w);
      j["distinct_n"] = words.empty() ? 0.0 : s / static_cast<double>(words.size());
    }
    if (selfbleu && words.size() >= 2) j["self_bleu"] = SelfBleu(words);
    return j;
  }

  int Run(std::ostream& out_stream) {
    const std::set<std::string> want(metrics.begin(), metrics.end());
    Json report = {{"format", "slameval"}, {"schema_version", kSchemaVersion}};
    std::vector<Document> wm_docs;
    std::vector<Document> bl_docs;
    if (!wm.empty()) wm_docs = LoadDocuments(wm);
    if (!bl.empty()) bl_docs = LoadDocuments(bl);
    const bool text = want.count("distinct") || want.count("selfbleu");
    if (text) {
      if (wm.empty() && bl.empty()) throw UsageError("distinct/selfbleu need --wm or --bl");
      if (!wm.empty()) report["watermarked"] = TextMetrics(wm_docs, want.count("distinct"), want.count("selfbleu"));
      if (!bl.empty()) report["unwatermarked"] = TextMetrics(bl_docs, want.count("distinct"), want.count("selfbleu"));
    }
    if (want.count("tpr")) {
      if (scores.empty()) throw UsageError("tpr needs --scores");
      std::vector<ScoredText> st;
      std::size_t unlabelled = 0;
      for (const auto& f : scores) {
        RequireFile(f, "scores file");
        const Json j = Json::parse(ReadTextFile(f));
        if (j.value("format", "") != "slamscores") throw ParseError(f + " is not a scores file", 0);
        for (const auto& r : j.at("results")) {
          const std::string l = r.value("label", "");
          if (l.empty()) {
            ++unlabelled;
            continue;
          }
          st.push_back({r.at("z_hat").get<double>(), l == "watermarked"});
        }
      }
      if (unlabelled > 0) {
        LogWarning(std::to_string(unlabelled) + " unlabelled scores ignored");
      }
      const Rates r = TprFpr(st, threshold);
      report["detection"] = {{"threshold", threshold},
                             {"tpr", r.tpr},
                             {"fpr", r.fpr},
                             {"positives", r.positives},
                             {"negatives", r.negatives}};
    }
    if (want.count("ppl")) {
      if (wm.empty() || bl.empty()) throw UsageError("ppl needs --wm and --bl");
      auto h = MakeBackend(backend);
      const Tokenizer& tok = h.backend->tokenizer();
      std::map<std::string, const Document*> by_id;
      for (const auto& d : bl_docs) by_id[d.doc_id] = &d;
      double wm_ppl = 0.0;
      double bl_ppl = 0.0;
      std::size_t paired = 0;
      for (const auto& d : wm_docs) {
        const auto it = by_id.find(d.doc_id);
        if (it == by_id.end()) continue;
        const auto prompt = tok.Encode(d.prompt);
        const auto wc = tok.Encode(d.continuation);
        const auto bc = tok.Encode(it->second->continuation);
        if (prompt.empty() || wc.empty() || bc.empty()) continue;
        wm_ppl += ConditionalPerplexity(*h.backend, prompt, wc);
        bl_ppl += ConditionalPerplexity(*h.backend, tok.Encode(it->second->prompt), bc);
        ++paired;
      }
      if (paired == 0) throw Error("ppl: no document ids shared between --wm and --bl");
      report["perplexity"] = {{"paired_documents", paired},
                              {"mean_ppl_watermarked", wm_ppl / static_cast<double>(paired)},
                              {"mean_ppl_unwatermarked", bl_ppl / static_cast<double>(paired)},
                              {"ppl_ratio", wm_ppl / bl_ppl}};
    }
    Emit(Dump(report), out, out_stream);
    return kExitOk;
  }
};

struct SweepCmd {
  BackendFlags backend;
  std::vector<std::size_t> ks = {1, 5, 10};
  std::vector<double> alphas;
  std::vector<std::size_t> fs = {7};
  std::size_t docs = 50;
  std::size_t baseline = 100;
  std::size_t pairs_per_domain = 10;
  bool random_directions = false;
  bool quality_filter = true;
  std::size_t jobs = 0;
  std::string out;

  void Register(CLI::App* app) {
    AddBackendFlags(app, backend);
    app->add_option("--k", ks, "SVD modes per unit")->delimiter(',');
    app->add_option("--alpha", alphas, "steering strengths (default 0.5, 1, 2 x plant gain)")
        ->delimiter(',');
    app->add_option("--f", fs, "features per document")->delimiter(',');
    app->add_option("--docs", docs, "watermarked documents per cell");
    app->add_option("--baseline", baseline, "null-calibration texts");
    app->add_option("--pairs-per-domain", pairs_per_domain, "contrastive pairs per domain");
    app->add_flag("--random-directions", random_directions, "replace mined directions by random unit vectors");
    app->add_flag("--quality-filter,!--no-quality-filter", quality_filter,
                  "weight selection by the quality proxy (default on)");
    app->add_option("--jobs", jobs, "worker threads (0 = hardware)");
    app->add_option("--out", out, "report JSON (default stdout)");
  }
  int Run(std::ostream& out_stream) {
    if (backend.kind != "synthetic") throw UsageError("sweep runs on the synthetic backend only");
    SweepConfig c;
    c.spec = WorldSpec(backend);
    c.pairs.pairs_per_domain = pairs_per_domain;
    c.pairs.seed = DeriveU64("pairs", c.spec.seed);
    c.ks = ks;
    c.alphas = alphas;
    if (c.alphas.empty()) {
      const double g = c.spec.plant_gain;
      c.alphas = {0.5 * g, g, 2.0 * g};
    }
    c.fs = fs;
    c.docs = docs;
    c.baseline = baseline;
    c.random_directions = random_directions;
    c.quality_filter = quality_filter;
    c.jobs = jobs;
    const auto rows = RunSweep(c);
    Emit(SweepToJson(c, rows), out, out_stream);
    return kExitOk;
  }
};

// --- suggestions --------------------------------------------------------------

std::vector<std::string> LongNames(const CLI::App* app) {
  std::vector<std::string> names;
  for (const CLI::Option* o : app->get_options()) {
    for (const auto& n : o->get_lnames()) names.push_back("--" + n);
  }
  return names;
}

std::string Suggest(const std::string& flag, const std::vector<std::string>& known) {
  std::string stem = flag.substr(0, flag.find('='));
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& k : known) {
    const std::size_t d = Levenshtein(stem, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (best.empty() || best_d > std::max<std::size_t>(2, stem.size() / 3)) return "";
  return best;
}

}  // namespace

std::size_t Levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"slam: structural watermarks from contrastive SAE directions", "slam"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", "slam 0.1.0");

  SynthWorldCmd synth;
  MineCmd mine;
  SelectCmd select;
  CalibrateCmd calibrate;
  GenerateCmd generate;
  DetectCmd detect;
  AttackCmd attack;
  EvalCmd eval;
  SweepCmd sweep;
  struct Entry {
    CLI::App* app;
    std::function<int(std::ostream&)> run;
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.Register(sub);
    entries.push_back({sub, [&cmd](std::ostream& o) { return cmd.Run(o); }});
  };
  add("synth-world", "write a synthetic world (pairs, SAEs, prompts, baseline, key)", synth);
  add("mine", "mine a direction bank from contrastive pairs", mine);
  add("select", "print the keyed feature selection of a document", select);
  add("calibrate", "fit null statistics on unwatermarked documents", calibrate);
  add("generate", "generate watermarked (or plain) continuations", generate);
  add("detect", "score documents for the watermark", detect);
  add("attack", "apply a word- or sentence-level edit attack to documents", attack);
  add("eval", "text-quality and detection metrics", eval);
  add("sweep", "k x alpha x F ablation grid on the synthetic backend", sweep);

  if (!args.empty() && args[0].rfind("-", 0) != 0 && app.get_subcommand_no_throw(args[0]) == nullptr) {
    std::vector<std::string> names;
    for (const auto& en : entries) names.push_back(en.app->get_name());
    err << "error: unknown command '" << args[0] << "'";
    const std::string s = Suggest(args[0], names);
    if (!s.empty()) err << "; did you mean '" << s << "'?";
    err << "\nrun 'slam --help' for the command list\n";
    return kExitUsage;
  }
  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();  // the selected subcommand's help when there is one
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "slam 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ExtrasError& e) {
    std::vector<std::string> known = LongNames(&app);
    for (const auto& en : entries) {
      if (en.app->parsed()) {
        const auto more = LongNames(en.app);
        known.insert(known.end(), more.begin(), more.end());
      }
    }
    err << "error: " << e.what() << "\n";
    for (const auto& a : args) {
      if (a.rfind("--", 0) != 0) continue;
      const std::string stem = a.substr(0, a.find('='));
      if (std::find(known.begin(), known.end(), stem) != known.end()) continue;
      const std::string s = Suggest(stem, known);
      if (!s.empty()) err << "unknown flag " << stem << "; did you mean " << s << "?\n";
    }
    err << "run 'slam <command> --help' for usage\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  for (const auto& en : entries) {
    if (!en.app->parsed()) continue;
    try {
      return en.run(out);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  err << "error: no command given\n";
  return kExitUsage;
}

}  // namespace slam::cli
