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

#ifdef SLAM_HAVE_CLI

#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.h"
#include "slam/crypto.h"
#include "slam/io.h"
#include "test_util.h"

namespace slam {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string S(const fs::path& p) { return p.string(); }

// synth-world -> mine -> calibrate -> generate (marked and plain) -> detect
// -> attack -> eval.
void RunPipeline(const fs::path& d) {
  const auto w = d / "world";
  auto ok = [](const CliResult& r) {
    ASSERT_EQ(r.code, 0) << r.err;
  };
  ok(Cli({"synth-world", "--seed", "7", "--out", S(w), "--prompts", "6", "--baseline", "40",
          "--pairs-per-domain", "6"}));
  ok(Cli({"mine", "--pairs", S(w / "pairs"), "--sae", S(w / "sae.slamsae.json"), "--out",
          S(d / "bank.slambank.json"), "--report", S(d / "report.json")}));
  const std::vector<std::string> common = {"--world", S(w / "world.json"), "--bank",
                                           S(d / "bank.slambank.json"), "--key-file",
                                           S(w / "key.hex")};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.begin() + 1, common.begin(), common.end());
    return a;
  };
  ok(Cli(with({"calibrate", "--baseline-dir", S(w / "baseline"), "--out",
               S(d / "nulls.slamnull.json"), "--jobs", "1"})));
  const std::string nulls = S(d / "nulls.slamnull.json");
  ok(Cli(with({"generate", "--nulls", nulls, "--prompts", S(w / "prompts.json"), "--out-dir",
               S(d / "wm"), "--jobs", "1"})));
  ok(Cli(with({"generate", "--nulls", nulls, "--prompts", S(w / "prompts.json"), "--out-dir",
               S(d / "plain"), "--unwatermarked", "--jobs", "1"})));
  ok(Cli(with({"detect", "--nulls", nulls, "--in-dir", S(d / "wm"), "--label", "watermarked",
               "--out", S(d / "wm_scores.json"), "--jobs", "1"})));
  ok(Cli(with({"detect", "--nulls", nulls, "--in-dir", S(w / "baseline"), "--label",
               "unwatermarked", "--out", S(d / "bl_scores.json"), "--jobs", "1"})));
  ok(Cli({"attack", "--kind", "delete", "--rate", "0.3", "--seed", "3", "--in", S(d / "wm"),
          "--out", S(d / "wm_del")}));
  ok(Cli(with({"detect", "--nulls", nulls, "--in-dir", S(d / "wm_del"), "--label",
               "watermarked", "--out", S(d / "del_scores.json"), "--jobs", "1"})));
  ok(Cli({"eval", "--world", S(w / "world.json"), "--metrics", "distinct", "selfbleu", "tpr", "ppl", "--wm", S(d / "wm"),
               "--bl", S(d / "plain"), "--scores", S(d / "wm_scores.json"), "--scores",
               S(d / "bl_scores.json"), "--out", S(d / "eval.json")}));
}

TEST(Cli, FullPipelineIsByteDeterministic) {
  testing::TempDir a;
  testing::TempDir b;
  RunPipeline(a.path());
  if (HasFatalFailure()) return;
  RunPipeline(b.path());
  if (HasFatalFailure()) return;
  for (const char* f : {"bank.slambank.json", "report.json", "nulls.slamnull.json",
                        "wm_scores.json", "bl_scores.json", "del_scores.json", "eval.json"}) {
    EXPECT_EQ(ReadTextFile(a / f), ReadTextFile(b / f)) << f;
  }
  for (const auto& e : fs::directory_iterator(a / "wm")) {
    EXPECT_EQ(ReadTextFile(e.path()), ReadTextFile(b / "wm" / e.path().filename().string()));
  }
  const auto scores = nlohmann::json::parse(ReadTextFile(a / "wm_scores.json"));
  EXPECT_EQ(scores["format"], "slamscores");
  std::size_t hits = 0;
  for (const auto& r : scores["results"]) hits += r["decision"].get<bool>();
  EXPECT_GE(hits, 5u);
  const auto eval = nlohmann::json::parse(ReadTextFile(a / "eval.json"));
  EXPECT_EQ(eval["format"], "slameval");
}

TEST(Cli, SecretNeverWrittenToArtifacts) {
  testing::TempDir d;
  RunPipeline(d.path());
  if (HasFatalFailure()) return;
  const auto key = LoadKeyFile(d / "world" / "key.hex");
  const std::string hex = HexEncode(key.secret);
  const std::string b64 = Base64Encode(key.secret);
  const std::string raw(key.secret.begin(), key.secret.end());
  for (const auto& e : fs::recursive_directory_iterator(d.path())) {
    if (!e.is_regular_file() || e.path().filename() == "key.hex") continue;
    std::ifstream in(e.path(), std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(bytes.find(hex), std::string::npos) << e.path();
    EXPECT_EQ(bytes.find(b64), std::string::npos) << e.path();
    EXPECT_EQ(bytes.find(raw), std::string::npos) << e.path();
  }
}

TEST(Cli, UnknownCommandSuggestsClosest) {
  const auto r = Cli({"detcet", "--in-dir", "x"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("did you mean 'detect'"), std::string::npos) << r.err;
}

TEST(Cli, UnknownFlagSuggestsClosest) {
  const auto r = Cli({"mine", "--pairs", "p", "--sae", "s", "--out", "o", "--kk", "3"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--k"), std::string::npos) << r.err;
}

TEST(Cli, MissingRequiredFlagIsUsageError) {
  EXPECT_EQ(Cli({"mine", "--pairs", "p"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({}).code, cli::kExitUsage);
}

TEST(Cli, HelpAndVersionSucceed) {
  const auto h = Cli({"--help"});
  EXPECT_EQ(h.code, cli::kExitOk);
  EXPECT_NE(h.out.find("calibrate"), std::string::npos);
  const auto v = Cli({"--version"});
  EXPECT_EQ(v.code, cli::kExitOk);
  EXPECT_NE(v.out.find("0.1.0"), std::string::npos);
}

TEST(Cli, MissingNullsFileIsRuntimeErrorNamingPath) {
  testing::TempDir d;
  ASSERT_EQ(Cli({"synth-world", "--out", S(d / "w"), "--prompts", "2", "--baseline", "30",
                 "--pairs-per-domain", "4"})
                .code,
            0);
  ASSERT_EQ(Cli({"mine", "--pairs", S(d / "w" / "pairs"), "--sae", S(d / "w" / "sae.slamsae.json"),
                 "--out", S(d / "b.json")})
                .code,
            0);
  WriteTextFile(d / "t.txt", "w1 w2 w3");
  const std::string missing = S(d / "nope.slamnull.json");
  const auto r = Cli({"detect", "--world", S(d / "w" / "world.json"), "--bank", S(d / "b.json"),
                      "--key-file", S(d / "w" / "key.hex"), "--nulls", missing, "--doc-id", "x",
                      "--text-file", S(d / "t.txt")});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST(Cli, ConfigFileSuppliesFlagsAndRejectsUnknownKeys) {
  testing::TempDir d;
  WriteTextFile(d / "ok.toml", "[synth-world]\nprompts = 3\nbaseline = 30\npairs-per-domain = 4\n");
  ASSERT_EQ(Cli({"--config", S(d / "ok.toml"), "synth-world", "--out", S(d / "w")}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(ReadTextFile(d / "w" / "prompts.json")).size(), 3u);
  WriteTextFile(d / "bad.toml", "[synth-world]\nprompt = 3\n");
  EXPECT_EQ(Cli({"--config", S(d / "bad.toml"), "synth-world", "--out", S(d / "w2")}).code,
            cli::kExitUsage);
}

TEST(Cli, SelectPrintsDeterministicSelection) {
  testing::TempDir d;
  ASSERT_EQ(Cli({"synth-world", "--out", S(d / "w"), "--prompts", "2", "--baseline", "30",
                 "--pairs-per-domain", "4"})
                .code,
            0);
  ASSERT_EQ(Cli({"mine", "--pairs", S(d / "w" / "pairs"), "--sae", S(d / "w" / "sae.slamsae.json"),
                 "--out", S(d / "b.json")})
                .code,
            0);
  const std::vector<std::string> args = {"select", "--bank", S(d / "b.json"), "--key-file",
                                         S(d / "w" / "key.hex"), "--doc-id", "doc-0001"};
  const auto a = Cli(args);
  const auto b = Cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["selections"].size(), 1u);
  EXPECT_EQ(j["selections"][0]["features"].size(), 7u);
}

TEST(Levenshtein, Distances) {
  EXPECT_EQ(cli::Levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(cli::Levenshtein("", "abc"), 3u);
  EXPECT_EQ(cli::Levenshtein("same", "same"), 0u);
}

}  // namespace
}  // namespace slam

#endif  // SLAM_HAVE_CLI
