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
// Backend adapter over an external process. Every call runs the configured
// command once with a subcommand and file arguments:
//
//   <cmd> info                                   -> JSON on stdout
//   <cmd> encode --text-file F                   -> JSON token array on stdout
//   <cmd> decode --tokens-file F                 -> text on stdout
//   <cmd> forward --tokens-file F --layers 1,2 --logits-from N --prompt-len P
//         [--plan F.slamplan.json] [--no-logits]
//         --out-trace T.slamtrace --out-logits L.slamlogits
//
// `info` reports {"model_id", "d_model", "layers", "vocab_size",
// "separator" (int or null), "special" (int array)}. docs/formats.md has the
// details.

#ifndef SLAM_BRIDGE_H_
#define SLAM_BRIDGE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slam/backend.h"

namespace slam {

// Runs argv (argv[0] resolved via PATH) and returns its stdout. Throws Error
// with the captured output when the process fails or exits non-zero.
std::string RunProcess(const std::vector<std::string>& argv);

// Splits a command string on whitespace. Single or double quotes group
// words (no escapes); an unterminated quote throws ArgumentError.
std::vector<std::string> SplitCommand(const std::string& command);

class BridgeBackend;

class BridgeTokenizer : public Tokenizer {
 public:
  std::vector<TokenId> Encode(std::string_view text) const override;
  std::string Decode(std::span<const TokenId> tokens) const override;
  std::size_t vocab_size() const override { return vocab_size_; }
  std::optional<TokenId> SentenceSeparator() const override { return separator_; }
  bool IsSpecial(TokenId token) const override;

 private:
  friend class BridgeBackend;
  const BridgeBackend* owner_ = nullptr;
  std::size_t vocab_size_ = 0;
  std::optional<TokenId> separator_;
  std::vector<TokenId> special_;  // sorted
};

class BridgeBackend : public Backend {
 public:
  // Queries `info` once. Scratch files go to a fresh directory under the
  // system temp dir, removed on destruction.
  explicit BridgeBackend(std::vector<std::string> command);
  ~BridgeBackend() override;

  ForwardResult Forward(std::span<const TokenId> tokens,
                        const ForwardOptions& options) const override;
  const Tokenizer& tokenizer() const override { return tokenizer_; }
  std::vector<LayerId> layers() const override { return layers_; }
  std::size_t d_model() const override { return d_model_; }
  std::string model_id() const override { return model_id_; }

 private:
  friend class BridgeTokenizer;
  std::string Call(const std::string& subcommand,
                   const std::vector<std::string>& args) const;
  std::filesystem::path Scratch(const std::string& suffix) const;

  std::vector<std::string> command_;
  std::filesystem::path scratch_dir_;
  BridgeTokenizer tokenizer_;
  std::vector<LayerId> layers_;
  std::size_t d_model_ = 0;
  std::string model_id_;
};

}  // namespace slam

#endif  // SLAM_BRIDGE_H_
