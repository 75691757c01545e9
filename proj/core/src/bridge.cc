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

#include "slam/bridge.h"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "slam/error.h"
#include "slam/io.h"

namespace slam {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::atomic<std::uint64_t> g_scratch_counter{0};

std::string JoinLayers(const std::vector<LayerId>& layers) {
  std::string s;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(layers[i]);
  }
  return s;
}

Json ParseOutput(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError("bridge " + what + " output: " + e.what(), e.byte);
  }
}

}  // namespace

std::vector<std::string> SplitCommand(const std::string& command) {
  std::vector<std::string> out;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (char c : command) {
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else {
        cur += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      if (in_word) out.push_back(cur);
      cur.clear();
      in_word = false;
    } else {
      cur += c;
      in_word = true;
    }
  }
  if (quote != 0) throw ArgumentError("unterminated quote in command: " + command);
  if (in_word) out.push_back(cur);
  return out;
}

std::string RunProcess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ArgumentError("empty bridge command");
  int out_pipe[2];
  if (pipe(out_pipe) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  int err_pipe[2];
  if (pipe(err_pipe) != 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execvp(cargv[0], cargv.data());
    const std::string msg = std::string("exec ") + argv[0] + ": " + std::strerror(errno) + "\n";
    (void)!write(STDERR_FILENO, msg.data(), msg.size());
    _exit(127);
  }
  close(out_pipe[1]);
  close(err_pipe[1]);

  // Drain both pipes without blocking on either.
  std::string out;
  std::string err;
  fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
  fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);
  bool out_open = true;
  bool err_open = true;
  char buf[65536];
  while (out_open || err_open) {
    fd_set fds;
    FD_ZERO(&fds);
    if (out_open) FD_SET(out_pipe[0], &fds);
    if (err_open) FD_SET(err_pipe[0], &fds);
    const int maxfd = std::max(out_pipe[0], err_pipe[0]) + 1;
    if (select(maxfd, &fds, nullptr, nullptr, nullptr) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (auto [fd, open, sink] : {std::tuple{out_pipe[0], &out_open, &out},
                                  std::tuple{err_pipe[0], &err_open, &err}}) {
      if (!*open || !FD_ISSET(fd, &fds)) continue;
      const ssize_t n = read(fd, buf, sizeof(buf));
      if (n > 0) {
        sink->append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        *open = false;
      }
    }
  }
  close(out_pipe[0]);
  close(err_pipe[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::string cmd;
    for (const auto& a : argv) cmd += (cmd.empty() ? "" : " ") + a;
    throw Error("bridge command failed (" +
                (WIFEXITED(status) ? "exit " + std::to_string(WEXITSTATUS(status))
                                   : std::string("signal")) +
                "): " + cmd + (err.empty() ? "" : "\n" + err));
  }
  return out;
}

// --- tokenizer ----------------------------------------------------------------

std::vector<TokenId> BridgeTokenizer::Encode(std::string_view text) const {
  const fs::path f = owner_->Scratch(".txt");
  WriteTextFile(f, std::string(text));
  const Json j = ParseOutput(owner_->Call("encode", {"--text-file", f.string()}), "encode");
  fs::remove(f);
  if (!j.is_array()) throw ParseError("bridge encode output must be a JSON array", 0);
  std::vector<TokenId> out;
  for (const auto& v : j) {
    const auto t = v.get<std::int64_t>();
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw InvariantError("bridge returned token " + std::to_string(t) + " outside the vocabulary");
    }
    out.push_back(static_cast<TokenId>(t));
  }
  return out;
}

std::string BridgeTokenizer::Decode(std::span<const TokenId> tokens) const {
  const fs::path f = owner_->Scratch(".json");
  WriteTextFile(f, Json(std::vector<TokenId>(tokens.begin(), tokens.end())).dump());
  std::string out = owner_->Call("decode", {"--tokens-file", f.string()});
  fs::remove(f);
  return out;
}

bool BridgeTokenizer::IsSpecial(TokenId token) const {
  return std::binary_search(special_.begin(), special_.end(), token);
}

// --- backend ------------------------------------------------------------------

BridgeBackend::BridgeBackend(std::vector<std::string> command)
    : command_(std::move(command)) {
  if (command_.empty()) throw ArgumentError("empty bridge command");
  std::random_device rd;
  scratch_dir_ = fs::temp_directory_path() /
                 ("slam-bridge-" + std::to_string(getpid()) + "-" + std::to_string(rd()));
  fs::create_directories(scratch_dir_);
  tokenizer_.owner_ = this;

  const Json info = ParseOutput(Call("info", {}), "info");
  try {
    model_id_ = info.at("model_id").get<std::string>();
    d_model_ = info.at("d_model").get<std::size_t>();
    layers_ = info.at("layers").get<std::vector<LayerId>>();
    tokenizer_.vocab_size_ = info.at("vocab_size").get<std::size_t>();
    if (info.contains("separator") && !info["separator"].is_null()) {
      tokenizer_.separator_ = info["separator"].get<TokenId>();
    }
    if (info.contains("special")) {
      tokenizer_.special_ = info["special"].get<std::vector<TokenId>>();
      std::sort(tokenizer_.special_.begin(), tokenizer_.special_.end());
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bridge info: ") + e.what(), 0);
  }
  if (d_model_ == 0 || layers_.empty() || tokenizer_.vocab_size_ == 0) {
    throw InvariantError("bridge info reports an empty model");
  }
}

BridgeBackend::~BridgeBackend() {
  std::error_code ec;
  fs::remove_all(scratch_dir_, ec);
}

fs::path BridgeBackend::Scratch(const std::string& suffix) const {
  return scratch_dir_ / ("f" + std::to_string(g_scratch_counter.fetch_add(1)) + suffix);
}

std::string BridgeBackend::Call(const std::string& subcommand,
                                const std::vector<std::string>& args) const {
  std::vector<std::string> argv = command_;
  argv.push_back(subcommand);
  argv.insert(argv.end(), args.begin(), args.end());
  return RunProcess(argv);
}

ForwardResult BridgeBackend::Forward(std::span<const TokenId> tokens,
                                     const ForwardOptions& options) const {
  CheckPlan(options.plan);
  if (options.logits_from > tokens.size()) {
    throw ArgumentError("logits_from beyond the sequence");
  }
  CountForward();
  const fs::path tok_file = Scratch(".json");
  const fs::path trace_file = Scratch(".slamtrace");
  const fs::path logits_file = Scratch(".slamlogits");
  WriteTextFile(tok_file, Json(std::vector<TokenId>(tokens.begin(), tokens.end())).dump());
  std::vector<std::string> args = {"--tokens-file", tok_file.string(),
                                   "--layers", JoinLayers(options.record_layers),
                                   "--logits-from", std::to_string(options.logits_from),
                                   "--prompt-len", std::to_string(options.prompt_len),
                                   "--out-trace", trace_file.string(),
                                   "--out-logits", logits_file.string()};
  fs::path plan_file;
  if (options.plan != nullptr) {
    plan_file = Scratch(".slamplan.json");
    WriteTextFile(plan_file, SerializePlan(*options.plan));
    args.push_back("--plan");
    args.push_back(plan_file.string());
  }
  if (!options.want_logits) args.push_back("--no-logits");
  Call("forward", args);

  ForwardResult res;
  if (!options.record_layers.empty()) {
    res.trace = LoadTrace(trace_file);
    if (res.trace.num_tokens() != tokens.size() || res.trace.d_model != d_model_) {
      throw DimensionError("bridge trace shape disagrees with the request");
    }
    for (LayerId l : options.record_layers) {
      if (!res.trace.activations.count(l)) {
        throw InvariantError("bridge trace lacks layer " + std::to_string(l));
      }
    }
  } else {
    res.trace.model_id = model_id_;
    res.trace.d_model = d_model_;
    res.trace.tokens.assign(tokens.begin(), tokens.end());
    res.trace.prompt_len = options.prompt_len;
  }
  if (options.want_logits) {
    res.logits = DeserializeLogits(ReadBinaryFile(logits_file));
    if (res.logits.rows() != tokens.size() - options.logits_from ||
        res.logits.cols() != tokenizer_.vocab_size_) {
      throw DimensionError("bridge logits shape disagrees with the request");
    }
  }
  std::error_code ec;
  for (const auto& f : {tok_file, trace_file, logits_file, plan_file}) {
    if (!f.empty()) fs::remove(f, ec);
  }
  return res;
}

}  // namespace slam
