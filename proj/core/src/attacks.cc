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

#include "slam/attacks.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "slam/backend.h"
#include "slam/error.h"

namespace slam {
namespace {

bool IsAlnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string Lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> SplitWords(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

WordParts SplitAffixes(const std::string& word) {
  std::size_t b = 0;
  while (b < word.size() && !IsAlnum(word[b])) ++b;
  std::size_t e = word.size();
  while (e > b && !IsAlnum(word[e - 1])) --e;
  return {word.substr(0, b), word.substr(b, e - b), word.substr(e)};
}

std::string WordDelete(const std::string& text, double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) throw ArgumentError("deletion probability outside [0,1]");
  std::mt19937_64 rng(seed);
  std::vector<std::string> kept;
  for (auto& w : SplitWords(text)) {
    // One draw per word keeps the stream aligned regardless of outcome.
    if (UniformUnit(rng) >= p) kept.push_back(std::move(w));
  }
  return JoinWords(kept);
}

std::string SynonymSubstitute(const std::string& text, double rate,
                              const Lexicon& lexicon, std::uint64_t seed,
                              std::size_t* substituted) {
  if (rate < 0.0 || rate > 1.0) throw ArgumentError("rate outside [0,1]");
  std::mt19937_64 rng(seed);
  auto words = SplitWords(text);
  std::size_t count = 0;
  for (auto& w : words) {
    if (UniformUnit(rng) >= rate) continue;
    WordParts parts = SplitAffixes(w);
    const auto it = lexicon.find(Lower(parts.core));
    if (it == lexicon.end() || it->second.empty()) continue;
    const auto& syns = it->second;
    w = parts.prefix + syns[UniformIndex(rng, syns.size())] + parts.suffix;
    ++count;
  }
  if (substituted != nullptr) *substituted = count;
  return JoinWords(words);
}

std::set<std::string> BuildVocabulary(const std::vector<std::string>& corpus) {
  std::set<std::string> vocab;
  for (const auto& text : corpus) {
    for (const auto& w : SplitWords(text)) {
      const std::string core = SplitAffixes(w).core;
      if (core.size() <= 3) continue;
      if (std::all_of(core.begin(), core.end(), [](char c) {
            return std::isalpha(static_cast<unsigned char>(c)) != 0;
          })) {
        vocab.insert(core);
      }
    }
  }
  return vocab;
}

std::string WordSubstitute(const std::string& text, double rate,
                           const std::set<std::string>& vocab,
                           std::uint64_t seed, std::size_t* substituted) {
  if (rate < 0.0 || rate > 1.0) throw ArgumentError("rate outside [0,1]");
  // Bucket the vocabulary by length once.
  std::map<std::size_t, std::vector<const std::string*>> by_length;
  for (const auto& v : vocab) by_length[v.size()].push_back(&v);

  std::mt19937_64 rng(seed);
  auto words = SplitWords(text);
  std::size_t count = 0;
  for (auto& w : words) {
    if (UniformUnit(rng) >= rate) continue;
    WordParts parts = SplitAffixes(w);
    const std::size_t len = parts.core.size();
    std::vector<const std::string*> candidates;
    const std::size_t lo = len >= 2 ? len - 2 : 0;
    for (auto it = by_length.lower_bound(lo);
         it != by_length.end() && it->first <= len + 2; ++it) {
      for (const auto* c : it->second) {
        if (*c != parts.core) candidates.push_back(c);
      }
    }
    if (candidates.empty()) continue;
    w = parts.prefix + *candidates[UniformIndex(rng, candidates.size())] +
        parts.suffix;
    ++count;
  }
  if (substituted != nullptr) *substituted = count;
  return JoinWords(words);
}

std::vector<std::string> SplitSentences(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    const char c = text[i];
    const bool boundary =
        (c == '.' || c == '?' || c == '!') &&
        (i + 1 == text.size() ||
         std::isspace(static_cast<unsigned char>(text[i + 1])) != 0);
    if (boundary) {
      const std::string s = Trim(current);
      if (!s.empty()) out.push_back(s);
      current.clear();
    }
  }
  const std::string rest = Trim(current);
  if (!rest.empty()) out.push_back(rest);
  return out;
}

std::string SentenceReorder(const std::string& text, std::uint64_t seed) {
  auto sentences = SplitSentences(text);
  // An unterminated tail would fuse with its successor if moved, so it
  // stays last and only the terminated sentences are shuffled.
  std::size_t n = sentences.size();
  if (n > 0) {
    const char last = sentences.back().back();
    if (last != '.' && last != '?' && last != '!') --n;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = UniformIndex(rng, i);
    std::swap(sentences[i - 1], sentences[j]);
  }
  return JoinWords(sentences);
}

Lexicon LoadLexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read lexicon file " + path.string());
  Lexicon lexicon;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string word = Lower(Trim(line.substr(0, tab)));
    std::string rest = line.substr(tab + 1);
    std::replace(rest.begin(), rest.end(), '\t', ',');
    std::istringstream fields(rest);
    std::string syn;
    auto& list = lexicon[word];
    while (std::getline(fields, syn, ',')) {
      syn = Trim(syn);
      if (!syn.empty() && syn != word) list.push_back(syn);
    }
  }
  return lexicon;
}

std::string SerializeLexicon(const Lexicon& lexicon) {
  std::string out;
  for (const auto& [word, syns] : lexicon) {
    out += word;
    out += '\t';
    for (std::size_t i = 0; i < syns.size(); ++i) {
      if (i > 0) out += ',';
      out += syns[i];
    }
    out += '\n';
  }
  return out;
}

AttackKind ParseAttackKind(const std::string& name) {
  if (name == "delete") return AttackKind::kDelete;
  if (name == "synonym") return AttackKind::kSynonym;
  if (name == "wordsub") return AttackKind::kWordSub;
  if (name == "reorder") return AttackKind::kReorder;
  throw ArgumentError("unknown attack kind '" + name +
                      "' (expected delete|synonym|wordsub|reorder)");
}

const char* AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kDelete:
      return "delete";
    case AttackKind::kSynonym:
      return "synonym";
    case AttackKind::kWordSub:
      return "wordsub";
    case AttackKind::kReorder:
      return "reorder";
  }
  return "unknown";
}

}  // namespace slam
