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
// Word-level robustness attacks. Words are whitespace-delimited; output is
// rejoined with single spaces. Every attack is a pure function of
// (text, parameters, seed).

#ifndef SLAM_ATTACKS_H_
#define SLAM_ATTACKS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace slam {

using Lexicon = std::map<std::string, std::vector<std::string>>;

std::vector<std::string> SplitWords(const std::string& text);
std::string JoinWords(const std::vector<std::string>& words);

// Leading/trailing non-alphanumeric characters are kept around a
// substituted word ("cat," -> "feline,").
struct WordParts {
  std::string prefix;
  std::string core;
  std::string suffix;
};
WordParts SplitAffixes(const std::string& word);

// Drops each word independently with probability p.
std::string WordDelete(const std::string& text, double p, std::uint64_t seed);

// With probability `rate` per word, replaces the word by a uniformly chosen
// synonym from the lexicon (lookup on the lower-cased core); words without
// synonyms are kept. *substituted, when given, receives the number of words
// actually replaced.
std::string SynonymSubstitute(const std::string& text, double rate,
                              const Lexicon& lexicon, std::uint64_t seed,
                              std::size_t* substituted = nullptr);

// Alphabetic words longer than 3 characters across a corpus.
std::set<std::string> BuildVocabulary(const std::vector<std::string>& corpus);

// With probability `rate` per word, replaces the core by a uniformly chosen
// vocabulary word within +-2 characters of its length (the word itself
// excluded); keeps the word when none qualifies.
std::string WordSubstitute(const std::string& text, double rate,
                           const std::set<std::string>& vocab,
                           std::uint64_t seed,
                           std::size_t* substituted = nullptr);

// Sentences end at '.', '?' or '!' followed by whitespace (or end of text).
std::vector<std::string> SplitSentences(const std::string& text);
// Seeded Fisher-Yates shuffle of the sentences. A trailing fragment without
// terminal punctuation keeps its place at the end.
std::string SentenceReorder(const std::string& text, std::uint64_t seed);

// Tab-separated: word, then synonyms separated by tabs or commas. Blank
// lines and lines starting with '#' are skipped. Throws Error when the file
// cannot be read.
Lexicon LoadLexicon(const std::filesystem::path& path);
std::string SerializeLexicon(const Lexicon& lexicon);

enum class AttackKind { kDelete, kSynonym, kWordSub, kReorder };
// "delete" | "synonym" | "wordsub" | "reorder"; throws ArgumentError.
AttackKind ParseAttackKind(const std::string& name);
const char* AttackKindName(AttackKind kind);

}  // namespace slam

#endif  // SLAM_ATTACKS_H_
