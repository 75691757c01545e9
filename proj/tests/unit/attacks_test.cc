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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "slam/attacks.h"
#include "slam/error.h"
#include "test_util.h"

namespace slam {
namespace {

std::string ManyWords(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

TEST(WordDelete, Extremes) {
  const std::string text = "the quick  brown\tfox";
  EXPECT_EQ(WordDelete(text, 0.0, 1), "the quick brown fox");
  EXPECT_EQ(WordDelete(text, 1.0, 1), "");
}

TEST(WordDelete, EmpiricalRateNearNominal) {
  const std::string text = ManyWords(10000);
  const auto kept = SplitWords(WordDelete(text, 0.3, 42)).size();
  EXPECT_NEAR(1.0 - kept / 10000.0, 0.30, 0.02);
}

TEST(WordDelete, KeepsOrderAndNeverAddsWords) {
  const std::string text = ManyWords(500);
  const auto out = SplitWords(WordDelete(text, 0.5, 3));
  const auto in = SplitWords(text);
  EXPECT_TRUE(std::includes(in.begin(), in.end(), out.begin(), out.end(),
                            [](const std::string& a, const std::string& b) {
                              return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
                            }));
}

TEST(WordDelete, SeedDeterminesOutput) {
  const std::string text = ManyWords(200);
  EXPECT_EQ(WordDelete(text, 0.3, 9), WordDelete(text, 0.3, 9));
  EXPECT_NE(WordDelete(text, 0.3, 9), WordDelete(text, 0.3, 10));
}

TEST(SynonymSubstitute, EmptyLexiconIsIdentity) {
  EXPECT_EQ(SynonymSubstitute("a cat sat", 1.0, {}, 1), "a cat sat");
}

TEST(SynonymSubstitute, FullRateReplacesEveryCovered) {
  const Lexicon lex = {{"cat", {"feline"}}};
  std::size_t n = 0;
  EXPECT_EQ(SynonymSubstitute("the cat, a Cat and cat.", 1.0, lex, 5, &n),
            "the feline, a feline and feline.");
  EXPECT_EQ(n, 3u);
}

TEST(SynonymSubstitute, EffectiveRateBelowNominalWithPartialCoverage) {
  const auto words = SplitWords(ManyWords(5000));
  Lexicon lex;
  for (std::size_t i = 0; i < words.size(); i += 2) lex[words[i]] = {"x" + words[i]};
  std::size_t n = 0;
  const auto out = SynonymSubstitute(JoinWords(words), 0.3, lex, 7, &n);
  const double effective = n / 5000.0;
  EXPECT_LT(effective, 0.3);
  EXPECT_NEAR(effective, 0.15, 0.02);
  EXPECT_EQ(SplitWords(out).size(), words.size());
}

TEST(WordSubstitute, DegenerateVocabulariesAreIdentity) {
  EXPECT_EQ(WordSubstitute("alpha beta gamma", 1.0, {}, 1), "alpha beta gamma");
  EXPECT_EQ(WordSubstitute("alpha beta gamma", 1.0, {"extraordinarily"}, 1), "alpha beta gamma");
}

TEST(WordSubstitute, RespectsLengthWindowAndCount) {
  const std::set<std::string> vocab = {"tree", "house", "river", "mountains"};
  std::size_t n = 0;
  const auto out = SplitWords(WordSubstitute("lake forest", 1.0, vocab, 3, &n));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(n, 2u);
  for (const auto& w : out) EXPECT_TRUE(vocab.count(w)) << w;
  for (const auto& w : out) EXPECT_NE(w, "mountains");
}

TEST(WordSubstitute, CorpusRateOnSyntheticTexts) {
  const auto& w = testing::World();
  const auto& tok = w.world.backend().tokenizer();
  std::vector<std::string> corpus;
  for (const auto& t : w.baseline) {
    corpus.push_back(tok.Decode(std::span(t.tokens).subspan(t.prompt_len)));
  }
  const auto vocab = BuildVocabulary(corpus);
  std::size_t subs = 0;
  std::size_t words = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::size_t n = 0;
    const auto out = WordSubstitute(corpus[i], 0.15, vocab, 100 + i, &n);
    subs += n;
    words += SplitWords(corpus[i]).size();
    EXPECT_EQ(SplitWords(out).size(), SplitWords(corpus[i]).size());
  }
  const double rate = static_cast<double>(subs) / static_cast<double>(words);
  // Nearly every word has a same-length candidate, so the rate sits at the
  // nominal 0.15 up to binomial noise; allow three standard errors above.
  EXPECT_LE(rate, 0.15 + 3.0 * std::sqrt(0.15 * 0.85 / static_cast<double>(words)));
  EXPECT_GE(rate, 0.10);
}

TEST(BuildVocabulary, AlphabeticLongerThanThree) {
  EXPECT_EQ(BuildVocabulary({"The cat slept soundly.", "abc1 dogs"}),
            (std::set<std::string>{"dogs", "slept", "soundly"}));
}

TEST(SentenceReorder, SingleSentenceIsIdentity) {
  EXPECT_EQ(SentenceReorder("just one sentence here.", 4), "just one sentence here.");
}

TEST(SentenceReorder, TwoSentencesSwapForSomeSeed) {
  bool swapped = false;
  for (std::uint64_t s = 0; s < 20 && !swapped; ++s) {
    swapped = SentenceReorder("First one. Second one.", s) == "Second one. First one.";
  }
  EXPECT_TRUE(swapped);
}

TEST(SentenceReorder, PreservesSentenceMultiset) {
  std::string text;
  for (int i = 0; i < 12; ++i) text += "sentence number " + std::to_string(i) + (i % 3 ? ". " : "? ");
  text += "tail without end";
  EXPECT_EQ(SplitSentences(SentenceReorder(text, 1)).back(), "tail without end");
  auto before = SplitSentences(text);
  std::sort(before.begin(), before.end());
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto after = SplitSentences(SentenceReorder(text, s));
    std::sort(after.begin(), after.end());
    ASSERT_EQ(after, before) << "seed " << s;
  }
}

TEST(Lexicon, ParsesTabsCommasAndComments) {
  testing::TempDir dir;
  {
    std::ofstream f(dir / "lex.tsv");
    f << "# comment\n\ncat\tfeline, kitty\nbig\tlarge\thuge\n";
  }
  const auto lex = LoadLexicon(dir / "lex.tsv");
  EXPECT_EQ(lex.at("cat"), (std::vector<std::string>{"feline", "kitty"}));
  EXPECT_EQ(lex.at("big"), (std::vector<std::string>{"large", "huge"}));
  EXPECT_EQ(lex.size(), 2u);
  {
    std::ofstream f(dir / "again.tsv");
    f << SerializeLexicon(lex);
  }
  EXPECT_EQ(LoadLexicon(dir / "again.tsv"), lex);
}

TEST(Lexicon, MissingFileIsAnError) {
  EXPECT_THROW(LoadLexicon("/nonexistent/lexicon.tsv"), Error);
}

TEST(AttackKind, NamesRoundTrip) {
  for (const char* n : {"delete", "synonym", "wordsub", "reorder"}) {
    EXPECT_STREQ(AttackKindName(ParseAttackKind(n)), n);
  }
  EXPECT_THROW(ParseAttackKind("shuffle"), ArgumentError);
}

}  // namespace
}  // namespace slam
