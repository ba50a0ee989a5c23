#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "prokwo/corpus.hpp"

namespace {

using prokwo::Corpus;
using prokwo::Document;
using prokwo::Utterance;

const std::filesystem::path kData = PROKWO_TEST_DATA_DIR;

std::vector<std::string> toks(std::initializer_list<const char*> words) { return {words.begin(), words.end()}; }

Document make_doc(std::string id, std::optional<int> age, std::vector<Utterance> utts = {}) {
  Document d;
  d.doc_id = std::move(id);
  d.child_age_months = age;
  d.utterances = std::move(utts);
  d.source = "test";
  return d;
}

}  // namespace

TEST(NormalizeTokens, PlainSentence) {
  EXPECT_EQ(prokwo::normalize_tokens("Look at the doggie ."), toks({"look", "at", "the", "doggie"}));
}

TEST(NormalizeTokens, FillersAndBracketCodesRemoved) {
  EXPECT_EQ(prokwo::normalize_tokens("the &-um dog [!]"), toks({"the", "dog"}));
}

TEST(NormalizeTokens, AngleBracketRetracingRemovedButRepeatKept) {
  EXPECT_EQ(prokwo::normalize_tokens("<the dog> [/] the dog ran"), toks({"the", "dog", "ran"}));
  EXPECT_EQ(prokwo::normalize_tokens("dog dog dog"), toks({"dog", "dog", "dog"}));
}

TEST(NormalizeTokens, SpecialFormSuffixAndOmittedSounds) {
  EXPECT_EQ(prokwo::normalize_tokens("doggie@c (be)cause"), toks({"doggie", "because"}));
  EXPECT_EQ(prokwo::normalize_tokens("@Begin &=laughs"), toks({}));
}

TEST(NormalizeTokens, PunctuationOnlyTokensAndEdgesDropped) {
  EXPECT_EQ(prokwo::normalize_tokens("what , is +... that ?"), toks({"what", "is", "that"}));
  EXPECT_EQ(prokwo::normalize_tokens("\"hello!\""), toks({"hello"}));
  EXPECT_EQ(prokwo::normalize_tokens("it's"), toks({"it's"}));
}

TEST(NormalizeTokens, MediaBulletsRemoved) {
  EXPECT_EQ(prokwo::normalize_tokens("hi there . \x15" "100_200\x15"), toks({"hi", "there"}));
}

TEST(NormalizeTokens, EmptyInput) { EXPECT_TRUE(prokwo::normalize_tokens("").empty()); }

TEST(NormalizeTokens, IdempotentOnRandomMarkup) {
  const std::vector<std::string> pieces = {"Dog",  "the", "&-uh", "[!]",     "<a b>", "[/]", "(be)cause",
                                           "x@c",  ",",   "?",    "+...",    "it's",  "HAT", "\x15" "1_2\x15",
                                           "[=! laughs]", "ba(na)na", "\"quoted\"", "0", "&=cries", "we're"};
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> len(0, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string raw;
    for (int k = len(rng); k > 0; --k) raw += pieces[pick(rng)] + " ";
    const auto once = prokwo::normalize_tokens(raw);
    const auto twice = prokwo::normalize_tokens(prokwo::join_tokens(once));
    ASSERT_EQ(once, twice) << "input: " << raw;
    for (const auto& t : once) {
      ASSERT_FALSE(t.empty());
      ASSERT_EQ(t, prokwo::detail::to_lower(t));
      ASSERT_EQ(t.find_first_of("[]<>&@ "), std::string::npos) << t;
    }
  }
}

TEST(ChatAge, TruncatesToWholeMonths) {
  EXPECT_EQ(prokwo::parse_chat_age("1;06.00"), 18);
  EXPECT_EQ(prokwo::parse_chat_age("1;06.29"), 18);
  EXPECT_EQ(prokwo::parse_chat_age("2;00."), 24);
  EXPECT_EQ(prokwo::parse_chat_age("2;"), 24);
  EXPECT_FALSE(prokwo::parse_chat_age(""));
  EXPECT_FALSE(prokwo::parse_chat_age("1;13.00"));
  EXPECT_FALSE(prokwo::parse_chat_age("a;01"));
}

TEST(ParseChat, AgeAndUtterances) {
  const std::string text =
      "@Begin\n@ID:\teng|x|CHI|1;06.00|female|||Target_Child|||\n*MOT:\thello there .\n*MOT:\tthe dog .\n@End\n";
  const auto r = prokwo::parse_chat(text, "d1");
  EXPECT_EQ(r.document.child_age_months, 18);
  ASSERT_EQ(r.document.utterances.size(), 2u);
  EXPECT_EQ(r.document.utterances[0].speaker, "MOT");
  EXPECT_TRUE(r.warnings.empty());
}

TEST(ParseChat, NoUtteranceLines) {
  const auto r = prokwo::parse_chat("@Begin\n@ID:\teng|x|CHI|2;01.00|||||Target_Child|||\n@End\n", "d");
  EXPECT_TRUE(r.document.utterances.empty());
  EXPECT_EQ(r.document.child_age_months, 25);
}

TEST(ParseChat, MalformedUtteranceLineReportsLineNumber) {
  const std::string text = "@Begin\n*MOT:\tok .\n*MOT no colon here\n@End\n";
  try {
    prokwo::parse_chat(text, "bad", "bad.cha");
    FAIL() << "expected ParseError";
  } catch (const prokwo::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bad.cha:3"), std::string::npos);
  }
}

TEST(ParseChat, MissingTargetChildGivesAbsentAgeAndWarning) {
  const auto r = prokwo::parse_chat("@ID:\teng|x|MOT|||||Mother|||\n*MOT:\thi .\n", "m");
  EXPECT_FALSE(r.document.child_age_months);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("m:"), std::string::npos);
}

TEST(ParseChat, TargetChildRolePreferredOverChiCode) {
  const std::string text =
      "@ID:\teng|x|CHI|1;08.00||||Sibling|||\n@ID:\teng|x|BRO|2;03.00||||Target_Child|||\n*MOT:\thi .\n";
  EXPECT_EQ(prokwo::parse_chat(text, "x").document.child_age_months, 27);
}

TEST(ParseChat, ContinuationLinesJoinedAndDependentTiersIgnored) {
  const std::string text = "*MOT:\tthe big\n\tred dog .\n%mor:\tdet|the adj|big .\n*FAT:\tyes .\n";
  const auto r = prokwo::parse_chat(text, "c");
  ASSERT_EQ(r.document.utterances.size(), 2u);
  EXPECT_EQ(r.document.utterances[0].tokens, toks({"the", "big", "red", "dog"}));
  EXPECT_EQ(r.document.utterances[1].speaker, "FAT");
}

TEST(ParseChat, MatchesHandTokenizedReferences) {
  for (const std::string name : {"t1", "t2", "t3"}) {
    const auto doc = prokwo::parse_chat(prokwo::read_text_file(kData / "chat" / (name + ".cha")), name).document;
    std::ifstream ref(kData / "chat" / (name + ".tokens"));
    std::string line;
    std::size_t i = 0;
    while (std::getline(ref, line)) {
      const auto tab = line.find('\t');
      ASSERT_LT(i, doc.utterances.size()) << name;
      EXPECT_EQ(doc.utterances[i].speaker, line.substr(0, tab)) << name << " utterance " << i;
      EXPECT_EQ(prokwo::join_tokens(doc.utterances[i].tokens), line.substr(tab + 1)) << name << " utterance " << i;
      ++i;
    }
    EXPECT_EQ(i, doc.utterances.size()) << name;
  }
  const auto t1 = prokwo::parse_chat(prokwo::read_text_file(kData / "chat" / "t1.cha"), "t1");
  const auto t2 = prokwo::parse_chat(prokwo::read_text_file(kData / "chat" / "t2.cha"), "t2");
  const auto t3 = prokwo::parse_chat(prokwo::read_text_file(kData / "chat" / "t3.cha"), "t3");
  EXPECT_EQ(t1.document.child_age_months, 18);
  EXPECT_EQ(t2.document.child_age_months, 24);
  EXPECT_FALSE(t3.document.child_age_months);
  EXPECT_EQ(t3.warnings.size(), 1u);
}

TEST(ParseNormalized, PreTokenizedPassedThroughLowercased) {
  const auto c = prokwo::parse_normalized(
      R"({"doc_id":"a","child_age_months":20,"utterances":[{"speaker":"MOT","tokens":["The","dog"]}]})");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.documents()[0].utterances[0].tokens, toks({"the", "dog"}));
}

TEST(ParseNormalized, RawTextIsTokenized) {
  const auto c = prokwo::parse_normalized(
      R"({"doc_id":"a","child_age_months":null,"utterances":[{"speaker":"MOT","text":"the &-um dog [!] ."}]})");
  EXPECT_FALSE(c.documents()[0].child_age_months);
  EXPECT_EQ(c.documents()[0].utterances[0].tokens, toks({"the", "dog"}));
}

TEST(ParseNormalized, DuplicateIdRejected) {
  EXPECT_THROW(prokwo::parse_normalized("{\"doc_id\":\"a\",\"utterances\":[]}\n{\"doc_id\":\"a\",\"utterances\":[]}\n"),
               prokwo::DataError);
}

TEST(ParseNormalized, MissingIdRejected) {
  try {
    prokwo::parse_normalized("{\"utterances\":[]}\n", "input.jsonl");
    FAIL();
  } catch (const prokwo::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("input.jsonl:1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("doc_id"), std::string::npos);
  }
}

TEST(ParseNormalized, BadJsonIsParseErrorWithLine) {
  try {
    prokwo::parse_normalized("\n{\"doc_id\":\"a\"}\n{oops\n", "f.jsonl");
    FAIL();
  } catch (const prokwo::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseNormalized, NegativeAgeRejected) {
  EXPECT_THROW(prokwo::parse_normalized(R"({"doc_id":"a","child_age_months":-1,"utterances":[]})"), prokwo::DataError);
}

TEST(ParseNormalized, RoundTripOfChatFixtures) {
  Corpus corpus;
  for (const std::string name : {"t1", "t2", "t3"}) {
    corpus.add(prokwo::parse_chat(prokwo::read_text_file(kData / "chat" / (name + ".cha")), name, name + ".cha").document);
  }
  const auto text = prokwo::serialize_normalized(corpus);
  EXPECT_EQ(prokwo::parse_normalized(text), corpus);
  EXPECT_EQ(prokwo::serialize_normalized(prokwo::parse_normalized(text)), text);
}

TEST(ParseNormalized, RoundTripOfRandomCorpora) {
  std::mt19937 rng(11);
  const std::vector<std::string> words = {"a", "dog", "it's", "x_y", "ünï", "the", "more"};
  for (int trial = 0; trial < 200; ++trial) {
    Corpus c;
    const int docs = static_cast<int>(rng() % 6);
    for (int d = 0; d < docs; ++d) {
      std::vector<Utterance> utts;
      for (int u = static_cast<int>(rng() % 4); u > 0; --u) {
        Utterance utt{rng() % 2 ? "MOT" : "CHI", {}};
        for (int t = static_cast<int>(rng() % 5); t > 0; --t) utt.tokens.push_back(words[rng() % words.size()]);
        utts.push_back(utt);
      }
      std::optional<int> age;
      if (rng() % 3) age = static_cast<int>(rng() % 40);
      c.add(make_doc("doc" + std::to_string(d), age, utts));
    }
    ASSERT_EQ(prokwo::parse_normalized(prokwo::serialize_normalized(c)), c);
  }
}

TEST(CumulativeSlice, SelectsAgeTaggedDocumentsUpToCutoff) {
  Corpus c;
  c.add(make_doc("a", 14));
  c.add(make_doc("b", 18));
  c.add(make_doc("c", 24));
  c.add(make_doc("d", std::nullopt));
  const auto s = prokwo::cumulative_slice(c, 18);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.document(0).doc_id, "a");
  EXPECT_EQ(s.document(1).doc_id, "b");
  ASSERT_EQ(s.skipped.size(), 1u);
  EXPECT_EQ(s.skipped[0].doc_id, "d");
  EXPECT_EQ(s.skipped[0].reason, "missing-age");
  EXPECT_FALSE(s.speaker_filter.include_target_child);
}

TEST(CumulativeSlice, CutoffOutsideRangeIsConfigError) {
  Corpus c;
  EXPECT_THROW(prokwo::cumulative_slice(c, 15), prokwo::ConfigError);
  EXPECT_THROW(prokwo::cumulative_slice(c, 31), prokwo::ConfigError);
  EXPECT_NO_THROW(prokwo::cumulative_slice(c, 16));
  EXPECT_NO_THROW(prokwo::cumulative_slice(c, 30));
}

TEST(CumulativeSlice, MonotoneInCutoffOnRandomCorpora) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus c;
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      std::optional<int> age;
      if (rng() % 5) age = static_cast<int>(rng() % 36);
      c.add(make_doc("d" + std::to_string(i), age));
    }
    for (int a = 16; a <= 30; ++a) {
      const auto small = prokwo::cumulative_slice(c, a);
      for (std::size_t i = 0; i < small.size(); ++i) {
        ASSERT_TRUE(small.document(i).child_age_months);
        ASSERT_LE(*small.document(i).child_age_months, a);
      }
      for (int b = a; b <= 30; ++b) {
        const auto big = prokwo::cumulative_slice(c, b);
        ASSERT_TRUE(std::includes(big.document_indices.begin(), big.document_indices.end(),
                                  small.document_indices.begin(), small.document_indices.end()));
      }
    }
  }
}

TEST(Corpus, DuplicateAndEmptyIdsRejected) {
  Corpus c;
  c.add(make_doc("a", 20));
  EXPECT_THROW(c.add(make_doc("a", 21)), prokwo::DataError);
  EXPECT_THROW(c.add(make_doc("", 21)), prokwo::DataError);
  Corpus other;
  other.add(make_doc("a", 22));
  EXPECT_THROW(c.merge(other), prokwo::DataError);
}

TEST(SpeakerFilter, ExcludesTargetChildByDefault) {
  prokwo::SpeakerFilter f;
  EXPECT_FALSE(f.accepts("CHI"));
  EXPECT_TRUE(f.accepts("MOT"));
  f.include_target_child = true;
  EXPECT_TRUE(f.accepts("CHI"));
}

TEST(LoadChatDirectory, DocIdsAreRelativePathsAndWarningsCollected) {
  const auto loaded = prokwo::load_chat_directory(kData / "fixture" / "corpus");
  ASSERT_NE(loaded.corpus.find("family_a/a01"), nullptr);
  EXPECT_EQ(loaded.corpus.find("family_a/a01")->child_age_months, 16);
  EXPECT_EQ(loaded.corpus.find("family_a/a01")->source, "family_a/a01.cha");
  ASSERT_NE(loaded.corpus.find("family_b/b05"), nullptr);
  EXPECT_FALSE(loaded.corpus.find("family_b/b05")->child_age_months);
  EXPECT_EQ(loaded.warnings.size(), 1u);
  const auto skipped = prokwo::skipped_documents(loaded.corpus);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].doc_id, "family_b/b05");
}

TEST(LoadChatDirectory, NotADirectoryIsConfigError) {
  EXPECT_THROW(prokwo::load_chat_directory(kData / "does-not-exist"), prokwo::ConfigError);
}
