#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "prokwo/cooccurrence.hpp"
#include "prokwo/predictors.hpp"
#include "random_corpus.hpp"

namespace {

prokwo::Lexicon lexicon_of(std::initializer_list<const char*> words) {
  std::vector<prokwo::LexiconRow> rows;
  for (const char* w : words) rows.push_back({w, "c", "noun", false});
  return prokwo::load_lexicon(rows);
}

prokwo::Corpus one_doc(std::vector<std::vector<std::string>> utterances, int age = 20, std::string speaker = "MOT") {
  prokwo::Document d;
  d.doc_id = "doc";
  d.child_age_months = age;
  for (auto& u : utterances) d.utterances.push_back({speaker, std::move(u)});
  prokwo::Corpus c;
  c.add(std::move(d));
  return c;
}

void expect_matches_oracle(const testing_support::RandomCorpus& rc, int cutoff, const prokwo::CooccurrenceOptions& opt,
                           bool include_child, unsigned threads) {
  prokwo::SpeakerFilter filter;
  filter.include_target_child = include_child;
  const auto slice = prokwo::cumulative_slice(rc.corpus, cutoff, filter);
  const auto m = prokwo::build_cooccurrence(slice, rc.lexicon, opt, threads);
  const auto expected = oracle::cooccurrence(rc.plain, rc.vocab, cutoff, opt.window, include_child, opt.include_diagonal,
                                             opt.fillers == prokwo::WindowFillers::mcdi_only);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < rc.vocab.size(); ++i) {
    for (std::size_t j = 0; j < rc.vocab.size(); ++j) {
      ASSERT_EQ(m.count(i, j), expected[i][j]) << "cell " << i << "," << j << " window " << opt.window;
      total += expected[i][j];
    }
  }
  ASSERT_EQ(m.total(), total);
}

}  // namespace

TEST(Cooccurrence, ForwardOnly) {
  const auto lex = lexicon_of({"dog", "ran"});
  const auto corpus = one_doc({{"the", "dog", "ran"}});
  const auto m = prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex);
  EXPECT_EQ(m.count(0, 1), 1u);
  EXPECT_EQ(m.count(1, 0), 0u);
  EXPECT_EQ(m.total(), 1u);
}

TEST(Cooccurrence, WindowsDoNotCrossUtterances) {
  const auto lex = lexicon_of({"dog", "ran"});
  const auto corpus = one_doc({{"dog"}, {"ran"}});
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex).total(), 0u);
}

TEST(Cooccurrence, WindowLengthCountsAllTokenPositions) {
  const auto lex = lexicon_of({"a", "b"});
  const auto corpus = one_doc({{"a", "x", "x", "b"}});
  prokwo::CooccurrenceOptions opt;
  opt.window = 2;
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex, opt).count(0, 1), 0u);
  opt.window = 3;
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex, opt).count(0, 1), 1u);
  opt.window = 2;
  opt.fillers = prokwo::WindowFillers::mcdi_only;
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex, opt).count(0, 1), 1u);
}

TEST(Cooccurrence, DiagonalIncludedByDefaultAndSwitchable) {
  const auto lex = lexicon_of({"no"});
  const auto corpus = one_doc({{"no", "no", "no"}});
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex).count(0, 0), 3u);
  prokwo::CooccurrenceOptions opt;
  opt.include_diagonal = false;
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex, opt).total(), 0u);
}

TEST(Cooccurrence, TargetChildSpeechExcludedByDefault) {
  const auto lex = lexicon_of({"dog", "ran"});
  const auto corpus = one_doc({{"dog", "ran"}}, 20, "CHI");
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex).total(), 0u);
  prokwo::SpeakerFilter all;
  all.include_target_child = true;
  EXPECT_EQ(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30, all), lex).total(), 1u);
}

TEST(Cooccurrence, ZeroWindowRejected) {
  const auto lex = lexicon_of({"dog"});
  const auto corpus = one_doc({{"dog"}});
  prokwo::CooccurrenceOptions opt;
  opt.window = 0;
  EXPECT_THROW(prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 30), lex, opt), prokwo::ConfigError);
}

TEST(Cooccurrence, MatchesBruteForceOracleOnRandomCorpora) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    const int cutoff = 16 + static_cast<int>(rng() % 15);
    for (std::size_t window : {1u, 3u, 7u}) {
      prokwo::CooccurrenceOptions opt;
      opt.window = window;
      opt.include_diagonal = trial % 5 != 0;
      opt.fillers = trial % 3 == 0 ? prokwo::WindowFillers::mcdi_only : prokwo::WindowFillers::all_tokens;
      expect_matches_oracle(rc, cutoff, opt, trial % 4 == 0, 1 + static_cast<unsigned>(trial % 3));
    }
  }
}

TEST(Cooccurrence, ThreadCountDoesNotChangeCounts) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    const auto slice = prokwo::cumulative_slice(rc.corpus, 30);
    const auto one = prokwo::count_slice(slice, rc.lexicon, {}, 1);
    for (unsigned threads : {2u, 3u, 8u}) {
      const auto many = prokwo::count_slice(slice, rc.lexicon, {}, threads);
      ASSERT_EQ(one.matrix(30), many.matrix(30));
      ASSERT_EQ(one.frequencies(), many.frequencies());
      ASSERT_EQ(one.document_counts(), many.document_counts());
    }
  }
}

TEST(Cooccurrence, CountsMonotoneAcrossCutoffs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    prokwo::CooccurrenceMatrix previous;
    for (int age = 16; age <= 30; ++age) {
      const auto m = prokwo::build_cooccurrence(prokwo::cumulative_slice(rc.corpus, age), rc.lexicon);
      if (age > 16) {
        for (std::size_t i = 0; i < m.size(); ++i) {
          for (std::size_t j = 0; j < m.size(); ++j) ASSERT_LE(previous.count(i, j), m.count(i, j));
        }
      }
      previous = m;
    }
  }
}

TEST(Cooccurrence, IncrementalCountsEqualPerSliceCounts) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    const std::vector<int> ages = {16, 18, 21, 24, 27, 30};
    const auto counts = prokwo::count_by_age(rc.corpus, rc.lexicon, ages);
    ASSERT_EQ(counts.size(), ages.size());
    for (const auto& c : counts) {
      const auto direct = prokwo::count_slice(prokwo::cumulative_slice(rc.corpus, c.age_months), rc.lexicon);
      ASSERT_EQ(c.matrix, direct.matrix(c.age_months));
      ASSERT_EQ(c.frequencies, direct.frequencies());
      ASSERT_EQ(c.document_counts, direct.document_counts());
      ASSERT_EQ(c.slice_documents, direct.documents());
    }
  }
}

TEST(Cooccurrence, DocumentCountsMatchMembershipScan) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    const int cutoff = 16 + static_cast<int>(rng() % 15);
    const auto counts = prokwo::count_slice(prokwo::cumulative_slice(rc.corpus, cutoff), rc.lexicon);
    ASSERT_EQ(counts.document_counts(), oracle::documents_containing(rc.plain, rc.vocab, cutoff, false));
  }
}

TEST(Cooccurrence, CsvDump) {
  const auto lex = lexicon_of({"dog", "ran"});
  const auto corpus = one_doc({{"dog", "ran", "dog"}});
  std::ostringstream out;
  prokwo::write_cooccurrence_csv(out, {prokwo::build_cooccurrence(prokwo::cumulative_slice(corpus, 20), lex)}, lex);
  EXPECT_EQ(out.str(), "age_months,target_word,context_word,count\n20,dog,dog,1\n20,dog,ran,1\n20,ran,dog,1\n");
}
