#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "prokwo/predictors.hpp"
#include "random_corpus.hpp"

namespace {

using Entries = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

// Words 0 = why, 1 = where; 2..5 are the context words of the worked example.
prokwo::CooccurrenceMatrix worked_example() {
  const std::size_t V = 6;
  Entries e;
  const std::uint64_t why[] = {10, 10, 100, 100};
  const std::uint64_t where[] = {100, 100, 10, 10};
  for (std::size_t k = 0; k < 4; ++k) {
    e.push_back({0 * V + 2 + k, why[k]});
    e.push_back({1 * V + 2 + k, where[k]});
  }
  return prokwo::CooccurrenceMatrix::from_entries(V, 24, e);
}

const std::vector<double> kWorkedMcdip = {0.5, 0.5, 0.7, 0.6, 0.2, 0.3};

prokwo::Lexicon lexicon_of(std::initializer_list<const char*> words) {
  std::vector<prokwo::LexiconRow> rows;
  for (const char* w : words) rows.push_back({w, "c", "noun", false});
  return prokwo::load_lexicon(rows);
}

}  // namespace

TEST(ProKwo, WorkedExampleRatios) {
  const auto pk = prokwo::pro_kwo(worked_example(), kWorkedMcdip);
  ASSERT_TRUE(pk[0] && pk[1]);
  EXPECT_NEAR(*pk[0], 63.0 / 220.0, 1e-15);
  EXPECT_NEAR(*pk[1], 135.0 / 220.0, 1e-15);
  EXPECT_NEAR(*pk[0], 0.29, 0.005);
  EXPECT_NEAR(*pk[1], 0.61, 0.005);
  EXPECT_FALSE(pk[2]);
}

TEST(ProKwo, ConstantOutcomeGivesConstantScore) {
  const auto m = worked_example();
  for (double v : {0.0, 1.0}) {
    const auto pk = prokwo::pro_kwo(m, std::vector<double>(6, v));
    EXPECT_EQ(*pk[0], v);
    EXPECT_EQ(*pk[1], v);
  }
}

// For this value c * m / c rounds away from m when c is 3, 6 or 11; the score
// must still equal m.
TEST(ProKwo, SingleContextWordReturnsItsValueExactly) {
  const double m = 0.99775377526979647;
  for (std::uint64_t c : {1ull, 3ull, 6ull, 7ull, 11ull, 123456789ull}) {
    const auto row = prokwo::pro_kwo(prokwo::CooccurrenceMatrix::from_entries(2, 20, {{1, c}}), std::vector<double>{0.1, m});
    EXPECT_EQ(*row[0], m) << "count " << c;
  }
}

TEST(ProKwo, LengthMismatchRejected) {
  EXPECT_THROW(prokwo::pro_kwo(worked_example(), std::vector<double>(5, 0.1)), prokwo::ConfigError);
}

TEST(ProKwo, ConvexBoundsAndScaleInvarianceOnRandomRows) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t V = 2 + rng() % 60;
    std::vector<double> mcdip(V);
    for (auto& v : mcdip) v = unit(rng);
    Entries e, scaled;
    const std::uint64_t k = 1 + rng() % 1000;
    double lo = 1.0, hi = 0.0;
    for (std::size_t c = 0; c < V; ++c) {
      if (rng() % 3 == 0) continue;
      const std::uint64_t count = 1 + rng() % 500;
      e.push_back({c, count});
      scaled.push_back({c, count * k});
      lo = std::min(lo, mcdip[c]);
      hi = std::max(hi, mcdip[c]);
    }
    const auto pk = prokwo::pro_kwo(prokwo::CooccurrenceMatrix::from_entries(V, 20, e), mcdip);
    const auto pk_scaled = prokwo::pro_kwo(prokwo::CooccurrenceMatrix::from_entries(V, 20, scaled), mcdip);
    if (e.empty()) {
      ASSERT_FALSE(pk[0]);
      continue;
    }
    ASSERT_TRUE(pk[0]);
    ASSERT_GE(*pk[0], lo);
    ASSERT_LE(*pk[0], hi);
    ASSERT_NEAR(*pk[0], *pk_scaled[0], 1e-12);
  }
}

TEST(LogFrequency, PowersOfTenAndZero) {
  const std::vector<std::uint64_t> counts = {100, 1, 0, 1000};
  const auto f = prokwo::log_frequency(std::span<const std::uint64_t>(counts));
  EXPECT_DOUBLE_EQ(*f[0], 2.0);
  EXPECT_DOUBLE_EQ(*f[1], 0.0);
  EXPECT_FALSE(f[2]);
  EXPECT_DOUBLE_EQ(*f[3], 3.0);
}

TEST(LexicalDiversity, DistinctContextsOverV) {
  const std::size_t V = 10;
  const auto m = prokwo::CooccurrenceMatrix::from_entries(V, 20, {{0 * V + 1, 5}, {0 * V + 4, 1}, {0 * V + 0, 2}, {1 * V + 3, 9}});
  const auto ld = prokwo::lexical_diversity(m);
  EXPECT_DOUBLE_EQ(ld[0], 0.3);
  EXPECT_DOUBLE_EQ(ld[1], 0.1);
  EXPECT_DOUBLE_EQ(ld[2], 0.0);
}

TEST(LexicalDiversity, FullRowIsOne) {
  const std::size_t V = 4;
  Entries e;
  for (std::size_t c = 0; c < V; ++c) e.push_back({c, 1});
  EXPECT_DOUBLE_EQ(prokwo::lexical_diversity(prokwo::CooccurrenceMatrix::from_entries(V, 20, e))[0], 1.0);
}

TEST(DocumentDiversity, EveryDocumentAtMaxCutoff) {
  const auto lex = lexicon_of({"ball", "cup"});
  prokwo::Corpus corpus;
  for (int i = 0; i < 10; ++i) {
    prokwo::Document d;
    d.doc_id = "d" + std::to_string(i);
    d.child_age_months = 16 + i;
    d.utterances.push_back({"MOT", {"ball", i % 2 ? "cup" : "the"}});
    corpus.add(d);
  }
  const auto dd = prokwo::document_diversity(prokwo::cumulative_slice(corpus, 30), lex);
  EXPECT_DOUBLE_EQ(dd[0], 1.0);
  EXPECT_DOUBLE_EQ(dd[1], 0.5);
  // Earlier cutoffs keep the whole-corpus denominator.
  const auto early = prokwo::document_diversity(prokwo::cumulative_slice(corpus, 17), lex);
  EXPECT_DOUBLE_EQ(early[0], 0.2);
}

TEST(Shuffle, PermutationPreservesMultiset) {
  std::vector<double> row(50);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<double>(i % 7) / 7.0;
  auto sorted = row;
  std::sort(sorted.begin(), sorted.end());
  bool any_moved = false;
  for (std::size_t k = 0; k < 200; ++k) {
    auto p = prokwo::shuffled_mcdip(row, 99, k);
    any_moved = any_moved || p != row;
    std::sort(p.begin(), p.end());
    ASSERT_EQ(p, sorted);
  }
  EXPECT_TRUE(any_moved);
}

TEST(Shuffle, UniformOverPositions) {
  // Each value should land in each slot about equally often.
  const std::size_t n = 5, reps = 50000;
  std::vector<double> row = {0, 1, 2, 3, 4};
  std::vector<std::vector<int>> hits(n, std::vector<int>(n, 0));
  for (std::size_t k = 0; k < reps; ++k) {
    const auto p = prokwo::shuffled_mcdip(row, 7, k);
    for (std::size_t i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(p[i])][i];
  }
  const double expected = static_cast<double>(reps) / n;
  for (const auto& r : hits) {
    for (int h : r) EXPECT_NEAR(h, expected, 5 * std::sqrt(expected));
  }
}

TEST(Shuffle, DeterministicAndThreadIndependent) {
  std::mt19937_64 rng(12);
  testing_support::RandomCorpusLimits limits;
  limits.max_docs = 40;
  limits.max_vocab = 40;
  testing_support::RandomCorpus rc;
  do {
    rc = testing_support::random_corpus(rng, limits);
  } while (rc.vocab.size() < 15);
  const auto m = prokwo::build_cooccurrence(prokwo::cumulative_slice(rc.corpus, 30), rc.lexicon);
  std::vector<double> mcdip(rc.vocab.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : mcdip) v = unit(rng);
  try {
    const auto a = prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 50, 31, 1);
    const auto b = prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 50, 31, 1);
    const auto c = prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 50, 31, 4);
    EXPECT_EQ(a.correlations, b.correlations);
    EXPECT_EQ(a.correlations, c.correlations);
    EXPECT_EQ(a.mean_r, c.mean_r);
    const auto other = prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 50, 32, 1);
    EXPECT_NE(a.correlations, other.correlations);
  } catch (const prokwo::UndefinedCorrelationError&) {
    GTEST_SKIP() << "random corpus produced a constant score vector";
  }
}

TEST(Shuffle, TooFewWordsIsAnError) {
  const auto m = prokwo::CooccurrenceMatrix::from_entries(3, 20, {{0 * 3 + 1, 1}});
  const std::vector<double> mcdip = {0.1, 0.2, 0.3};
  EXPECT_THROW(prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 3), prokwo::InsufficientDataError);
  EXPECT_THROW(prokwo::pro_kwo_shuffle(m, mcdip, mcdip, 0), prokwo::ConfigError);
}

// One document, two words, one age: every value can be done by hand.
TEST(PredictorTable, HandComputedSingleDocument) {
  const auto lex = lexicon_of({"dog", "ball"});
  prokwo::Corpus corpus;
  prokwo::Document d;
  d.doc_id = "only";
  d.child_age_months = 18;
  d.utterances.push_back({"MOT", {"dog", "the", "ball"}});
  d.utterances.push_back({"MOT", {"dog"}});
  d.utterances.push_back({"CHI", {"ball", "dog"}});
  corpus.add(d);
  const auto mcdip = prokwo::compute_mcdip({{"k", 20, {0}}, {"j", 20, {}}}, lex);  // dog 0.5, ball 0
  const auto table = prokwo::predictor_table(corpus, lex, mcdip, {20});
  ASSERT_EQ(table.rows().size(), 2u);
  const auto& dog = table.at(20, 0);
  const auto& ball = table.at(20, 1);
  EXPECT_EQ(dog.raw_frequency, 2u);
  EXPECT_DOUBLE_EQ(*dog.frequency_log10, std::log10(2.0));
  EXPECT_DOUBLE_EQ(*ball.frequency_log10, 0.0);
  EXPECT_DOUBLE_EQ(*dog.lexical_diversity, 0.5);
  EXPECT_DOUBLE_EQ(*ball.lexical_diversity, 0.0);
  EXPECT_DOUBLE_EQ(*dog.document_diversity, 1.0);
  EXPECT_DOUBLE_EQ(*ball.document_diversity, 1.0);
  EXPECT_DOUBLE_EQ(*dog.pro_kwo, 0.0);  // only context is ball, MCDIp 0
  EXPECT_FALSE(ball.pro_kwo);
  EXPECT_EQ(ball.missing_reason(), "no-cooccurrence");
  EXPECT_EQ(dog.missing_reason(), "");
}

TEST(PredictorTable, EmptySliceLeavesCorpusPredictorsMissing) {
  const auto lex = lexicon_of({"dog", "ball"});
  prokwo::Corpus corpus;
  prokwo::Document d;
  d.doc_id = "late";
  d.child_age_months = 28;
  d.utterances.push_back({"MOT", {"dog", "ball"}});
  corpus.add(d);
  const auto mcdip = prokwo::compute_mcdip({{"k", 18, {0}}, {"k", 30, {0, 1}}}, lex);
  const auto table = prokwo::predictor_table(corpus, lex, mcdip, {18, 30});
  for (const auto& row : table.rows_for_age(18)) {
    EXPECT_FALSE(row.frequency_log10 || row.lexical_diversity || row.document_diversity || row.pro_kwo);
    EXPECT_EQ(row.missing_reason(), "empty-slice");
  }
  EXPECT_TRUE(table.at(30, 0).pro_kwo);
}

TEST(PredictorTable, MissingMcdipAgeRejected) {
  const auto lex = lexicon_of({"dog"});
  const auto mcdip = prokwo::compute_mcdip({{"k", 18, {0}}}, lex);
  EXPECT_THROW(prokwo::predictor_table(prokwo::Corpus{}, lex, mcdip, {21}), prokwo::ConfigError);
}

TEST(PredictorTable, RandomCorporaRespectRangesAndCumulativeGrowth) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<int> ages = {16, 18, 20, 22, 24, 26, 28, 30};
  for (int trial = 0; trial < 40; ++trial) {
    const auto rc = testing_support::random_corpus(rng);
    std::vector<prokwo::Administration> admins;
    for (int age : ages) {
      for (int child = 0; child < 3; ++child) {
        prokwo::Administration a{"c" + std::to_string(child), age, {}};
        for (std::size_t w = 0; w < rc.vocab.size(); ++w) {
          if (unit(rng) < 0.4) a.produced.push_back(w);
        }
        admins.push_back(a);
      }
    }
    const auto mcdip = prokwo::compute_mcdip(admins, rc.lexicon);
    const auto table = prokwo::predictor_table(rc.corpus, rc.lexicon, mcdip, ages);
    for (std::size_t w = 0; w < rc.vocab.size(); ++w) {
      std::uint64_t previous = 0;
      for (int age : ages) {
        const auto& row = table.at(age, w);
        ASSERT_GE(row.raw_frequency, previous);
        previous = row.raw_frequency;
        for (auto v : {row.lexical_diversity, row.document_diversity, row.pro_kwo}) {
          if (!v) continue;
          ASSERT_GE(*v, 0.0);
          ASSERT_LE(*v, 1.0);
        }
      }
    }
  }
}

TEST(PredictorTable, CsvRoundTrip) {
  std::mt19937_64 rng(6);
  testing_support::RandomCorpus rc;
  do {
    rc = testing_support::random_corpus(rng);
  } while (rc.vocab.size() < 5);
  std::vector<prokwo::Administration> admins;
  for (int age : {18, 24}) admins.push_back({"k", age, {0, 2}});
  const auto mcdip = prokwo::compute_mcdip(admins, rc.lexicon);
  const auto table = prokwo::predictor_table(rc.corpus, rc.lexicon, mcdip, {18, 24});
  std::ostringstream out;
  prokwo::write_predictors_csv(out, table, rc.lexicon);
  const auto path = std::filesystem::temp_directory_path() / "prokwo_predictors_roundtrip.csv";
  std::ofstream(path, std::ios::binary) << out.str();
  const auto back = prokwo::read_predictors_csv(path, rc.lexicon);
  ASSERT_EQ(back.ages(), table.ages());
  for (std::size_t i = 0; i < table.rows().size(); ++i) {
    const auto& a = table.rows()[i];
    const auto& b = back.rows()[i];
    for (auto p : prokwo::kPredictors) {
      ASSERT_EQ(a.value(p).has_value(), b.value(p).has_value());
      if (a.value(p)) {
        ASSERT_EQ(*a.value(p), *b.value(p));
      }
    }
    ASSERT_EQ(a.missing_reasons, b.missing_reasons);
  }
  std::ostringstream again;
  prokwo::write_predictors_csv(again, back, rc.lexicon);
  EXPECT_EQ(again.str(), out.str());
}

TEST(PredictorNames, ParseRoundTripAndUnknown) {
  for (auto p : prokwo::kPredictors) EXPECT_EQ(prokwo::parse_predictor(prokwo::to_string(p)), p);
  EXPECT_THROW(prokwo::parse_predictor("imageability"), prokwo::ConfigError);
}
