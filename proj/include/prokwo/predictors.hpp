#pragma once

// Per-age distributional predictors: log frequency, lexical diversity,
// document diversity, Pro-KWo, and the shuffled-MCDIp Pro-KWo baseline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prokwo/cooccurrence.hpp"
#include "prokwo/corpus.hpp"
#include "prokwo/csv.hpp"
#include "prokwo/error.hpp"
#include "prokwo/lexicon.hpp"
#include "prokwo/parallel.hpp"
#include "prokwo/random.hpp"
#include "prokwo/statistics.hpp"

namespace prokwo {

enum class Predictor { frequency, lexical_diversity, document_diversity, pro_kwo };

inline constexpr std::array<Predictor, 4> kPredictors = {Predictor::frequency, Predictor::lexical_diversity,
                                                         Predictor::document_diversity, Predictor::pro_kwo};

inline std::string_view to_string(Predictor p) {
  switch (p) {
    case Predictor::frequency: return "frequency";
    case Predictor::lexical_diversity: return "lexical_diversity";
    case Predictor::document_diversity: return "document_diversity";
    case Predictor::pro_kwo: return "pro_kwo";
  }
  return "";
}

inline Predictor parse_predictor(std::string_view name) {
  for (auto p : kPredictors) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown predictor '" + std::string(name) + "'");
}

namespace missing {
inline constexpr std::string_view kZeroFrequency = "zero-frequency";
inline constexpr std::string_view kNoCooccurrence = "no-cooccurrence";
inline constexpr std::string_view kEmptySlice = "empty-slice";
}  // namespace missing

// log10 of the raw count; zero counts are missing.
inline std::vector<std::optional<double>> log_frequency(std::span<const std::uint64_t> counts) {
  std::vector<std::optional<double>> out(counts.size());
  for (std::size_t w = 0; w < counts.size(); ++w) {
    if (counts[w] > 0) out[w] = std::log10(static_cast<double>(counts[w]));
  }
  return out;
}

inline std::vector<std::optional<double>> log_frequency(const CorpusSlice& slice, const Lexicon& lexicon,
                                                        const CooccurrenceOptions& options = {}) {
  const auto counts = count_slice(slice, lexicon, options);
  return log_frequency(counts.frequencies());
}

// Share of the V lexicon words that appear at least once in each row.
inline std::vector<double> lexical_diversity(const CooccurrenceMatrix& matrix) {
  std::vector<double> out(matrix.size(), 0.0);
  const double V = static_cast<double>(matrix.size());
  for (std::size_t w = 0; w < matrix.size(); ++w) out[w] = static_cast<double>(matrix.row(w).size()) / V;
  return out;
}

// Documents in the slice containing the word over the number of age-tagged
// documents in the whole corpus; the denominator is the same at every age.
inline std::vector<double> document_diversity(std::span<const std::uint64_t> doc_counts, std::size_t corpus_documents) {
  std::vector<double> out(doc_counts.size(), 0.0);
  if (corpus_documents == 0) return out;
  for (std::size_t w = 0; w < doc_counts.size(); ++w) {
    out[w] = static_cast<double>(doc_counts[w]) / static_cast<double>(corpus_documents);
  }
  return out;
}

inline std::vector<double> document_diversity(const CorpusSlice& slice, const Lexicon& lexicon) {
  const auto counts = count_slice(slice, lexicon);
  return document_diversity(counts.document_counts(), slice.corpus->age_tagged_count());
}

// Co-occurrence-weighted mean MCDIp of each word's context words:
// sum_v c[w][v] * mcdip[v] / sum_v c[w][v]. Missing when the row is empty.
inline std::vector<std::optional<double>> pro_kwo(const CooccurrenceMatrix& matrix, std::span<const double> mcdip_row) {
  if (mcdip_row.size() != matrix.size()) throw ConfigError("pro_kwo: MCDIp row length differs from matrix size");
  std::vector<std::optional<double>> out(matrix.size());
  for (std::size_t w = 0; w < matrix.size(); ++w) {
    double unweighted = 0.0;
    double weighted = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& cell : matrix.row(w)) {
      const double c = static_cast<double>(cell.count);
      const double m = mcdip_row[cell.column];
      unweighted += c;
      weighted += c * m;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    // The ratio can round one ulp outside the values it averages.
    if (unweighted > 0.0) out[w] = std::clamp(weighted / unweighted, lo, hi);
  }
  return out;
}

// The MCDIp row permuted for one shuffle iteration. Iteration k draws from an
// engine seeded with derive_seed(seed, k), so iterations are independent of
// evaluation order and thread count.
inline std::vector<double> shuffled_mcdip(std::span<const double> mcdip_row, std::uint64_t seed, std::size_t iteration) {
  std::vector<double> row(mcdip_row.begin(), mcdip_row.end());
  Engine engine(derive_seed(seed, iteration));
  fisher_yates(std::span<double>(row), engine);
  return row;
}

struct ShuffleResult {
  std::uint64_t seed = kDefaultSeed;
  double mean_r = 0.0;
  std::vector<double> correlations;
};

inline ShuffleResult pro_kwo_shuffle(const CooccurrenceMatrix& matrix, std::span<const double> mcdip_row,
                                     std::span<const double> mcdip_true, std::size_t n_shuffles,
                                     std::uint64_t seed = kDefaultSeed, unsigned threads = 1) {
  if (n_shuffles < 1) throw ConfigError("pro_kwo_shuffle: n_shuffles must be >= 1");
  if (mcdip_true.size() != matrix.size()) throw ConfigError("pro_kwo_shuffle: MCDIp length differs from matrix size");
  ShuffleResult result;
  result.seed = seed;
  result.correlations.assign(n_shuffles, 0.0);
  std::vector<std::optional<double>> truth(mcdip_true.begin(), mcdip_true.end());
  parallel_for(n_shuffles, threads, [&](std::size_t k) {
    const auto permuted = shuffled_mcdip(mcdip_row, seed, k);
    const auto scores = pro_kwo(matrix, permuted);
    result.correlations[k] = pearson(std::span<const std::optional<double>>(scores), truth);
  });
  double sum = 0.0;
  for (double r : result.correlations) sum += r;
  result.mean_r = sum / static_cast<double>(n_shuffles);
  return result;
}

// ---------------------------------------------------------------------------
// Predictor table

struct PredictorRow {
  int age_months = 0;
  std::size_t word_index = 0;
  std::uint64_t raw_frequency = 0;
  std::optional<double> frequency_log10;
  std::optional<double> lexical_diversity;
  std::optional<double> document_diversity;
  std::optional<double> pro_kwo;
  std::vector<std::string> missing_reasons;

  std::optional<double> value(Predictor p) const {
    switch (p) {
      case Predictor::frequency: return frequency_log10;
      case Predictor::lexical_diversity: return lexical_diversity;
      case Predictor::document_diversity: return document_diversity;
      case Predictor::pro_kwo: return pro_kwo;
    }
    return std::nullopt;
  }

  std::string missing_reason() const {
    std::string out;
    for (const auto& r : missing_reasons) {
      if (!out.empty()) out.push_back(';');
      out += r;
    }
    return out;
  }
};

class PredictorTable {
 public:
  PredictorTable() = default;
  PredictorTable(std::vector<int> ages, std::size_t word_count) : ages_(std::move(ages)), word_count_(word_count) {
    rows_.resize(ages_.size() * word_count_);
    for (std::size_t a = 0; a < ages_.size(); ++a) {
      for (std::size_t w = 0; w < word_count_; ++w) {
        rows_[a * word_count_ + w].age_months = ages_[a];
        rows_[a * word_count_ + w].word_index = w;
      }
    }
  }

  const std::vector<int>& ages() const { return ages_; }
  std::size_t word_count() const { return word_count_; }
  const std::vector<PredictorRow>& rows() const { return rows_; }

  bool has_age(int age) const { return std::find(ages_.begin(), ages_.end(), age) != ages_.end(); }

  std::span<const PredictorRow> rows_for_age(int age) const {
    return {rows_.data() + age_offset(age) * word_count_, word_count_};
  }
  std::span<PredictorRow> rows_for_age(int age) { return {rows_.data() + age_offset(age) * word_count_, word_count_}; }

  const PredictorRow& at(int age, std::size_t word) const { return rows_for_age(age)[word]; }
  PredictorRow& at(int age, std::size_t word) { return rows_for_age(age)[word]; }

  std::vector<std::optional<double>> column(int age, Predictor p) const {
    std::vector<std::optional<double>> out;
    out.reserve(word_count_);
    for (const auto& row : rows_for_age(age)) out.push_back(row.value(p));
    return out;
  }

 private:
  std::size_t age_offset(int age) const {
    auto it = std::find(ages_.begin(), ages_.end(), age);
    if (it == ages_.end()) throw DataError("predictor table has no rows for age " + std::to_string(age));
    return static_cast<std::size_t>(it - ages_.begin());
  }

  std::vector<int> ages_;
  std::size_t word_count_ = 0;
  std::vector<PredictorRow> rows_;
};

struct PredictorOptions {
  CooccurrenceOptions cooccurrence;
  SpeakerFilter speakers;
  unsigned threads = 1;
};

struct AgeCounts {
  int age_months = 0;
  std::size_t slice_documents = 0;
  std::vector<std::uint64_t> frequencies;
  std::vector<std::uint64_t> document_counts;
  CooccurrenceMatrix matrix;
};

// Cumulative counts for each requested age. Documents are counted once and
// accumulated in age order, which equals counting each cumulative slice.
inline std::vector<AgeCounts> count_by_age(const Corpus& corpus, const Lexicon& lexicon, std::vector<int> ages,
                                           const PredictorOptions& options = {}) {
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
  if (ages.empty()) return {};
  for (int a : ages) {
    if (a < kMinAgeMonths || a > kMaxAgeMonths) throw ConfigError("age " + std::to_string(a) + " outside [16, 30]");
  }
  // Group documents into increments: bucket k holds ages in (ages[k-1], ages[k]].
  std::vector<CorpusSlice> increments(ages.size());
  const auto& docs = corpus.documents();
  for (auto& inc : increments) {
    inc.corpus = &corpus;
    inc.speaker_filter = options.speakers;
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].child_age_months) continue;
    auto it = std::lower_bound(ages.begin(), ages.end(), *docs[i].child_age_months);
    if (it == ages.end()) continue;
    increments[static_cast<std::size_t>(it - ages.begin())].document_indices.push_back(i);
  }
  std::vector<AgeCounts> out;
  CooccurrenceCounts running(lexicon.size());
  for (std::size_t k = 0; k < ages.size(); ++k) {
    increments[k].age_cutoff_months = ages[k];
    running.merge(count_slice(increments[k], lexicon, options.cooccurrence, options.threads));
    out.push_back({ages[k], running.documents(), running.frequencies(), running.document_counts(), running.matrix(ages[k])});
  }
  return out;
}

inline PredictorTable predictor_table(const Corpus& corpus, const Lexicon& lexicon, const McdipTable& mcdip,
                                      const std::vector<int>& ages, const PredictorOptions& options = {},
                                      std::vector<AgeCounts>* counts_out = nullptr) {
  for (int a : ages) {
    if (!mcdip.available(a)) throw ConfigError("MCDIp unavailable at age " + std::to_string(a));
  }
  auto counts = count_by_age(corpus, lexicon, ages, options);
  std::vector<int> sorted_ages;
  for (const auto& c : counts) sorted_ages.push_back(c.age_months);
  PredictorTable table(sorted_ages, lexicon.size());
  const std::size_t corpus_documents = corpus.age_tagged_count();
  for (const auto& c : counts) {
    auto rows = table.rows_for_age(c.age_months);
    if (c.slice_documents == 0) {
      for (auto& row : rows) row.missing_reasons.emplace_back(missing::kEmptySlice);
      continue;
    }
    const auto freq = log_frequency(c.frequencies);
    const auto ld = lexical_diversity(c.matrix);
    const auto dd = document_diversity(c.document_counts, corpus_documents);
    const auto pk = pro_kwo(c.matrix, mcdip.values(c.age_months));
    for (std::size_t w = 0; w < lexicon.size(); ++w) {
      auto& row = rows[w];
      row.raw_frequency = c.frequencies[w];
      row.frequency_log10 = freq[w];
      row.lexical_diversity = ld[w];
      row.document_diversity = dd[w];
      row.pro_kwo = pk[w];
      if (!freq[w]) row.missing_reasons.emplace_back(missing::kZeroFrequency);
      if (!pk[w]) row.missing_reasons.emplace_back(missing::kNoCooccurrence);
    }
  }
  if (counts_out) *counts_out = std::move(counts);
  return table;
}

inline void write_predictors_csv(std::ostream& out, const PredictorTable& table, const Lexicon& lexicon) {
  csv::Writer w(out);
  w.row("age_months", "word", "grammatical_class", "frequency_log10", "lexical_diversity", "document_diversity",
        "pro_kwo", "missing_reason");
  for (const auto& row : table.rows()) {
    w.row(row.age_months, lexicon.word(row.word_index), to_string(lexicon.grammatical_class(row.word_index)),
          row.frequency_log10, row.lexical_diversity, row.document_diversity, row.pro_kwo, row.missing_reason());
  }
}

inline PredictorTable read_predictors_csv(const std::filesystem::path& path, const Lexicon& lexicon) {
  const auto csv_table = csv::read_file(path);
  const auto age = csv_table.column("age_months");
  const auto word = csv_table.column("word");
  const std::array<std::size_t, 4> cols = {csv_table.column("frequency_log10"), csv_table.column("lexical_diversity"),
                                           csv_table.column("document_diversity"), csv_table.column("pro_kwo")};
  const auto reason = csv_table.column("missing_reason");
  std::vector<int> ages;
  for (std::size_t r = 0; r < csv_table.size(); ++r) {
    const int a = static_cast<int>(csv::parse_integer(csv_table.at(r, age), path.string() + ": age_months"));
    if (std::find(ages.begin(), ages.end(), a) == ages.end()) ages.push_back(a);
  }
  std::sort(ages.begin(), ages.end());
  PredictorTable table(ages, lexicon.size());
  std::map<int, std::vector<bool>> seen;
  for (int a : ages) seen[a].assign(lexicon.size(), false);
  for (std::size_t r = 0; r < csv_table.size(); ++r) {
    const std::string where = path.string() + ": row " + std::to_string(r + 2);
    const int a = static_cast<int>(csv::parse_integer(csv_table.at(r, age), where));
    const auto index = lexicon.index_of(csv_table.at(r, word));
    if (!index) throw DataError(where + ": word '" + csv_table.at(r, word) + "' not in lexicon");
    auto& row = table.at(a, *index);
    row.frequency_log10 = csv::parse_optional_double(csv_table.at(r, cols[0]), where + ": frequency_log10");
    row.lexical_diversity = csv::parse_optional_double(csv_table.at(r, cols[1]), where + ": lexical_diversity");
    row.document_diversity = csv::parse_optional_double(csv_table.at(r, cols[2]), where + ": document_diversity");
    row.pro_kwo = csv::parse_optional_double(csv_table.at(r, cols[3]), where + ": pro_kwo");
    row.raw_frequency = row.frequency_log10 ? static_cast<std::uint64_t>(std::llround(std::pow(10.0, *row.frequency_log10))) : 0;
    const auto& text = csv_table.at(r, reason);
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find(';', start);
      if (end == std::string::npos) end = text.size();
      row.missing_reasons.push_back(text.substr(start, end - start));
      start = end + 1;
    }
    seen[a][*index] = true;
  }
  for (const auto& [a, flags] : seen) {
    if (std::find(flags.begin(), flags.end(), false) != flags.end()) {
      throw DataError(path.string() + ": age " + std::to_string(a) + " does not cover every lexicon word");
    }
  }
  return table;
}

}  // namespace prokwo
