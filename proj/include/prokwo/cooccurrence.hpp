#pragma once

// Forward-window co-occurrence counting between lexicon words.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prokwo/corpus.hpp"
#include "prokwo/csv.hpp"
#include "prokwo/error.hpp"
#include "prokwo/lexicon.hpp"
#include "prokwo/parallel.hpp"

namespace prokwo {

enum class WindowFillers {
  all_tokens,  // every token occupies a window slot
  mcdi_only,   // non-lexicon tokens are removed before windowing
};

struct CooccurrenceOptions {
  std::size_t window = 7;
  bool include_diagonal = true;
  WindowFillers fillers = WindowFillers::all_tokens;
};

// Sparse V x V counts; row = target word, column = word following it within
// the window. Rows are sorted by column.
class CooccurrenceMatrix {
 public:
  struct Cell {
    std::uint32_t column;
    std::uint64_t count;

    friend bool operator==(const Cell&, const Cell&) = default;
  };

  CooccurrenceMatrix() = default;
  CooccurrenceMatrix(std::size_t word_count, int age_cutoff_months)
      : age_cutoff_months_(age_cutoff_months), rows_(word_count) {}

  std::size_t size() const { return rows_.size(); }
  int age_cutoff_months() const { return age_cutoff_months_; }

  std::span<const Cell> row(std::size_t target) const { return rows_[target]; }

  std::uint64_t count(std::size_t target, std::size_t context) const {
    const auto& r = rows_[target];
    auto it = std::lower_bound(r.begin(), r.end(), context,
                               [](const Cell& c, std::size_t col) { return c.column < col; });
    return it != r.end() && it->column == context ? it->count : 0;
  }

  std::uint64_t row_total(std::size_t target) const {
    std::uint64_t total = 0;
    for (const auto& c : rows_[target]) total += c.count;
    return total;
  }

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) t += row_total(i);
    return t;
  }

  // Builds from unsorted (target * V + context, count) pairs.
  static CooccurrenceMatrix from_entries(std::size_t word_count, int age,
                                         std::vector<std::pair<std::uint64_t, std::uint64_t>> entries) {
    std::sort(entries.begin(), entries.end());
    CooccurrenceMatrix m(word_count, age);
    for (const auto& [key, count] : entries) {
      if (count == 0) continue;
      m.rows_[key / word_count].push_back({static_cast<std::uint32_t>(key % word_count), count});
    }
    return m;
  }

  friend bool operator==(const CooccurrenceMatrix& a, const CooccurrenceMatrix& b) { return a.rows_ == b.rows_; }

 private:
  int age_cutoff_months_ = 0;
  std::vector<std::vector<Cell>> rows_;
};

// Mutable counts for one slice or one document; merges by integer addition.
class CooccurrenceCounts {
 public:
  explicit CooccurrenceCounts(std::size_t word_count = 0)
      : word_count_(word_count), frequencies_(word_count, 0), doc_counts_(word_count, 0) {}

  std::size_t word_count() const { return word_count_; }
  const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }
  const std::vector<std::uint64_t>& document_counts() const { return doc_counts_; }
  std::size_t documents() const { return documents_; }

  void add_document(const Document& doc, const Lexicon& lexicon, const SpeakerFilter& speakers,
                    const CooccurrenceOptions& options) {
    std::vector<char> present(word_count_, 0);
    std::vector<std::int64_t> indices;
    for (const auto& utt : doc.utterances) {
      if (!speakers.accepts(utt.speaker)) continue;
      indices.clear();
      for (const auto& tok : utt.tokens) {
        const auto idx = lexicon.index_of(tok);
        if (idx) {
          indices.push_back(static_cast<std::int64_t>(*idx));
          ++frequencies_[*idx];
          present[*idx] = 1;
        } else if (options.fillers == WindowFillers::all_tokens) {
          indices.push_back(-1);
        }
      }
      count_window(indices, options);
    }
    for (std::size_t w = 0; w < word_count_; ++w) doc_counts_[w] += present[w];
    ++documents_;
  }

  void merge(const CooccurrenceCounts& other) {
    for (const auto& [key, count] : other.pairs_) pairs_[key] += count;
    for (std::size_t w = 0; w < word_count_; ++w) {
      frequencies_[w] += other.frequencies_[w];
      doc_counts_[w] += other.doc_counts_[w];
    }
    documents_ += other.documents_;
  }

  CooccurrenceMatrix matrix(int age_cutoff_months) const {
    return CooccurrenceMatrix::from_entries(word_count_, age_cutoff_months, {pairs_.begin(), pairs_.end()});
  }

 private:
  void count_window(const std::vector<std::int64_t>& indices, const CooccurrenceOptions& options) {
    const std::size_t n = indices.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (indices[i] < 0) continue;
      const auto target = static_cast<std::uint64_t>(indices[i]);
      const std::size_t last = std::min(n - 1, i + options.window);
      for (std::size_t j = i + 1; j <= last; ++j) {
        if (indices[j] < 0) continue;
        const auto context = static_cast<std::uint64_t>(indices[j]);
        if (!options.include_diagonal && context == target) continue;
        ++pairs_[target * word_count_ + context];
      }
    }
  }

  std::size_t word_count_;
  std::unordered_map<std::uint64_t, std::uint64_t> pairs_;
  std::vector<std::uint64_t> frequencies_;
  std::vector<std::uint64_t> doc_counts_;
  std::size_t documents_ = 0;
};

// Counts every speaker-filtered document of the slice. Documents are split into
// contiguous blocks per thread and merged by integer addition, so the result
// does not depend on the thread count.
inline CooccurrenceCounts count_slice(const CorpusSlice& slice, const Lexicon& lexicon,
                                      const CooccurrenceOptions& options = {}, unsigned threads = 1) {
  if (options.window < 1) throw ConfigError("window must be >= 1");
  const std::size_t blocks = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, slice.size()))));
  std::vector<CooccurrenceCounts> partial(blocks, CooccurrenceCounts(lexicon.size()));
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t begin = slice.size() * b / blocks;
    const std::size_t end = slice.size() * (b + 1) / blocks;
    for (std::size_t i = begin; i < end; ++i) {
      partial[b].add_document(slice.document(i), lexicon, slice.speaker_filter, options);
    }
  });
  CooccurrenceCounts total(lexicon.size());
  for (const auto& p : partial) total.merge(p);
  return total;
}

inline CooccurrenceMatrix build_cooccurrence(const CorpusSlice& slice, const Lexicon& lexicon,
                                             const CooccurrenceOptions& options = {}, unsigned threads = 1) {
  return count_slice(slice, lexicon, options, threads).matrix(slice.age_cutoff_months);
}

// Debug dump: age_months, target_word, context_word, count.
inline void write_cooccurrence_csv(std::ostream& out, const std::vector<CooccurrenceMatrix>& matrices,
                                   const Lexicon& lexicon) {
  csv::Writer w(out);
  w.row("age_months", "target_word", "context_word", "count");
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (const auto& cell : m.row(i)) {
        w.row(m.age_cutoff_months(), lexicon.word(i), lexicon.word(cell.column), cell.count);
      }
    }
  }
}

}  // namespace prokwo
