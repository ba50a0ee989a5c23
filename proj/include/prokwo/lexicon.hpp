#pragma once

// MCDI word list, survey administrations, per-age production proportions
// (MCDIp) and per-child binary production records.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prokwo/corpus.hpp"
#include "prokwo/csv.hpp"
#include "prokwo/error.hpp"

namespace prokwo {

enum class GrammaticalClass { noun, verb, adjective, function_word, other };

inline constexpr std::array<GrammaticalClass, 5> kGrammaticalClasses = {
    GrammaticalClass::noun, GrammaticalClass::verb, GrammaticalClass::adjective, GrammaticalClass::function_word,
    GrammaticalClass::other};

inline std::string_view to_string(GrammaticalClass c) {
  switch (c) {
    case GrammaticalClass::noun: return "noun";
    case GrammaticalClass::verb: return "verb";
    case GrammaticalClass::adjective: return "adjective";
    case GrammaticalClass::function_word: return "function_word";
    case GrammaticalClass::other: return "other";
  }
  return "other";
}

inline GrammaticalClass parse_grammatical_class(std::string_view label) {
  for (auto c : kGrammaticalClasses) {
    if (to_string(c) == label) return c;
  }
  throw DataError("unknown grammatical_class '" + std::string(label) + "'");
}

struct LexiconEntry {
  std::string word;
  std::string mcdi_category;
  GrammaticalClass grammatical_class = GrammaticalClass::other;
  bool excluded = false;
};

struct LexiconRow {
  std::string word;
  std::string mcdi_category;
  std::string grammatical_class;
  bool excluded = false;
};

// Ordered word list. Non-excluded entries carry dense indices 0..V-1 in file
// order; those indices address matrix rows/columns everywhere downstream.
class Lexicon {
 public:
  Lexicon() = default;

  std::size_t size() const { return active_.size(); }
  const LexiconEntry& entry(std::size_t index) const { return entries_[active_[index]]; }
  const std::string& word(std::size_t index) const { return entry(index).word; }
  GrammaticalClass grammatical_class(std::size_t index) const { return entry(index).grammatical_class; }
  const std::vector<LexiconEntry>& all_entries() const { return entries_; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_excluded_word(std::string_view word) const { return excluded_words_.count(std::string(word)) != 0; }

 private:
  friend Lexicon load_lexicon(const std::vector<LexiconRow>&, const std::set<std::string>&);

  std::vector<LexiconEntry> entries_;
  std::vector<std::size_t> active_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::string> excluded_words_;
};

inline Lexicon load_lexicon(const std::vector<LexiconRow>& rows, const std::set<std::string>& exclusions = {}) {
  Lexicon lex;
  for (const auto& row : rows) {
    LexiconEntry e;
    e.word = detail::to_lower(detail::trim(row.word));
    if (e.word.empty()) throw DataError("lexicon row with empty word");
    e.mcdi_category = row.mcdi_category;
    e.grammatical_class = parse_grammatical_class(detail::trim(row.grammatical_class));
    e.excluded = row.excluded || exclusions.count(e.word) != 0 || exclusions.count(row.word) != 0;
    const std::size_t pos = lex.entries_.size();
    if (e.excluded) {
      lex.excluded_words_.insert(e.word);
    } else {
      if (!lex.index_.emplace(e.word, lex.active_.size()).second) {
        throw DataError("duplicate lexicon word '" + e.word + "'");
      }
      lex.active_.push_back(pos);
    }
    lex.entries_.push_back(std::move(e));
  }
  return lex;
}

inline std::set<std::string> read_word_list(const std::filesystem::path& path) {
  std::set<std::string> words;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto w = detail::trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(detail::to_lower(w));
  }
  return words;
}

// lexicon.csv: word, mcdi_category, grammatical_class, excluded (0/1; optional column).
inline Lexicon read_lexicon_csv(const std::filesystem::path& path, const std::set<std::string>& exclusions = {}) {
  const auto table = csv::read_file(path);
  const auto word = table.column("word");
  const auto category = table.column("mcdi_category");
  const auto klass = table.column("grammatical_class");
  const bool has_excluded = table.has_column("excluded");
  const auto excluded = has_excluded ? table.column("excluded") : 0;
  std::vector<LexiconRow> rows;
  rows.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    LexiconRow row{table.at(r, word), table.at(r, category), table.at(r, klass), false};
    if (has_excluded) {
      const auto& flag = table.at(r, excluded);
      if (flag != "0" && flag != "1") {
        throw DataError(path.string() + ": row " + std::to_string(r + 2) + ": excluded must be 0 or 1");
      }
      row.excluded = flag == "1";
    }
    rows.push_back(std::move(row));
  }
  try {
    return load_lexicon(rows, exclusions);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Survey data

struct Administration {
  std::string child_id;
  int age_months = 0;
  std::vector<std::size_t> produced;  // sorted lexicon indices
};

// administrations.csv in long format: child_id, age_months, word, produced.
// Rows for excluded words are ignored; words absent from the lexicon are errors.
inline std::vector<Administration> read_administrations_csv(const std::filesystem::path& path, const Lexicon& lexicon) {
  const auto table = csv::read_file(path);
  const auto child = table.column("child_id");
  const auto age = table.column("age_months");
  const auto word = table.column("word");
  const auto produced = table.column("produced");

  std::map<std::pair<std::string, int>, std::set<std::size_t>> grouped;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string where = path.string() + ": row " + std::to_string(r + 2);
    const long months = csv::parse_integer(table.at(r, age), where + ": age_months");
    if (months < kMinAgeMonths || months > kMaxAgeMonths) {
      throw DataError(where + ": age_months " + std::to_string(months) + " outside [16, 30]");
    }
    const auto& flag = table.at(r, produced);
    if (flag != "0" && flag != "1") throw DataError(where + ": produced must be 0 or 1");
    auto& set = grouped[{table.at(r, child), static_cast<int>(months)}];
    const auto w = detail::to_lower(detail::trim(table.at(r, word)));
    const auto index = lexicon.index_of(w);
    if (!index) {
      if (lexicon.is_excluded_word(w)) continue;
      throw DataError(where + ": word '" + w + "' not in lexicon");
    }
    if (flag == "1") set.insert(*index);
  }
  std::vector<Administration> out;
  out.reserve(grouped.size());
  for (auto& [key, set] : grouped) {
    out.push_back({key.first, key.second, std::vector<std::size_t>(set.begin(), set.end())});
  }
  return out;
}

struct McdipRow {
  std::size_t n_administrations = 0;
  std::vector<std::size_t> produced_counts;
  std::vector<double> values;
};

class McdipTable {
 public:
  bool available(int age) const { return rows_.count(age) != 0; }

  const McdipRow& row(int age) const {
    auto it = rows_.find(age);
    if (it == rows_.end()) throw DataError("MCDIp unavailable at age " + std::to_string(age) + " (no administrations)");
    return it->second;
  }

  const std::vector<double>& values(int age) const { return row(age).values; }
  std::vector<int> ages() const {
    std::vector<int> out;
    for (const auto& [age, _] : rows_) out.push_back(age);
    return out;
  }
  std::size_t word_count() const { return word_count_; }

  void set(int age, McdipRow row) { rows_[age] = std::move(row); }
  void set_word_count(std::size_t v) { word_count_ = v; }

 private:
  std::map<int, McdipRow> rows_;
  std::size_t word_count_ = 0;
};

// Ages without administrations are left unavailable rather than zero.
inline McdipTable compute_mcdip(const std::vector<Administration>& administrations, const Lexicon& lexicon) {
  const std::size_t V = lexicon.size();
  std::map<int, McdipRow> rows;
  for (const auto& a : administrations) {
    if (a.age_months < kMinAgeMonths || a.age_months > kMaxAgeMonths) {
      throw DataError("administration for '" + a.child_id + "' at age " + std::to_string(a.age_months) +
                      " outside [16, 30]");
    }
    auto& row = rows[a.age_months];
    if (row.produced_counts.empty()) row.produced_counts.assign(V, 0);
    ++row.n_administrations;
    for (auto w : a.produced) {
      if (w >= V) throw DataError("administration for '" + a.child_id + "' references invalid word index");
      ++row.produced_counts[w];
    }
  }
  McdipTable table;
  table.set_word_count(V);
  for (auto& [age, row] : rows) {
    row.values.resize(V);
    for (std::size_t w = 0; w < V; ++w) {
      row.values[w] = static_cast<double>(row.produced_counts[w]) / static_cast<double>(row.n_administrations);
    }
    table.set(age, std::move(row));
  }
  return table;
}

inline McdipTable read_mcdip_csv(const std::filesystem::path& path, const Lexicon& lexicon) {
  const auto table = csv::read_file(path);
  const auto age = table.column("age_months");
  const auto word = table.column("word");
  const auto value = table.column("mcdip");
  const auto n = table.column("n_administrations");
  std::map<int, McdipRow> rows;
  std::map<int, std::vector<bool>> seen;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string where = path.string() + ": row " + std::to_string(r + 2);
    const int a = static_cast<int>(csv::parse_integer(table.at(r, age), where + ": age_months"));
    const auto index = lexicon.index_of(table.at(r, word));
    if (!index) throw DataError(where + ": word '" + table.at(r, word) + "' not in lexicon");
    auto& row = rows[a];
    if (row.values.empty()) {
      row.values.assign(lexicon.size(), 0.0);
      row.produced_counts.assign(lexicon.size(), 0);
      row.n_administrations = static_cast<std::size_t>(csv::parse_integer(table.at(r, n), where + ": n_administrations"));
      seen[a].assign(lexicon.size(), false);
    }
    const auto v = csv::parse_optional_double(table.at(r, value), where + ": mcdip");
    if (!v || *v < 0.0 || *v > 1.0) throw DataError(where + ": mcdip must be in [0, 1]");
    row.values[*index] = *v;
    row.produced_counts[*index] = static_cast<std::size_t>(std::llround(*v * static_cast<double>(row.n_administrations)));
    seen[a][*index] = true;
  }
  McdipTable out;
  out.set_word_count(lexicon.size());
  for (auto& [a, row] : rows) {
    if (std::find(seen[a].begin(), seen[a].end(), false) != seen[a].end()) {
      throw DataError(path.string() + ": age " + std::to_string(a) + " does not cover every lexicon word");
    }
    out.set(a, std::move(row));
  }
  return out;
}

inline void write_mcdip_csv(std::ostream& out, const McdipTable& table, const Lexicon& lexicon) {
  csv::Writer w(out);
  w.row("age_months", "word", "mcdip", "n_administrations");
  for (int age : table.ages()) {
    const auto& row = table.row(age);
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
      w.row(age, lexicon.word(i), row.values[i], row.n_administrations);
    }
  }
}

struct ProductionRecord {
  std::string child_id;
  int age_months = 0;
  std::size_t word_index = 0;
  int produced = 0;
};

// One record per (administration, lexicon word).
inline std::vector<ProductionRecord> production_records(const std::vector<Administration>& administrations,
                                                        const Lexicon& lexicon) {
  std::vector<ProductionRecord> records;
  records.reserve(administrations.size() * lexicon.size());
  for (const auto& a : administrations) {
    std::vector<char> flags(lexicon.size(), 0);
    for (auto w : a.produced) {
      if (w >= lexicon.size()) throw DataError("administration for '" + a.child_id + "' references invalid word index");
      flags[w] = 1;
    }
    for (std::size_t w = 0; w < lexicon.size(); ++w) records.push_back({a.child_id, a.age_months, w, flags[w]});
  }
  return records;
}

}  // namespace prokwo
