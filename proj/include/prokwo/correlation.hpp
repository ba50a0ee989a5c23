#pragma once

// Correlation reports over the predictor table: predictor intercorrelations
// and predictor-MCDIp correlations, overall or per grammatical class.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "prokwo/csv.hpp"
#include "prokwo/lexicon.hpp"
#include "prokwo/predictors.hpp"
#include "prokwo/statistics.hpp"

namespace prokwo {

enum class Grouping { all, by_class };

inline constexpr double kSignificanceLevel = 0.01;

struct CorrelationReport {
  std::string grouping;  // "all" or a grammatical class label
  int age_months = 0;
  std::string var_a;
  std::string var_b;
  std::optional<double> r;  // absent when the cell is unavailable
  std::size_t n = 0;
  std::optional<double> p;
  bool significant_01 = false;
  std::string note;  // reason a cell is unavailable
};

namespace detail {

inline CorrelationReport correlate_cell(std::string grouping, int age, std::string a, std::string b,
                                        const std::vector<std::optional<double>>& x,
                                        const std::vector<std::optional<double>>& y) {
  CorrelationReport rep;
  rep.grouping = std::move(grouping);
  rep.age_months = age;
  rep.var_a = std::move(a);
  rep.var_b = std::move(b);
  const auto pairs = complete_pairs(x, y);
  rep.n = pairs.x.size();
  try {
    rep.r = pearson(std::span<const double>(pairs.x), std::span<const double>(pairs.y));
    const auto pv = pearson_pvalue(*rep.r, rep.n);
    rep.p = pv.p;
    rep.significant_01 = pv.p < kSignificanceLevel;
    if (pv.degenerate) rep.note = "degenerate";
  } catch (const InsufficientDataError&) {
    rep.note = "insufficient-data";
  } catch (const UndefinedCorrelationError&) {
    rep.note = "zero-variance";
  }
  return rep;
}

inline std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(const Lexicon& lexicon, Grouping grouping) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  if (grouping == Grouping::all) {
    std::vector<std::size_t> all(lexicon.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    out.emplace_back("all", std::move(all));
    return out;
  }
  for (auto c : kGrammaticalClasses) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
      if (lexicon.grammatical_class(i) == c) members.push_back(i);
    }
    if (!members.empty()) out.emplace_back(std::string(to_string(c)), std::move(members));
  }
  return out;
}

template <typename T>
std::vector<T> select(const std::vector<T>& values, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace detail

// All 6 unordered predictor pairs per age per group.
inline std::vector<CorrelationReport> correlate_predictors(const PredictorTable& table, const Lexicon& lexicon,
                                                           const std::vector<int>& ages, Grouping grouping) {
  std::vector<CorrelationReport> out;
  for (const auto& [name, members] : detail::groups(lexicon, grouping)) {
    for (int age : ages) {
      for (std::size_t i = 0; i < kPredictors.size(); ++i) {
        for (std::size_t j = i + 1; j < kPredictors.size(); ++j) {
          const auto x = detail::select(table.column(age, kPredictors[i]), members);
          const auto y = detail::select(table.column(age, kPredictors[j]), members);
          out.push_back(detail::correlate_cell(name, age, std::string(to_string(kPredictors[i])),
                                               std::string(to_string(kPredictors[j])), x, y));
        }
      }
    }
  }
  return out;
}

// Each predictor against MCDIp at the matching age.
inline std::vector<CorrelationReport> correlate_with_outcome(const PredictorTable& table, const McdipTable& mcdip,
                                                             const Lexicon& lexicon, const std::vector<int>& ages,
                                                             Grouping grouping) {
  std::vector<CorrelationReport> out;
  for (const auto& [name, members] : detail::groups(lexicon, grouping)) {
    for (int age : ages) {
      const auto& values = mcdip.values(age);
      std::vector<std::optional<double>> outcome(values.begin(), values.end());
      const auto y = detail::select(outcome, members);
      for (auto p : kPredictors) {
        const auto x = detail::select(table.column(age, p), members);
        out.push_back(detail::correlate_cell(name, age, std::string(to_string(p)), "mcdip", x, y));
      }
    }
  }
  return out;
}

inline void write_correlations_csv(std::ostream& out, const std::vector<CorrelationReport>& reports) {
  csv::Writer w(out);
  w.row("grouping", "age_months", "var_a", "var_b", "r", "n", "p", "significant_01");
  for (const auto& rep : reports) {
    w.row(rep.grouping, rep.age_months, rep.var_a, rep.var_b, rep.r, rep.n, rep.p, rep.significant_01);
  }
}

}  // namespace prokwo
