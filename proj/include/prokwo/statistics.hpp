#pragma once

// Product-moment correlation, its t-based p-value, and z-scoring.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "prokwo/error.hpp"

namespace prokwo {

namespace detail {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace detail

// Two-pass Pearson r. Requires n >= 3 and non-constant series.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson: series lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw InsufficientDataError("pearson: need at least 3 complete pairs, have " + std::to_string(n));
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("pearson: zero variance in a series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

struct PairwiseComplete {
  std::vector<double> x;
  std::vector<double> y;
};

inline PairwiseComplete complete_pairs(std::span<const std::optional<double>> x, std::span<const std::optional<double>> y) {
  if (x.size() != y.size()) throw ConfigError("pairwise-complete: series lengths differ");
  PairwiseComplete out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i]) {
      out.x.push_back(*x[i]);
      out.y.push_back(*y[i]);
    }
  }
  return out;
}

// Pearson r over pairs where both members are present.
inline double pearson(std::span<const std::optional<double>> x, std::span<const std::optional<double>> y) {
  const auto pairs = complete_pairs(x, y);
  return pearson(std::span<const double>(pairs.x), std::span<const double>(pairs.y));
}

struct CorrelationPValue {
  double p = 1.0;
  bool degenerate = false;  // |r| == 1; p set to 0 by convention
};

// Two-tailed p for H0: rho = 0 via t = r sqrt((n-2)/(1-r^2)) on n-2 df.
// The tail is I_{df/(df+t^2)}(df/2, 1/2), the regularized incomplete beta.
inline CorrelationPValue pearson_pvalue(double r, std::size_t n) {
  if (n < 3) throw InsufficientDataError("pearson_pvalue: n must be >= 3");
  if (!(std::abs(r) <= 1.0)) throw ConfigError("pearson_pvalue: |r| > 1");
  if (std::abs(r) == 1.0) return {0.0, true};
  const double df = static_cast<double>(n - 2);
  const double r2 = r * r;
  // df / (df + t^2) simplifies to 1 - r^2.
  const double x = 1.0 - r2;
  return {boost::math::ibeta(df / 2.0, 0.5, x), false};
}

// Two-tailed standard-normal tail probability.
inline double normal_two_tailed_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Centered and scaled to unit sample (n-1) standard deviation.
inline std::vector<double> standardize(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw InsufficientDataError("standardize: need at least 2 values");
  const double m = detail::mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw UndefinedCorrelationError("standardize: constant input");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - m) / sd;
  return out;
}

}  // namespace prokwo
