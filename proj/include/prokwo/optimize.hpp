#pragma once

// Box-constrained Nelder-Mead. Trial points are projected onto the box, which
// is sufficient for the low-dimensional, smooth objectives used here.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "prokwo/error.hpp"

namespace prokwo {

struct NelderMeadOptions {
  double initial_step = 0.25;  // relative to max(1, |x0_i|) unless `steps` is given
  std::vector<double> steps;   // optional per-coordinate absolute initial steps
  double f_tolerance = 1e-8;  // relative spread of simplex values
  double x_tolerance = 1e-6;  // absolute spread of simplex vertices
  std::size_t max_evaluations = 500;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

inline NelderMeadResult minimize_nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x0, const std::vector<double>& lower,
                                             const std::vector<double>& upper, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw ConfigError("nelder-mead: empty parameter vector");
  if (lower.size() != n || upper.size() != n) throw ConfigError("nelder-mead: bound length mismatch");

  NelderMeadResult result;
  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : HUGE_VAL;
  };

  project(x0);
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    double step = opt.steps.size() == n ? opt.steps[i] : opt.initial_step * std::max(1.0, std::abs(x0[i]));
    if (x0[i] + step > upper[i]) step = -step;
    simplex[i + 1][i] += step;
    project(simplex[i + 1]);
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    double x_spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) x_spread = std::max(x_spread, std::abs(simplex[i][k] - simplex[best][k]));
    }
    const double f_spread = values[worst] - values[best];
    if (f_spread <= opt.f_tolerance * (std::abs(values[best]) + opt.f_tolerance) && x_spread <= opt.x_tolerance) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= opt.max_evaluations) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      project(x);
      return x;
    };

    auto reflected = along(-1.0);
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      auto expanded = along(-2.0);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = std::move(expanded);
        values[worst] = f_expanded;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = std::move(reflected);
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    auto contracted = along(outside ? -0.5 : 0.5);
    const double f_contracted = eval(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = std::move(contracted);
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  return result;
}

}  // namespace prokwo
