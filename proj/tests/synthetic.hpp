#pragma once

// Simulated binary-outcome designs with known coefficients for the
// regression and mixed-model checks.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prokwo/regression.hpp"

namespace testing_support {

struct SimulationSpec {
  std::size_t children = 1;
  std::size_t words = 1;
  std::vector<double> beta;  // intercept first
  double sd_child = 0.0;
  double sd_word = 0.0;
};

// One row per (child, word). The predictor columns vary by word only, like
// the corpus predictors, and are drawn standard normal.
inline prokwo::DesignMatrix simulate_design(std::mt19937_64& rng, const SimulationSpec& s) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(s.beta.size());
  Eigen::MatrixXd word_x(static_cast<Eigen::Index>(s.words), p);
  std::vector<double> word_effect(s.words), child_effect(s.children);
  for (std::size_t w = 0; w < s.words; ++w) {
    word_x(static_cast<Eigen::Index>(w), 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) word_x(static_cast<Eigen::Index>(w), j) = normal(rng);
    word_effect[w] = s.sd_word * normal(rng);
  }
  for (auto& c : child_effect) c = s.sd_child * normal(rng);

  prokwo::DesignMatrix d;
  d.age_months = 24;
  d.column_names.emplace_back("(Intercept)");
  for (Eigen::Index j = 1; j < p; ++j) d.column_names.push_back("x" + std::to_string(j));
  const auto n = static_cast<Eigen::Index>(s.children * s.words);
  d.X.resize(n, p);
  d.y.resize(n);
  for (std::size_t c = 0; c < s.children; ++c) d.child_ids.push_back("c" + std::to_string(c));
  for (std::size_t w = 0; w < s.words; ++w) d.word_lexicon_index.push_back(w);
  Eigen::Index i = 0;
  for (std::size_t c = 0; c < s.children; ++c) {
    for (std::size_t w = 0; w < s.words; ++w, ++i) {
      d.X.row(i) = word_x.row(static_cast<Eigen::Index>(w));
      double eta = child_effect[c] + word_effect[w];
      for (Eigen::Index j = 0; j < p; ++j) eta += s.beta[static_cast<std::size_t>(j)] * d.X(i, j);
      d.y(i) = unit(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
      d.child.push_back(static_cast<int>(c));
      d.word.push_back(static_cast<int>(w));
    }
  }
  return d;
}

// Independent rows (each its own child and word), covariates standard normal.
inline prokwo::DesignMatrix simulate_logistic(std::mt19937_64& rng, std::size_t n, const std::vector<double>& beta) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(beta.size());
  prokwo::DesignMatrix d;
  d.column_names.emplace_back("(Intercept)");
  for (Eigen::Index j = 1; j < p; ++j) d.column_names.push_back("x" + std::to_string(j));
  d.X.resize(static_cast<Eigen::Index>(n), p);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    d.X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) d.X(i, j) = normal(rng);
    double eta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) eta += beta[static_cast<std::size_t>(j)] * d.X(i, j);
    d.y(i) = unit(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    d.child.push_back(static_cast<int>(r));
    d.word.push_back(static_cast<int>(r));
    d.child_ids.push_back("c" + std::to_string(r));
    d.word_lexicon_index.push_back(r);
  }
  return d;
}

// Ten groups of five with a per-row covariate: the single-factor case used for
// the quadrature comparison. Group effects enter through the child factor.
inline prokwo::DesignMatrix ten_by_five(std::uint64_t seed, double intercept, double slope, double sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  prokwo::DesignMatrix d;
  d.column_names = {"(Intercept)", "x1"};
  d.X.resize(50, 2);
  d.y.resize(50);
  for (int g = 0; g < 10; ++g) d.child_ids.push_back("g" + std::to_string(g));
  d.word_lexicon_index = {0};
  for (int g = 0; g < 10; ++g) {
    const double b = sd * normal(rng);
    for (int j = 0; j < 5; ++j) {
      const int i = g * 5 + j;
      d.X(i, 0) = 1.0;
      d.X(i, 1) = normal(rng);
      const double eta = intercept + slope * d.X(i, 1) + b;
      d.y(i) = unit(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
      d.child.push_back(g);
      d.word.push_back(0);
    }
  }
  return d;
}

}  // namespace testing_support
