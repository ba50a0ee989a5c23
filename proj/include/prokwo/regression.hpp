#pragma once

// Logistic regression of binary word production on standardized predictors:
// design construction, IRLS for the fixed-effects model, Wald inference and
// per-word prediction error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prokwo/error.hpp"
#include "prokwo/lexicon.hpp"
#include "prokwo/predictors.hpp"
#include "prokwo/statistics.hpp"

namespace prokwo {

inline constexpr double kWaldZ975 = 1.959963984540054;
inline constexpr double kSeparationBound = 30.0;

struct ModelSpec {
  int age_months = 0;
  std::vector<Predictor> predictors;
  bool child_intercept = true;
  bool word_intercept = true;

  std::string model_id() const {
    if (predictors.size() == 1) return "single:" + std::string(to_string(predictors.front()));
    if (predictors.size() == kPredictors.size()) return "full";
    std::string id;
    for (auto p : predictors) {
      if (!id.empty()) id += '+';
      id += to_string(p);
    }
    return id;
  }
};

// Parses "single:<predictor>" or "full".
inline std::vector<Predictor> parse_model_selector(std::string_view selector) {
  if (selector == "full") return {kPredictors.begin(), kPredictors.end()};
  constexpr std::string_view prefix = "single:";
  if (selector.substr(0, prefix.size()) == prefix) return {parse_predictor(selector.substr(prefix.size()))};
  throw ConfigError("model selector must be 'single:<predictor>' or 'full', got '" + std::string(selector) + "'");
}

struct DesignMatrix {
  int age_months = 0;
  std::vector<std::string> column_names;  // "(Intercept)" then predictor names
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> child;  // dense child group index per row
  std::vector<int> word;   // dense word group index per row
  std::vector<std::string> child_ids;
  std::vector<std::size_t> word_lexicon_index;
  std::vector<double> centers;
  std::vector<double> scales;
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  std::size_t n_children() const { return child_ids.size(); }
  std::size_t n_words() const { return word_lexicon_index.size(); }
};

// Rows at spec.age_months with every requested predictor present; predictors
// standardized over the retained rows (sample sd).
inline DesignMatrix build_design(const std::vector<ProductionRecord>& records, const PredictorTable& table,
                                 const ModelSpec& spec) {
  if (spec.predictors.empty()) throw ConfigError("model needs at least one predictor");
  DesignMatrix d;
  d.age_months = spec.age_months;
  d.column_names.emplace_back("(Intercept)");
  for (auto p : spec.predictors) d.column_names.emplace_back(to_string(p));

  const auto rows = table.rows_for_age(spec.age_months);
  std::vector<const ProductionRecord*> kept;
  std::map<std::string, int> child_index;
  std::map<std::size_t, int> word_index;
  for (const auto& rec : records) {
    if (rec.age_months != spec.age_months) continue;
    if (rec.word_index >= rows.size()) throw DataError("production record references a word outside the predictor table");
    const auto& row = rows[rec.word_index];
    const bool complete = std::all_of(spec.predictors.begin(), spec.predictors.end(),
                                      [&](Predictor p) { return row.value(p).has_value(); });
    if (!complete) {
      ++d.dropped_rows;
      continue;
    }
    kept.push_back(&rec);
    child_index.emplace(rec.child_id, 0);
    word_index.emplace(rec.word_index, 0);
  }
  if (kept.empty()) {
    throw DataError("no complete observations at age " + std::to_string(spec.age_months) + " for model " + spec.model_id());
  }
  for (auto& [id, idx] : child_index) {
    idx = static_cast<int>(d.child_ids.size());
    d.child_ids.push_back(id);
  }
  for (auto& [w, idx] : word_index) {
    idx = static_cast<int>(d.word_lexicon_index.size());
    d.word_lexicon_index.push_back(w);
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto p = static_cast<Eigen::Index>(spec.predictors.size());
  d.X.resize(n, p + 1);
  d.y.resize(n);
  d.child.resize(kept.size());
  d.word.resize(kept.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = *kept[static_cast<std::size_t>(i)];
    d.X(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      d.X(i, j + 1) = *rows[rec.word_index].value(spec.predictors[static_cast<std::size_t>(j)]);
    }
    d.y(i) = rec.produced;
    d.child[static_cast<std::size_t>(i)] = child_index.at(rec.child_id);
    d.word[static_cast<std::size_t>(i)] = word_index.at(rec.word_index);
  }
  for (Eigen::Index j = 1; j <= p; ++j) {
    std::vector<double> column(d.X.col(j).data(), d.X.col(j).data() + n);
    const double mean = detail::mean(column);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(sd > 0.0)) {
      throw DataError("predictor '" + d.column_names[static_cast<std::size_t>(j)] + "' is constant at age " +
                      std::to_string(spec.age_months));
    }
    d.X.col(j) = (d.X.col(j).array() - mean) / sd;
    d.centers.push_back(mean);
    d.scales.push_back(sd);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Logistic building blocks

// Linear predictor clamped to +-30 so probabilities stay strictly inside (0, 1).
inline double inverse_logit(double eta) {
  eta = std::clamp(eta, -kSeparationBound, kSeparationBound);
  return 1.0 / (1.0 + std::exp(-eta));
}

inline double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Bernoulli log-likelihood of y given the linear predictor.
inline double bernoulli_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ll += y(i) * eta(i) - log1p_exp(eta(i));
  return ll;
}

inline double logistic_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  return bernoulli_log_likelihood(y, X * beta);
}

inline Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd resid(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) resid(i) = y(i) - inverse_logit(eta(i));
  return X.transpose() * resid;
}

// ---------------------------------------------------------------------------
// Results

struct TermEstimate {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

enum class FitStatus { converged, not_converged };

inline std::string_view to_string(FitStatus s) { return s == FitStatus::converged ? "converged" : "not_converged"; }

struct Convergence {
  FitStatus status = FitStatus::not_converged;
  std::size_t iterations = 0;  // IRLS steps, or outer objective evaluations for mixed fits
  std::size_t inner_iterations = 0;
  double gradient_norm = 0.0;
  bool boundary = false;  // some variance component estimated at zero
};

struct FitResult {
  std::vector<TermEstimate> terms;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  bool has_child_effects = false;
  bool has_word_effects = false;
  double var_child = 0.0;
  double var_word = 0.0;
  Eigen::VectorXd child_effects;  // conditional modes, linear-predictor scale
  Eigen::VectorXd word_effects;
  double log_likelihood = 0.0;
  Convergence convergence;

  bool converged() const { return convergence.status == FitStatus::converged; }
};

// z = estimate / SE, two-tailed normal p, estimate +- 1.959964 SE.
inline TermEstimate wald_inference(std::string term, double estimate, double std_error) {
  TermEstimate t{std::move(term), estimate, std_error};
  t.z = estimate / std_error;
  t.p = normal_two_tailed_p(t.z);
  t.ci_low = estimate - kWaldZ975 * std_error;
  t.ci_high = estimate + kWaldZ975 * std_error;
  return t;
}

inline void wald_inference(FitResult& fit, const std::vector<std::string>& names) {
  fit.terms.clear();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    const double se = std::sqrt(fit.covariance(j, j));
    fit.terms.push_back(wald_inference(names[static_cast<std::size_t>(j)], fit.beta(j), se));
  }
}

// ---------------------------------------------------------------------------
// IRLS

struct IrlsOptions {
  std::size_t max_iterations = 100;
  double deviance_tolerance = 1e-10;  // relative change
  double gradient_tolerance = 1e-8;   // infinity norm
};

// Maximum-likelihood logistic regression ignoring the grouping structure.
inline FitResult fit_logistic_irls(const DesignMatrix& design, const IrlsOptions& opt = {}) {
  const auto& X = design.X;
  const auto& y = design.y;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  FitResult fit;
  fit.beta = Eigen::VectorXd::Zero(p);

  auto deviance = [&](const Eigen::VectorXd& b) { return -2.0 * logistic_log_likelihood(X, y, b); };
  double dev = deviance(fit.beta);
  Eigen::VectorXd mu(n), w(n);
  Eigen::MatrixXd info(p, p);
  Eigen::VectorXd grad(p);
  double previous_dev = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0;; ++it) {
    const Eigen::VectorXd eta = X * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = inverse_logit(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
      if (!std::isfinite(w(i))) throw NumericalError("IRLS: non-finite working weight");
    }
    grad = X.transpose() * (y - mu);
    info = X.transpose() * w.asDiagonal() * X;
    fit.convergence.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    fit.convergence.iterations = it;
    const double rel_change = std::abs(previous_dev - dev) / (std::abs(dev) + 0.1);
    if (rel_change < opt.deviance_tolerance && fit.convergence.gradient_norm < opt.gradient_tolerance) {
      fit.convergence.status = FitStatus::converged;
      break;
    }
    if (it >= opt.max_iterations) break;

    Eigen::LDLT<Eigen::MatrixXd> solver(info);
    if (solver.info() != Eigen::Success) throw NumericalError("IRLS: singular information matrix");
    const Eigen::VectorXd step = solver.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd candidate = fit.beta + step;
    double candidate_dev = deviance(candidate);
    // Step-halving keeps the deviance non-increasing.
    for (int halvings = 0; candidate_dev > dev * (1.0 + 1e-14) && halvings < 40; ++halvings) {
      scale /= 2.0;
      candidate = fit.beta + scale * step;
      candidate_dev = deviance(candidate);
    }
    if (!std::isfinite(candidate_dev)) throw NumericalError("IRLS: non-finite deviance");
    previous_dev = dev;
    dev = std::min(candidate_dev, dev);
    if (candidate_dev <= previous_dev * (1.0 + 1e-14)) fit.beta = candidate;
    if (fit.beta.lpNorm<Eigen::Infinity>() > kSeparationBound) {
      throw SeparationError("IRLS: coefficient exceeded " + std::to_string(kSeparationBound) +
                            " (complete or quasi-complete separation)");
    }
  }
  // With separated data the likelihood keeps rising until the clamped linear
  // predictor saturates, which can happen before any coefficient is large.
  if ((X * fit.beta).lpNorm<Eigen::Infinity>() >= kSeparationBound) {
    throw SeparationError("IRLS: fitted probabilities numerically 0 or 1 (complete or quasi-complete separation)");
  }
  Eigen::LDLT<Eigen::MatrixXd> solver(info);
  fit.covariance = solver.solve(Eigen::MatrixXd::Identity(p, p));
  fit.log_likelihood = -dev / 2.0;
  wald_inference(fit, design.column_names);
  return fit;
}

// ---------------------------------------------------------------------------
// Per-word prediction error

struct ItemError {
  std::size_t word_index = 0;
  GrammaticalClass grammatical_class = GrammaticalClass::other;
  int age_months = 0;
  double mean_error = 0.0;  // mean(predicted - observed); positive = over-prediction
  double mcdip = 0.0;
  std::size_t rows = 0;
};

struct ItemErrorReport {
  std::vector<ItemError> items;
  std::optional<double> r;  // pearson(mean_error, mcdip)
  std::optional<double> p;
  std::size_t n = 0;
};

inline Eigen::VectorXd linear_predictor(const FitResult& fit, const DesignMatrix& design, bool include_modes = true) {
  Eigen::VectorXd eta = design.X * fit.beta;
  if (include_modes) {
    for (std::size_t i = 0; i < design.rows(); ++i) {
      if (fit.has_child_effects) eta(static_cast<Eigen::Index>(i)) += fit.child_effects(design.child[i]);
      if (fit.has_word_effects) eta(static_cast<Eigen::Index>(i)) += fit.word_effects(design.word[i]);
    }
  }
  return eta;
}

inline ItemErrorReport item_prediction_error(const FitResult& fit, const DesignMatrix& design,
                                             std::span<const double> mcdip_row, const Lexicon& lexicon,
                                             bool include_modes = true) {
  const Eigen::VectorXd eta = linear_predictor(fit, design, include_modes);
  std::vector<double> sum(design.n_words(), 0.0);
  std::vector<std::size_t> count(design.n_words(), 0);
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const auto k = static_cast<std::size_t>(design.word[i]);
    sum[k] += inverse_logit(eta(static_cast<Eigen::Index>(i))) - design.y(static_cast<Eigen::Index>(i));
    ++count[k];
  }
  ItemErrorReport report;
  std::vector<double> errors, outcome;
  for (std::size_t k = 0; k < design.n_words(); ++k) {
    if (count[k] == 0) continue;
    const auto w = design.word_lexicon_index[k];
    ItemError e{w, lexicon.grammatical_class(w), design.age_months, sum[k] / static_cast<double>(count[k]),
                mcdip_row[w], count[k]};
    errors.push_back(e.mean_error);
    outcome.push_back(e.mcdip);
    report.items.push_back(e);
  }
  report.n = errors.size();
  try {
    report.r = pearson(std::span<const double>(errors), std::span<const double>(outcome));
    report.p = pearson_pvalue(*report.r, report.n).p;
  } catch (const DataError&) {
    // fewer than 3 words or a constant series: correlation left absent
  }
  return report;
}

}  // namespace prokwo
