#pragma once

// Logistic GLMM with crossed random intercepts (child, word), fit by
// maximizing the Laplace approximation to the marginal likelihood.
//
// Parameterization: eta = X beta + sum_f theta_f * u_f[level], u ~ N(0, I),
// so theta_f is the standard deviation of factor f. For a given theta the
// conditional mode comes from penalized IRLS on
//     phi(u, beta) = sum_i log p(y_i | eta_i) - |u|^2 / 2
// and the Laplace deviance is -2 phi(u_hat, beta) + log det(A), with
// A = Lambda' Z' W Z Lambda + I evaluated at the mode.
//
// Fitting runs in two stages. Stage one optimizes theta with beta solved
// jointly with u inside penalized IRLS. Stage two starts from that solution
// and optimizes (theta, beta) together on the Laplace deviance with u
// profiled out, which removes the bias of treating beta as part of the mode.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "prokwo/error.hpp"
#include "prokwo/optimize.hpp"
#include "prokwo/regression.hpp"

namespace prokwo {

struct GlmmOptions {
  std::size_t max_inner_iterations = 200;
  std::size_t max_outer_evaluations = 500;  // variance-parameter search
  // The joint (theta, beta) refinement searches k + p dimensions, so its
  // budget grows with the parameter count.
  std::size_t refine_evaluations_per_parameter = 200;
  double inner_deviance_tolerance = 1e-10;
  double inner_gradient_tolerance = 1e-8;
  double outer_tolerance = 1e-8;
  double theta_upper = 50.0;
  double boundary_threshold = 1e-4;
  bool refine_fixed_effects = true;
  // When set, theta is held at these values (one per active factor, child
  // first) and only the conditional mode is computed.
  std::optional<std::vector<double>> fixed_theta;
};

struct RandomFactor {
  std::string name;
  std::vector<int> levels;  // level per design row
  std::size_t n_levels = 0;
};

namespace detail {

// Lower triangle of the penalized information matrix over
// [u_factor0, u_factor1, ..., beta] with a fixed sparsity pattern, factored
// without reordering so the leading block's LDLT factor is that of A.
class PenalizedSystem {
 public:
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  PenalizedSystem(const std::vector<RandomFactor>& factors, const Eigen::MatrixXd& X, bool with_fixed)
      : factors_(factors), X_(X), with_fixed_(with_fixed) {
    offsets_.push_back(0);
    for (const auto& f : factors_) offsets_.push_back(offsets_.back() + static_cast<int>(f.n_levels));
    q_ = offsets_.back();
    p_ = with_fixed_ ? static_cast<int>(X_.cols()) : 0;
    const int dim = q_ + p_;
    const auto n = static_cast<std::size_t>(X_.rows());

    std::vector<Eigen::Triplet<double>> pattern;
    for (int v = 0; v < dim; ++v) pattern.emplace_back(v, v, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        const int cf = offsets_[f] + factors_[f].levels[i];
        for (std::size_t g = f + 1; g < factors_.size(); ++g) pattern.emplace_back(offsets_[g] + factors_[g].levels[i], cf, 1.0);
      }
    }
    for (int j = 0; j < p_; ++j) {
      for (int v = 0; v < q_; ++v) pattern.emplace_back(q_ + j, v, 1.0);
      for (int k = 0; k <= j; ++k) pattern.emplace_back(q_ + j, q_ + k, 1.0);
    }
    H_.resize(dim, dim);
    H_.setFromTriplets(pattern.begin(), pattern.end());
    H_.makeCompressed();

    diag_pos_.resize(static_cast<std::size_t>(dim));
    for (int v = 0; v < dim; ++v) diag_pos_[static_cast<std::size_t>(v)] = position(v, v);
    const std::size_t pairs = factors_.size() * (factors_.size() - 1) / 2;
    cross_pos_.resize(n * pairs);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = 0;
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        for (std::size_t g = f + 1; g < factors_.size(); ++g, ++k) {
          cross_pos_[i * pairs + k] = position(offsets_[g] + factors_[g].levels[i], offsets_[f] + factors_[f].levels[i]);
        }
      }
    }
    fixed_pos_.resize(static_cast<std::size_t>(q_ * p_));
    for (int v = 0; v < q_; ++v) {
      for (int j = 0; j < p_; ++j) fixed_pos_[static_cast<std::size_t>(v * p_ + j)] = position(q_ + j, v);
    }
    solver_.analyzePattern(H_);
  }

  int q() const { return q_; }
  int p() const { return p_; }
  int offset(std::size_t factor) const { return offsets_[factor]; }

  void assemble(const std::vector<double>& theta, const Eigen::VectorXd& w) {
    double* val = H_.valuePtr();
    std::fill(val, val + H_.nonZeros(), 0.0);
    for (int v = 0; v < q_; ++v) val[diag_pos_[static_cast<std::size_t>(v)]] = 1.0;
    const auto n = static_cast<std::size_t>(X_.rows());
    const std::size_t pairs = factors_.size() * (factors_.size() - 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w(static_cast<Eigen::Index>(i));
      std::size_t k = 0;
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        const int vf = offsets_[f] + factors_[f].levels[i];
        val[diag_pos_[static_cast<std::size_t>(vf)]] += theta[f] * theta[f] * wi;
        for (std::size_t g = f + 1; g < factors_.size(); ++g, ++k) val[cross_pos_[i * pairs + k]] += theta[f] * theta[g] * wi;
        for (int j = 0; j < p_; ++j) {
          val[fixed_pos_[static_cast<std::size_t>(vf * p_ + j)]] += theta[f] * wi * X_(static_cast<Eigen::Index>(i), j);
        }
      }
    }
    if (p_ > 0) {
      const Eigen::MatrixXd xtwx = X_.transpose() * w.asDiagonal() * X_;
      for (int j = 0; j < p_; ++j) {
        for (int k = 0; k <= j; ++k) H_.coeffRef(q_ + j, q_ + k) = xtwx(j, k);
      }
    }
  }

  void factorize() {
    solver_.factorize(H_);
    if (solver_.info() != Eigen::Success) throw NumericalError("GLMM: penalized system factorization failed");
    const auto& d = solver_.vectorD();
    for (Eigen::Index v = 0; v < d.size(); ++v) {
      if (!(d(v) > 0.0)) throw NumericalError("GLMM: penalized system is not positive definite");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return solver_.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return solver_.solve(rhs); }

  // log det of the random-effects block A.
  double log_det_random() const {
    const auto& d = solver_.vectorD();
    double s = 0.0;
    for (int v = 0; v < q_; ++v) s += std::log(d(v));
    return s;
  }

 private:
  int position(int row, int col) const {
    const int* inner = H_.innerIndexPtr();
    const int* begin = inner + H_.outerIndexPtr()[col];
    const int* end = inner + H_.outerIndexPtr()[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    if (it == end || *it != row) throw NumericalError("GLMM: sparsity pattern lookup failed");
    return static_cast<int>(it - inner);
  }

  const std::vector<RandomFactor>& factors_;
  const Eigen::MatrixXd& X_;
  bool with_fixed_;
  std::vector<int> offsets_;
  int q_ = 0;
  int p_ = 0;
  SpMat H_;
  std::vector<int> diag_pos_;
  std::vector<int> cross_pos_;
  std::vector<int> fixed_pos_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> solver_;
};

}  // namespace detail

class LaplaceObjective {
 public:
  struct Mode {
    Eigen::VectorXd u;
    Eigen::VectorXd beta;
    double penalized_deviance = 0.0;  // -2 phi(u, beta)
    double log_det = 0.0;             // log det A at the mode
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;

    double laplace_deviance() const { return penalized_deviance + log_det; }
  };

  // Factors are stored largest first; theta vectors passed to and returned by
  // this class follow the public order (child, then word, whichever are active).
  LaplaceObjective(const DesignMatrix& design, bool child, bool word, GlmmOptions options = {})
      : design_(design), options_(std::move(options)) {
    if (child) public_factors_.push_back({"child", design.child, design.n_children()});
    if (word) public_factors_.push_back({"word", design.word, design.n_words()});
    order_.resize(public_factors_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return public_factors_[a].n_levels > public_factors_[b].n_levels;
    });
    for (auto k : order_) factors_.push_back(public_factors_[k]);
    joint_.emplace(factors_, design_.X, true);
    random_only_.emplace(factors_, design_.X, false);
  }

  LaplaceObjective(const LaplaceObjective&) = delete;
  LaplaceObjective& operator=(const LaplaceObjective&) = delete;

  std::size_t n_theta() const { return factors_.size(); }
  std::size_t q() const { return static_cast<std::size_t>(joint_->q()); }
  std::size_t p() const { return static_cast<std::size_t>(design_.X.cols()); }
  const std::vector<RandomFactor>& factors() const { return public_factors_; }

  // Offset of public factor k inside u.
  int factor_offset(std::size_t k) const {
    const auto pos = static_cast<std::size_t>(std::find(order_.begin(), order_.end(), k) - order_.begin());
    return joint_->offset(pos);
  }

  Eigen::VectorXd linear_predictor(const std::vector<double>& theta, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& beta) const {
    const auto th = internal(theta);
    Eigen::VectorXd eta = design_.X * beta;
    for (std::size_t i = 0; i < design_.rows(); ++i) {
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        eta(static_cast<Eigen::Index>(i)) += th[f] * u(joint_->offset(f) + factors_[f].levels[i]);
      }
    }
    return eta;
  }

  double penalized_log_likelihood(const std::vector<double>& theta, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& beta) const {
    return bernoulli_log_likelihood(design_.y, linear_predictor(theta, u, beta)) - 0.5 * u.squaredNorm();
  }

  // Gradient of phi with respect to (u, beta), stacked in that order.
  Eigen::VectorXd penalized_gradient(const std::vector<double>& theta, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = linear_predictor(theta, u, beta);
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = design_.y(i) - inverse_logit(eta(i));
    return gradient(internal(theta), resid, u, true);
  }

  Mode mode_joint(const std::vector<double>& theta, const Mode* start = nullptr) {
    return pirls(internal(theta), start, true, nullptr);
  }

  Mode mode_fixed_beta(const std::vector<double>& theta, const Eigen::VectorXd& beta, const Mode* start = nullptr) {
    return pirls(internal(theta), start, false, &beta);
  }

  // Laplace log-likelihood at (theta, beta) with u at its conditional mode.
  double laplace_log_likelihood(const std::vector<double>& theta, const Eigen::VectorXd& beta) {
    return -0.5 * mode_fixed_beta(theta, beta).laplace_deviance();
  }

  // Fixed-effects block of the inverse penalized information at (u, beta).
  Eigen::MatrixXd fixed_effect_covariance(const std::vector<double>& theta, const Eigen::VectorXd& u,
                                          const Eigen::VectorXd& beta) {
    const auto th = internal(theta);
    const Eigen::VectorXd eta = linear_predictor(theta, u, beta);
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = inverse_logit(eta(i));
      w(i) = mu * (1.0 - mu);
    }
    joint_->assemble(th, w);
    joint_->factorize();
    const Eigen::Index qd = joint_->q();
    const Eigen::Index pd = joint_->p();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(qd + pd, pd);
    rhs.bottomRows(pd).setIdentity();
    const Eigen::MatrixXd sol = joint_->solve(rhs);
    Eigen::MatrixXd cov = sol.bottomRows(pd);
    return 0.5 * (cov + cov.transpose());
  }

 private:
  std::vector<double> internal(const std::vector<double>& theta) const {
    if (theta.size() != factors_.size()) throw ConfigError("GLMM: theta has wrong length");
    std::vector<double> th(theta.size());
    for (std::size_t f = 0; f < order_.size(); ++f) th[f] = theta[order_[f]];
    return th;
  }

  Eigen::VectorXd gradient(const std::vector<double>& th, const Eigen::VectorXd& resid, const Eigen::VectorXd& u,
                           bool with_fixed) const {
    const Eigen::Index qd = joint_->q();
    const Eigen::Index pd = with_fixed ? design_.X.cols() : 0;
    Eigen::VectorXd g(qd + pd);
    g.head(qd) = -u;
    for (std::size_t i = 0; i < design_.rows(); ++i) {
      for (std::size_t f = 0; f < factors_.size(); ++f) {
        g(joint_->offset(f) + factors_[f].levels[i]) += th[f] * resid(static_cast<Eigen::Index>(i));
      }
    }
    if (with_fixed) g.tail(pd) = design_.X.transpose() * resid;
    return g;
  }

  Mode pirls(const std::vector<double>& th, const Mode* start, bool joint, const Eigen::VectorXd* fixed_beta) {
    auto& system = joint ? *joint_ : *random_only_;
    const Eigen::Index qd = system.q();
    const Eigen::Index pd = design_.X.cols();
    const Eigen::Index n = design_.X.rows();
    Mode m;
    m.u = start ? start->u : Eigen::VectorXd::Zero(qd);
    m.beta = fixed_beta ? *fixed_beta : (start ? start->beta : Eigen::VectorXd::Zero(pd));

    Eigen::VectorXd offset_fixed = design_.X * m.beta;
    auto eta_of = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& beta) {
      Eigen::VectorXd eta = joint ? Eigen::VectorXd(design_.X * beta) : offset_fixed;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < factors_.size(); ++f) {
          eta(i) += th[f] * u(system.offset(f) + factors_[f].levels[static_cast<std::size_t>(i)]);
        }
      }
      return eta;
    };
    auto pdev_of = [&](const Eigen::VectorXd& eta, const Eigen::VectorXd& u) {
      return -2.0 * bernoulli_log_likelihood(design_.y, eta) + u.squaredNorm();
    };

    Eigen::VectorXd eta = eta_of(m.u, m.beta);
    double pdev = pdev_of(eta, m.u);
    double previous = std::numeric_limits<double>::infinity();
    Eigen::VectorXd mu(n), w(n), resid(n);
    for (std::size_t it = 0;; ++it) {
      for (Eigen::Index i = 0; i < n; ++i) {
        mu(i) = inverse_logit(eta(i));
        w(i) = mu(i) * (1.0 - mu(i));
        resid(i) = design_.y(i) - mu(i);
      }
      if (!w.allFinite()) throw NumericalError("GLMM: non-finite working weights");
      const Eigen::VectorXd g = gradient(th, resid, m.u, joint);
      m.gradient_norm = g.lpNorm<Eigen::Infinity>();
      m.iterations = it;
      system.assemble(th, w);
      system.factorize();
      const double rel = std::abs(previous - pdev) / (std::abs(pdev) + 0.1);
      if (rel < options_.inner_deviance_tolerance && m.gradient_norm < options_.inner_gradient_tolerance) {
        m.converged = true;
        break;
      }
      if (it >= options_.max_inner_iterations) break;

      const Eigen::VectorXd step = system.solve(g);
      double scale = 1.0;
      Eigen::VectorXd u_new, beta_new, eta_new;
      double pdev_new = 0.0;
      for (int halvings = 0; halvings < 40; ++halvings, scale /= 2.0) {
        u_new = m.u + scale * step.head(qd);
        beta_new = joint ? Eigen::VectorXd(m.beta + scale * step.tail(pd)) : m.beta;
        eta_new = eta_of(u_new, beta_new);
        pdev_new = pdev_of(eta_new, u_new);
        if (pdev_new <= pdev * (1.0 + 1e-14)) break;
      }
      previous = pdev;
      if (pdev_new <= pdev * (1.0 + 1e-14)) {
        m.u = std::move(u_new);
        m.beta = std::move(beta_new);
        eta = std::move(eta_new);
        pdev = pdev_new;
      }
    }
    m.penalized_deviance = pdev;
    m.log_det = system.log_det_random();
    return m;
  }

  const DesignMatrix& design_;
  GlmmOptions options_;
  std::vector<RandomFactor> public_factors_;
  std::vector<RandomFactor> factors_;
  std::vector<std::size_t> order_;  // internal position -> public factor index
  std::optional<detail::PenalizedSystem> joint_;
  std::optional<detail::PenalizedSystem> random_only_;
};

namespace detail {

inline void finish_glmm(FitResult& fit, LaplaceObjective& objective, const DesignMatrix& design,
                        const std::vector<double>& theta, const LaplaceObjective::Mode& mode,
                        const GlmmOptions& options) {
  fit.beta = mode.beta;
  fit.covariance = objective.fixed_effect_covariance(theta, mode.u, mode.beta);
  fit.log_likelihood = -0.5 * mode.laplace_deviance();
  fit.convergence.inner_iterations = mode.iterations;
  fit.convergence.gradient_norm = mode.gradient_norm;
  for (std::size_t k = 0; k < objective.factors().size(); ++k) {
    const auto& f = objective.factors()[k];
    Eigen::VectorXd effects = theta[k] * mode.u.segment(objective.factor_offset(k), static_cast<Eigen::Index>(f.n_levels));
    if (theta[k] < options.boundary_threshold) fit.convergence.boundary = true;
    if (f.name == "child") {
      fit.has_child_effects = true;
      fit.var_child = theta[k] * theta[k];
      fit.child_effects = std::move(effects);
    } else {
      fit.has_word_effects = true;
      fit.var_word = theta[k] * theta[k];
      fit.word_effects = std::move(effects);
    }
  }
  wald_inference(fit, design.column_names);
  if (fit.beta.lpNorm<Eigen::Infinity>() > kSeparationBound ||
      (design.X * fit.beta).lpNorm<Eigen::Infinity>() >= kSeparationBound) {
    throw SeparationError("GLMM: fixed-effect predictor saturated at " + std::to_string(kSeparationBound) + " (separation)");
  }
}

}  // namespace detail

inline FitResult fit_glmm_laplace(const DesignMatrix& design, const ModelSpec& spec, const GlmmOptions& options = {}) {
  if (!spec.child_intercept && !spec.word_intercept) return fit_logistic_irls(design);
  if (spec.child_intercept && design.n_children() < 2) throw DataError("GLMM: child factor needs at least 2 levels");
  if (spec.word_intercept && design.n_words() < 2) throw DataError("GLMM: word factor needs at least 2 levels");

  LaplaceObjective objective(design, spec.child_intercept, spec.word_intercept, options);
  const std::size_t k = objective.n_theta();
  const std::size_t p = objective.p();
  FitResult fit;

  if (options.fixed_theta) {
    const auto mode = objective.mode_joint(*options.fixed_theta);
    detail::finish_glmm(fit, objective, design, *options.fixed_theta, mode, options);
    fit.convergence.status = mode.converged ? FitStatus::converged : FitStatus::not_converged;
    return fit;
  }

  // Stage one: theta only, beta inside the mode.
  LaplaceObjective::Mode warm = objective.mode_joint(std::vector<double>(k, 0.0));
  auto stage_one = [&](const std::vector<double>& theta) {
    auto m = objective.mode_joint(theta, &warm);
    warm = m;
    return m.laplace_deviance();
  };
  NelderMeadOptions nm;
  nm.f_tolerance = options.outer_tolerance;
  nm.x_tolerance = 1e-6;
  nm.max_evaluations = options.max_outer_evaluations;
  nm.steps.assign(k, 0.25);
  const auto first = minimize_nelder_mead(stage_one, std::vector<double>(k, 1.0), std::vector<double>(k, 0.0),
                                          std::vector<double>(k, options.theta_upper), nm);
  std::vector<double> theta = first.x;
  LaplaceObjective::Mode mode = objective.mode_joint(theta, &warm);
  bool outer_ok = first.converged;
  std::size_t evaluations = first.evaluations;

  if (options.refine_fixed_effects) {
    // Stage two: (theta, beta) on the Laplace deviance, u profiled.
    const Eigen::MatrixXd cov = objective.fixed_effect_covariance(theta, mode.u, mode.beta);
    warm = objective.mode_fixed_beta(theta, mode.beta, &mode);
    auto stage_two = [&](const std::vector<double>& x) {
      const std::vector<double> th(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k));
      const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(x.data() + k, static_cast<Eigen::Index>(p));
      auto m = objective.mode_fixed_beta(th, beta, &warm);
      warm = m;
      return m.laplace_deviance();
    };
    std::vector<double> x0(theta), lower(k, 0.0), upper(k, options.theta_upper);
    NelderMeadOptions nm2 = nm;
    nm2.max_evaluations = options.refine_evaluations_per_parameter * (k + p);
    nm2.steps.clear();
    for (std::size_t f = 0; f < k; ++f) nm2.steps.push_back(std::max(0.05, 0.1 * theta[f]));
    for (std::size_t j = 0; j < p; ++j) {
      x0.push_back(mode.beta(static_cast<Eigen::Index>(j)));
      lower.push_back(-std::numeric_limits<double>::infinity());
      upper.push_back(std::numeric_limits<double>::infinity());
      nm2.steps.push_back(std::max(1e-3, 0.5 * std::sqrt(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)))));
    }
    auto second = minimize_nelder_mead(stage_two, x0, lower, upper, nm2);
    evaluations += second.evaluations;
    if (second.converged && second.evaluations < nm2.max_evaluations) {
      // One restart from the reported optimum guards against a collapsed simplex.
      NelderMeadOptions restart = nm2;
      restart.max_evaluations = nm2.max_evaluations - second.evaluations;
      auto again = minimize_nelder_mead(stage_two, second.x, lower, upper, restart);
      evaluations += again.evaluations;
      if (again.value <= second.value) second = std::move(again);
    }
    outer_ok = outer_ok && second.converged;
    if (second.value <= first.value) {
      theta.assign(second.x.begin(), second.x.begin() + static_cast<std::ptrdiff_t>(k));
      const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(second.x.data() + k, static_cast<Eigen::Index>(p));
      mode = objective.mode_fixed_beta(theta, beta, &warm);
    }
  }

  detail::finish_glmm(fit, objective, design, theta, mode, options);
  fit.convergence.iterations = evaluations;
  fit.convergence.status = outer_ok && mode.converged ? FitStatus::converged : FitStatus::not_converged;
  return fit;
}

}  // namespace prokwo
