#pragma once

// Maximum likelihood fitting, OPG standard errors, information criteria and
// model selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcmm/likelihood.hpp"
#include "fcmm/model.hpp"
#include "fcmm/optimize.hpp"
#include "fcmm/parallel.hpp"
#include "fcmm/quadrature.hpp"

namespace fcmm {

struct FitOptions {
  int quad_nodes = 100;
  int max_iter = 500;
  std::optional<double> tol_grad;  // on the score sup-norm; default 1e-5 * sqrt(N)
  double step_tol = 1e-8;
  double start_tau = 0.5;
  int threads = 1;
  bool standard_errors = true;
};

enum class Criterion { AIC, BIC };

inline Criterion criterion_from_name(std::string_view s) {
  if (s == "aic") return Criterion::AIC;
  if (s == "bic") return Criterion::BIC;
  throw std::invalid_argument("unknown criterion '" + std::string(s) + "' (expected aic or bic)");
}

struct FitResult {
  ModelSpec spec;
  ParamVector theta;
  ParamVector start;
  std::vector<std::string> names;
  Eigen::VectorXd se;          // NaN entries when unavailable
  bool se_available = false;
  bool pseudo_inverse = false;  // OPG not PSD beyond tolerance
  Eigen::MatrixXd covariance;   // Sigma_hat^{-1} / N, empty when unavailable
  double loglik = -std::numeric_limits<double>::infinity();
  double start_loglik = -std::numeric_limits<double>::infinity();
  double aic = std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  double lambda = 0.0;
  bool nan_encountered = false;
  std::size_t observations = 0;
  std::size_t clusters = 0;
  int quad_nodes = 0;
  std::string message;

  std::size_t dim() const { return static_cast<std::size_t>(theta.values.size()); }
  double criterion(Criterion c) const { return c == Criterion::AIC ? aic : bic; }
};

inline double aic_value(double loglik, std::size_t p) { return -2.0 * loglik + 2.0 * static_cast<double>(p); }
inline double bic_value(double loglik, std::size_t p, std::size_t n) {
  return -2.0 * loglik + std::log(static_cast<double>(n)) * static_cast<double>(p);
}

// ---------------------------------------------------------------------------
// Independent-observation margin fits.

struct GlmFit {
  Eigen::VectorXd coefficients;
  std::optional<double> log_sd;
  bool converged = false;
  int iterations = 0;
};

/// Maximum likelihood fit of the margin ignoring clusters: OLS with the ML
/// residual sd for Gaussian margins, IRLS for Poisson (log) and Bernoulli
/// (logit). If IRLS fails the slopes are set to zero and the intercept to the
/// link of the sample mean.
inline GlmFit glm_fit(const MarginFamily& fam, const RowMatrix& x, const std::vector<double>& y,
                      double tol = 1e-8, int max_iter = 100) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  GlmFit out;
  if (fam.kind() == MarginKind::Gaussian) {
    out.coefficients = x.colPivHouseholderQr().solve(yv);
    const double rss = (yv - x * out.coefficients).squaredNorm();
    const double sd = std::sqrt(rss / static_cast<double>(n));
    out.log_sd = std::max(std::log(sd), margin::kLogSdFloor);
    out.converged = true;
    return out;
  }

  const double ybar = yv.mean();
  auto fallback = [&] {
    GlmFit f;
    f.coefficients = Eigen::VectorXd::Zero(p);
    double m = ybar;
    if (fam.kind() == MarginKind::Poisson) {
      f.coefficients[0] = std::log(std::max(m, 1e-8));
    } else {
      m = std::clamp(m, 1e-8, 1.0 - 1e-8);
      f.coefficients[0] = std::log(m / (1.0 - m));
    }
    return f;
  };

  Eigen::VectorXd beta = fallback().coefficients;
  double dev_old = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(n), z(n);
    double dev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mu, var;
      if (fam.kind() == MarginKind::Poisson) {
        mu = std::exp(eta[i]);
        var = mu;
        dev -= y[i] * eta[i] - mu;
      } else {
        mu = margin::logistic(eta[i]);
        var = mu * (1.0 - mu);
        dev += y[i] > 0.5 ? std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
      }
      var = std::max(var, 1e-12);
      w[i] = var;
      z[i] = eta[i] + (y[i] - mu) / var;
    }
    if (!std::isfinite(dev)) break;
    out.iterations = it + 1;
    if (std::abs(dev - dev_old) <= tol * (std::abs(dev) + 0.1)) {
      out.coefficients = beta;
      out.converged = true;
      return out;
    }
    dev_old = dev;
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const RowMatrix xw = sw.asDiagonal() * x;
    const Eigen::VectorXd next = xw.colPivHouseholderQr().solve(sw.cwiseProduct(z));
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e3) break;
    beta = next;
  }
  GlmFit f = fallback();
  f.iterations = out.iterations;
  return f;
}

/// Starting values: independent-observation margin fit; copula coefficients
/// zero except the intercept, which gives Kendall's tau = start_tau.
inline ParamVector auto_start(const ModelSpec& spec, const ClusteredDataset& data, double start_tau = 0.5) {
  check_compatible(spec, data);
  const auto l = spec.layout();
  const GlmFit g = glm_fit(spec.margin, data.x_margin(), data.y());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(l.size());
  v.head(l.margin_coefs) = g.coefficients;
  if (l.dispersion) v[l.dispersion_index()] = *g.log_sd;
  v[l.copula_offset()] =
      copula::predictor_from_param(spec.copula, copula::tau_to_param(spec.copula, start_tau));
  return ParamVector(l, v);
}

// ---------------------------------------------------------------------------

struct CovarianceResult {
  Eigen::MatrixXd opg;         // Sigma_hat
  Eigen::MatrixXd covariance;  // Sigma_hat^{-1} / N
  Eigen::VectorXd se;
  bool available = false;
  bool pseudo_inverse = false;
};

/// OPG covariance: Sigma_hat = (1/N) sum_k s_k s_k', se_j = sqrt((Sigma_hat^{-1})_jj / N).
inline CovarianceResult covariance_from_scores(const Eigen::MatrixXd& scores, std::size_t n_obs) {
  const Eigen::Index p = scores.cols();
  const double n = static_cast<double>(n_obs);
  CovarianceResult out;
  out.opg = scores.transpose() * scores / n;
  out.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  if (!out.opg.allFinite()) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.opg);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) return out;
  const double rank_tol = 1e-10 * top;
  if (scores.rows() < p || (ev.minCoeff() > -rank_tol && ev.minCoeff() <= rank_tol)) return out;  // singular
  Eigen::VectorXd inv(p);
  if (ev.minCoeff() < -rank_tol) {
    out.pseudo_inverse = true;
    for (Eigen::Index i = 0; i < p; ++i) inv[i] = std::abs(ev[i]) > rank_tol ? 1.0 / ev[i] : 0.0;
  } else {
    inv = ev.cwiseInverse();
  }
  out.covariance = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() / n;
  for (Eigen::Index j = 0; j < p; ++j)
    out.se[j] = out.covariance(j, j) >= 0.0 ? std::sqrt(out.covariance(j, j)) : std::numeric_limits<double>::quiet_NaN();
  out.available = true;
  return out;
}

inline CovarianceResult covariance(const ModelSpec& spec, const ParamVector& theta, const ClusteredDataset& data,
                                   const QuadratureRule& rule, int threads = 1) {
  const Likelihood lik(spec, data, rule, threads);
  return covariance_from_scores(lik.per_cluster_scores(theta.values), data.size());
}

/// Maximizes the log-likelihood. Never throws on numerical trouble during the
/// search; the best iterate is returned with converged = false.
inline FitResult fit(const ModelSpec& spec, const ClusteredDataset& data, const FitOptions& opt = {},
                     std::optional<ParamVector> start = std::nullopt) {
  check_compatible(spec, data);
  const auto l = spec.layout();
  FitResult r;
  r.spec = spec;
  r.names = spec.parameter_names();
  r.observations = data.size();
  r.clusters = data.clusters();
  r.lambda = data.lambda();
  r.quad_nodes = opt.quad_nodes;
  r.start = start ? *start : auto_start(spec, data, opt.start_tau);
  if (!(r.start.layout == l)) throw std::invalid_argument("starting values do not match model " + spec.label());

  const Likelihood lik(spec, data, latent_rule(spec.copula, opt.quad_nodes), opt.threads);
  const double n = static_cast<double>(data.size());
  const double tol = opt.tol_grad.value_or(1e-5 * std::sqrt(n));

  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    LoglikEval e;
    try {
      e = lik.evaluate(x, true);
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
    if (e.nan) return std::numeric_limits<double>::quiet_NaN();
    if (e.failed_cluster) return std::numeric_limits<double>::infinity();
    g = -e.gradient / n;
    return -e.value / n;
  };

  BfgsOptions bo;
  bo.max_iter = opt.max_iter;
  bo.grad_tol = tol / n;
  bo.step_tol = opt.step_tol;
  const BfgsResult br = bfgs_minimize(objective, r.start.values, bo);

  r.start_loglik = lik.value(r.start.values);
  r.theta = ParamVector(l, br.x);
  r.iterations = br.iterations;
  r.nan_encountered = br.nan_encountered;
  r.message = br.message;
  r.loglik = std::isfinite(br.f) ? -br.f * n : -std::numeric_limits<double>::infinity();
  r.grad_norm = std::isfinite(br.f) ? detail::sup_norm(br.g) * n : std::numeric_limits<double>::infinity();
  r.converged = br.converged && r.grad_norm < tol;
  const std::size_t p = l.size();
  r.aic = aic_value(r.loglik, p);
  r.bic = bic_value(r.loglik, p, data.size());

  r.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  if (opt.standard_errors && std::isfinite(r.loglik)) {
    const auto cov = covariance_from_scores(lik.per_cluster_scores(r.theta.values), data.size());
    r.se = cov.se;
    r.se_available = cov.available;
    r.pseudo_inverse = cov.pseudo_inverse;
    r.covariance = cov.covariance;
  }
  return r;
}

// ---------------------------------------------------------------------------

struct SelectionEntry {
  std::size_t index = 0;  // position in the candidate list
  FitResult fit;
  double value = 0.0;     // criterion value
  int rank = 0;           // 1 = chosen
  bool flagged = false;   // did not converge
};

/// Fits every candidate and ranks them by the criterion; ties go to fewer
/// parameters, then to the earlier candidate. Candidates may be fitted
/// concurrently (`threads`); each fit runs single-threaded and the ranking
/// does not depend on the thread count.
inline std::vector<SelectionEntry> select(const std::vector<ModelSpec>& candidates, const ClusteredDataset& data,
                                          Criterion criterion, FitOptions opt = {}, int threads = 1) {
  if (candidates.size() < 2) throw std::invalid_argument("select needs at least two candidate models");
  std::vector<SelectionEntry> out(candidates.size());
  const int inner = threads > 1 ? 1 : opt.threads;
  opt.threads = inner;
  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    out[i].index = i;
    out[i].fit = fit(candidates[i], data, opt);
  });
  for (auto& e : out) {
    e.value = e.fit.criterion(criterion);
    if (std::isnan(e.value)) e.value = std::numeric_limits<double>::infinity();
    e.flagged = !e.fit.converged;
  }
  std::stable_sort(out.begin(), out.end(), [](const SelectionEntry& a, const SelectionEntry& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.fit.dim() != b.fit.dim()) return a.fit.dim() < b.fit.dim();
    return a.index < b.index;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
  return out;
}

}  // namespace fcmm
