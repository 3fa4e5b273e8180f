#pragma once

// Monte-Carlo replication harness: parameter RMSE, prediction RMSE / RMSE95
// and selection frequencies over candidate copula families.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fcmm/estimate.hpp"
#include "fcmm/parallel.hpp"
#include "fcmm/predict.hpp"
#include "fcmm/simulate.hpp"

namespace fcmm {

inline constexpr const char* kIndependence = "independence";

struct HarnessConfig {
  std::string design = "exp1";
  int K = 20;
  int n = 0;  // 0: design default
  int replications = 10;
  std::uint64_t seed = 1;
  std::string start = "auto";  // "auto" or "true"
  double start_tau = 0.5;
  int quad_nodes = 100;
  std::vector<std::string> candidates;  // copula names and/or "independence"; empty: true copula only
  Criterion criterion = Criterion::BIC;
  bool params = true;
  bool prediction = false;
  bool selection = false;
  int new_obs = 100;
  int threads = 1;
  int max_iter = 500;
};

struct CandidateOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::size_t dim = 0;
  bool converged = false;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double rmse95 = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd theta;
  Eigen::VectorXd se;
  bool chosen = false;
};

struct ReplicationOutcome {
  int replication = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd truth;
  std::vector<CandidateOutcome> candidates;
  std::string chosen;
};

struct HarnessReport {
  HarnessConfig config;
  std::vector<std::string> parameter_names;  // of the true model
  std::vector<ReplicationOutcome> replications;
  std::vector<std::string> candidates;
  // aggregates, candidate order
  std::vector<double> selection_pct;
  std::vector<double> mean_rmse;
  std::vector<double> mean_rmse95;
  std::vector<int> converged;
  std::vector<int> failures;
  // true-model parameter RMSE, coverage of 95% Wald intervals
  std::vector<double> param_rmse;
  std::vector<double> param_bias;
  std::vector<int> param_count;
  std::vector<int> coverage;
  int coverage_count = 0;
};

/// RMSE of predictions; `top` > 0 restricts to the `top` largest targets.
inline double rmse(const std::vector<double>& target, const std::vector<double>& pred, std::size_t top = 0) {
  if (target.size() != pred.size() || target.empty()) throw std::invalid_argument("rmse: size mismatch");
  std::vector<std::size_t> idx(target.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (top > 0 && top < idx.size()) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return target[a] > target[b]; });
    idx.resize(top);
  }
  double s = 0.0;
  for (std::size_t i : idx) s += (target[i] - pred[i]) * (target[i] - pred[i]);
  return std::sqrt(s / static_cast<double>(idx.size()));
}

/// Log-likelihood of the margin alone at a GLM fit (observations independent).
inline double independence_loglik(const MarginFamily& fam, const ClusteredDataset& data, const GlmFit& g) {
  double ll = 0.0;
  const double ls = g.log_sd.value_or(0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double eta = data.x_margin().row(i).dot(g.coefficients);
    ll += margin::evaluate(fam, eta, ls, data.y()[i]).log_mass;
  }
  return ll;
}

namespace detail {

inline CandidateOutcome run_candidate(const HarnessConfig& cfg, const SimulatedData& sim, const std::string& name) {
  CandidateOutcome c;
  c.name = name;
  const auto& truth = sim.truth;
  try {
    if (name == kIndependence) {
      const ModelSpec spec = truth;
      const auto data = make_dataset(sim, spec);
      const GlmFit g = glm_fit(spec.margin, data.x_margin(), data.y());
      c.dim = spec.layout().size() - spec.layout().copula_coefs;
      c.loglik = independence_loglik(spec.margin, data, g);
      c.aic = aic_value(c.loglik, c.dim);
      c.bic = bic_value(c.loglik, c.dim, data.size());
      c.converged = true;
      c.ok = true;
      if (cfg.prediction && !sim.y_new.empty()) {
        MarginLink link{{g.coefficients.data(), g.coefficients.data() + g.coefficients.size()}, g.log_sd};
        const Eigen::MatrixXd xm = select_columns(sim.x_new, sim.columns, spec.margin_covariates);
        std::vector<double> pred(sim.y_new.size());
        for (std::size_t j = 0; j < pred.size(); ++j) {
          const Eigen::VectorXd row = xm.row(j).transpose();
          pred[j] = margin::mean(spec.margin, margin::param_at(spec.margin, link, {row.data(), (std::size_t)row.size()}));
        }
        c.rmse = rmse(sim.y_new, pred);
        c.rmse95 = rmse(sim.y_new, pred, 5);
      }
      return c;
    }

    ModelSpec spec = truth;
    spec.copula = CopulaFamily::from_name(name);
    const auto data = make_dataset(sim, spec);
    FitOptions opt;
    opt.quad_nodes = cfg.quad_nodes;
    opt.start_tau = cfg.start_tau;
    opt.max_iter = cfg.max_iter;
    std::optional<ParamVector> start;
    if (cfg.start == "true" && spec.copula == truth.copula) start = sim.theta;
    const FitResult f = fit(spec, data, opt, start);
    c.dim = f.dim();
    c.loglik = f.loglik;
    c.aic = f.aic;
    c.bic = f.bic;
    c.converged = f.converged;
    c.theta = f.theta.values;
    c.se = f.se;
    c.ok = std::isfinite(f.loglik);
    if (cfg.prediction && !sim.y_new.empty() && c.ok) {
      const Likelihood lik(spec, data, latent_rule(spec.copula, cfg.quad_nodes));
      const auto post = latent_posteriors(lik, f.theta.values);
      const RowMatrix xm = select_columns(sim.x_new, sim.columns, spec.margin_covariates);
      const RowMatrix xc = select_columns(sim.x_new, sim.columns, spec.copula_covariates);
      std::vector<double> pred(sim.y_new.size());
      for (std::size_t j = 0; j < pred.size(); ++j) {
        // simulated cluster ids are 1..K in order of appearance
        const double v = post[sim.cluster_new[j] - 1].median;
        pred[j] = cond_mean(spec, f.theta, {xm.row(j).data(), (std::size_t)xm.cols()},
                            {xc.row(j).data(), (std::size_t)xc.cols()}, v);
      }
      c.rmse = rmse(sim.y_new, pred);
      c.rmse95 = rmse(sim.y_new, pred, 5);
    }
  } catch (const std::exception& e) {
    c.ok = false;
    c.error = e.what();
  }
  return c;
}

}  // namespace detail

inline HarnessReport run_harness(const HarnessConfig& cfg) {
  if (cfg.replications < 1) throw std::invalid_argument("harness: replications must be positive");
  if (cfg.start != "auto" && cfg.start != "true") throw std::invalid_argument("harness: start must be auto or true");
  HarnessReport rep;
  rep.config = cfg;
  const int n = cfg.n > 0 ? cfg.n : default_cluster_size(cfg.design);
  {
    Rng probe(0);
    const auto setup = design_setup(cfg.design, probe);
    rep.parameter_names = setup.truth.parameter_names();
    rep.candidates = cfg.candidates.empty() ? std::vector<std::string>{setup.truth.copula.name()} : cfg.candidates;
  }
  for (const auto& c : rep.candidates)
    if (c != kIndependence) (void)CopulaFamily::from_name(c);
  const int new_obs = cfg.prediction ? cfg.new_obs : 0;

  rep.replications.resize(cfg.replications);
  parallel_for(static_cast<std::size_t>(cfg.replications), cfg.threads, [&](std::size_t r) {
    ReplicationOutcome& out = rep.replications[r];
    out.replication = static_cast<int>(r);
    out.seed = stream_seed(cfg.seed, r);
    const auto sim = simulate_design(cfg.design, cfg.K, n, out.seed, new_obs);
    out.truth = sim.theta.values;
    for (const auto& name : rep.candidates) out.candidates.push_back(detail::run_candidate(cfg, sim, name));
    // ranking: criterion, then fewer parameters, then candidate order
    std::size_t best = out.candidates.size();
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
      const auto& c = out.candidates[i];
      const double v = c.ok ? (cfg.criterion == Criterion::AIC ? c.aic : c.bic) : std::numeric_limits<double>::infinity();
      if (!std::isfinite(v)) continue;
      if (best == out.candidates.size()) {
        best = i;
        continue;
      }
      const auto& b = out.candidates[best];
      const double bv = cfg.criterion == Criterion::AIC ? b.aic : b.bic;
      if (v < bv || (v == bv && c.dim < b.dim)) best = i;
    }
    if (best < out.candidates.size()) {
      out.candidates[best].chosen = true;
      out.chosen = out.candidates[best].name;
    }
  });

  // aggregation in replication order
  const std::size_t nc = rep.candidates.size();
  rep.selection_pct.assign(nc, 0.0);
  rep.mean_rmse.assign(nc, 0.0);
  rep.mean_rmse95.assign(nc, 0.0);
  rep.converged.assign(nc, 0);
  rep.failures.assign(nc, 0);
  std::vector<int> pred_count(nc, 0);
  const std::size_t p = rep.parameter_names.size();
  rep.param_rmse.assign(p, 0.0);
  rep.param_bias.assign(p, 0.0);
  rep.param_count.assign(p, 0);
  rep.coverage.assign(p, 0);
  std::size_t true_idx = nc;
  {
    Rng probe(0);
    const auto truth_name = design_setup(cfg.design, probe).truth.copula.name();
    for (std::size_t i = 0; i < nc; ++i)
      if (rep.candidates[i] == truth_name) true_idx = i;
  }
  for (const auto& r : rep.replications) {
    for (std::size_t i = 0; i < nc; ++i) {
      const auto& c = r.candidates[i];
      if (!c.ok) ++rep.failures[i];
      if (c.converged) ++rep.converged[i];
      if (c.chosen) rep.selection_pct[i] += 1.0;
      if (std::isfinite(c.rmse)) {
        rep.mean_rmse[i] += c.rmse;
        rep.mean_rmse95[i] += c.rmse95;
        ++pred_count[i];
      }
    }
    if (true_idx < nc) {
      const auto& c = r.candidates[true_idx];
      if (c.ok && static_cast<std::size_t>(c.theta.size()) == p) {
        bool counted_cov = c.se.size() == static_cast<Eigen::Index>(p) && c.se.allFinite();
        if (counted_cov) ++rep.coverage_count;
        for (std::size_t j = 0; j < p; ++j) {
          const double e = c.theta[j] - r.truth[j];
          rep.param_rmse[j] += e * e;
          rep.param_bias[j] += e;
          ++rep.param_count[j];
          if (counted_cov && std::abs(e) <= 1.959963984540054 * c.se[j]) ++rep.coverage[j];
        }
      }
    }
  }
  for (std::size_t i = 0; i < nc; ++i) {
    rep.selection_pct[i] *= 100.0 / cfg.replications;
    rep.mean_rmse[i] = pred_count[i] ? rep.mean_rmse[i] / pred_count[i] : std::numeric_limits<double>::quiet_NaN();
    rep.mean_rmse95[i] = pred_count[i] ? rep.mean_rmse95[i] / pred_count[i] : std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double m = rep.param_count[j];
    rep.param_rmse[j] = m > 0 ? std::sqrt(rep.param_rmse[j] / m) : std::numeric_limits<double>::quiet_NaN();
    rep.param_bias[j] = m > 0 ? rep.param_bias[j] / m : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace fcmm
