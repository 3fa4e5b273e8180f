#pragma once

// Posterior of the latent factor V_k and conditional prediction given V = v.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <Eigen/Dense>

#include "fcmm/copulas.hpp"
#include "fcmm/likelihood.hpp"
#include "fcmm/margins.hpp"
#include "fcmm/model.hpp"
#include "fcmm/parallel.hpp"
#include "fcmm/quadrature.hpp"
#include "fcmm/special.hpp"

namespace fcmm {

struct LatentEstimate {
  std::size_t cluster = 0;
  std::string label;
  std::vector<double> nodes;    // rule nodes
  std::vector<double> density;  // posterior density at the nodes, sum w_q density_q = 1
  double mean = 0.5;
  double median = 0.5;
  bool degenerate = false;      // cluster likelihood underflowed; uniform posterior returned
};

namespace detail {

// Fine rule in z = Phi^{-1}(v): panels of width kPanel, 8 Gauss-Legendre
// nodes each. The posterior in z is smooth and decays like phi(z), so this
// resolves posteriors far narrower than the likelihood's node spacing.
inline constexpr double kZLo = -8.5;
inline constexpr double kPanel = 0.05;
inline constexpr int kPanels = 340;

struct PanelRule {
  std::vector<double> x, w;  // reference nodes/weights on (0, 1)
  PanelRule() {
    const auto r = gauss_legendre_unit(8);
    x = r.nodes;
    w = r.weights;
  }
};

inline const PanelRule& panel_rule() {
  static const PanelRule r;
  return r;
}

}  // namespace detail

/// Posterior of V_k given the cluster's responses. The median solves
/// F(v) = 1/2 for the posterior cdf F, integrated on a fine panel rule in
/// Phi^{-1}(v).
inline LatentEstimate latent_posterior(const Likelihood& lik, const Eigen::VectorXd& theta, std::size_t k) {
  const auto& data = lik.data();
  const auto& rule = lik.rule();
  LatentEstimate out;
  out.cluster = k;
  out.label = data.cluster_labels()[k];
  out.nodes = rule.nodes;
  const std::size_t q_count = rule.size();

  auto uniform = [&] {
    out.density.assign(q_count, 1.0);
    out.mean = 0.5;
    out.median = 0.5;
    out.degenerate = true;
    return out;
  };

  // grid density
  const auto s = lik.log_profile(theta, k, rule.nodes);
  double m = -std::numeric_limits<double>::infinity();
  for (double x : s) m = std::max(m, x);
  if (!std::isfinite(m)) return uniform();
  double norm = 0.0;
  out.density.resize(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    out.density[q] = std::exp(s[q] - m);
    norm += rule.weights[q] * out.density[q];
  }
  for (auto& d : out.density) d /= norm;

  // fine panel rule in z
  const auto& pr = detail::panel_rule();
  const std::size_t per = pr.x.size();
  std::vector<double> z(detail::kPanels * per), v(z.size());
  for (int p = 0; p < detail::kPanels; ++p)
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t i = p * per + j;
      z[i] = detail::kZLo + detail::kPanel * (p + pr.x[j]);
      v[i] = norm_cdf(z[i]);
    }
  auto log_post_z = [&](std::span<const double> zs, std::span<const double> vs) {
    auto lp = lik.log_profile(theta, k, vs);
    for (std::size_t i = 0; i < zs.size(); ++i) lp[i] += -0.5 * zs[i] * zs[i];
    return lp;
  };
  const auto lp = log_post_z(z, v);
  double mz = -std::numeric_limits<double>::infinity();
  for (double x : lp) mz = std::max(mz, x);
  if (!std::isfinite(mz)) return uniform();

  std::vector<double> panel_mass(detail::kPanels, 0.0);
  double total = 0.0, vmean = 0.0;
  for (int p = 0; p < detail::kPanels; ++p) {
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t i = p * per + j;
      const double f = std::exp(lp[i] - mz) * pr.w[j] * detail::kPanel;
      panel_mass[p] += f;
      vmean += f * v[i];
    }
    total += panel_mass[p];
  }
  if (!(total > 0.0) || !std::isfinite(total)) return uniform();
  out.mean = vmean / total;

  // panel holding the median, then a root solve inside it
  double cum = 0.0;
  int pm = 0;
  for (; pm < detail::kPanels - 1; ++pm) {
    if (cum + panel_mass[pm] >= 0.5 * total) break;
    cum += panel_mass[pm];
  }
  const double a = detail::kZLo + detail::kPanel * pm;
  auto cdf_minus_half = [&](double zz) {
    if (zz <= a) return (cum - 0.5 * total) / total;
    std::vector<double> zs(per), vs(per);
    for (std::size_t j = 0; j < per; ++j) {
      zs[j] = a + (zz - a) * pr.x[j];
      vs[j] = norm_cdf(zs[j]);
    }
    const auto l = log_post_z(zs, vs);
    double part = 0.0;
    for (std::size_t j = 0; j < per; ++j) part += std::exp(l[j] - mz) * pr.w[j] * (zz - a);
    return (cum + part - 0.5 * total) / total;
  };
  double lo = a, hi = a + detail::kPanel;
  double flo = cdf_minus_half(lo), fhi = cdf_minus_half(hi);
  double zmed;
  if (flo >= 0.0) {
    zmed = lo;
  } else if (fhi <= 0.0) {
    zmed = hi;
  } else {
    std::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(cdf_minus_half, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(50), iters);
    zmed = 0.5 * (r.first + r.second);
  }
  out.median = std::clamp(norm_cdf(zmed), copula::kUMin, copula::kUMax);
  return out;
}

/// Posteriors for every cluster, computed independently (optionally in parallel).
inline std::vector<LatentEstimate> latent_posteriors(const Likelihood& lik, const Eigen::VectorXd& theta,
                                                     int threads = 1) {
  std::vector<LatentEstimate> out(lik.data().clusters());
  parallel_for(out.size(), threads, [&](std::size_t k) { out[k] = latent_posterior(lik, theta, k); });
  return out;
}

// ---------------------------------------------------------------------------
// Conditional law of a new response given covariates and V = v.

struct PointParams {
  MarginParam margin;
  double copula = 0.0;
};

inline PointParams point_params(const ModelSpec& spec, const ParamVector& theta, std::span<const double> xm,
                                std::span<const double> xc) {
  const auto l = theta.layout;
  if (xc.size() + 1 != l.copula_coefs) throw std::invalid_argument("copula covariate length mismatch");
  PointParams p;
  p.margin = margin::param_at(spec.margin, theta.margin_link(), xm);
  double s = theta.values[l.copula_offset()];
  for (std::size_t j = 0; j < xc.size(); ++j) s += theta.values[l.copula_offset() + j + 1] * xc[j];
  p.copula = copula::param_from_predictor(spec.copula, s);
  return p;
}

inline void check_latent(double v) {
  if (!(v > 0.0 && v < 1.0)) throw std::domain_error("latent value v must be inside (0, 1)");
}

/// P(Y <= y | x, V = v) = h(G(y), v).
inline double cond_cdf(const ModelSpec& spec, const PointParams& p, double y, double v) {
  check_latent(v);
  const double u = margin::cdf(spec.margin, p.margin, y);
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return copula::hfunc(spec.copula, p.copula, u, v);
}

inline double cond_cdf(const ModelSpec& spec, const ParamVector& theta, double y, std::span<const double> xm,
                       std::span<const double> xc, double v) {
  return cond_cdf(spec, point_params(spec, theta, xm, xc), y, v);
}

/// G^{-1}(h^{-1}(u, v)).
inline double cond_quantile(const ModelSpec& spec, const PointParams& p, double u, double v) {
  check_latent(v);
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("cond_quantile: u must be inside (0, 1)");
  double w = copula::hinv(spec.copula, p.copula, u, v);
  w = std::clamp(w, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon() / 2);
  return margin::quantile(spec.margin, p.margin, w);
}

inline double cond_quantile(const ModelSpec& spec, const ParamVector& theta, double u,
                            std::span<const double> xm, std::span<const double> xc, double v) {
  return cond_quantile(spec, point_params(spec, theta, xm, xc), u, v);
}

enum class MeanMethod { Auto, Kappa, QuantileIntegral };

/// kappa(v) = E[Phi^{-1}(U) | V = v], so that a Gaussian margin has
/// conditional mean mu + sigma * kappa.
inline double kappa(const CopulaFamily& fam, double th, double v) {
  check_latent(v);
  auto f = [&](double z) {
    if (!std::isfinite(z)) return 0.0;
    return z * copula::density(fam, th, norm_cdf(z), v) * norm_pdf(z);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  return gauss_kronrod<double, 61>::integrate(f, -inf, 0.0, 15, 1e-13) +
         gauss_kronrod<double, 61>::integrate(f, 0.0, inf, 15, 1e-13);
}

/// E(Y | x, V = v). Gaussian margins: mu + sigma * kappa (Kappa) or the
/// integral of the conditional quantile over (0, 1) (QuantileIntegral).
/// Counting margins: sum over y >= 0 of P(Y > y | x, v), truncated once
/// G(y) >= 1 - 1e-10.
inline double cond_mean(const ModelSpec& spec, const PointParams& p, double v,
                        MeanMethod method = MeanMethod::Auto) {
  check_latent(v);
  const auto& m = p.margin;
  switch (spec.margin.kind()) {
    case MarginKind::Gaussian: {
      if (method != MeanMethod::QuantileIntegral) return m.loc + m.scale * kappa(spec.copula, p.copula, v);
      auto q = [&](double u) {
        u = std::clamp(u, 1e-15, 1.0 - 1e-15);
        const double w = copula::hinv(spec.copula, p.copula, u, v);
        return norm_quantile(std::clamp(w, std::numeric_limits<double>::min(), 1.0 - 1e-16));
      };
      boost::math::quadrature::tanh_sinh<double> ts;
      return m.loc + m.scale * ts.integrate(q, 0.0, 1.0, 1e-12);
    }
    case MarginKind::Bernoulli:
      return 1.0 - copula::hfunc(spec.copula, p.copula, 1.0 - m.loc, v);
    case MarginKind::Poisson: {
      const double cap = std::ceil(m.loc + 40.0 * std::sqrt(m.loc) + 100.0);
      double sum = 0.0;
      for (double y = 0.0;; y += 1.0) {
        const double g = poisson_cdf(y, m.loc);
        if (g >= 1.0 - 1e-10) return sum;
        if (y > cap) throw numeric_error("cond_mean: Poisson support truncation failed", 1.0 - g);
        sum += 1.0 - copula::hfunc(spec.copula, p.copula, g, v);
      }
    }
  }
  return 0.0;
}

inline double cond_mean(const ModelSpec& spec, const ParamVector& theta, std::span<const double> xm,
                        std::span<const double> xc, double v, MeanMethod method = MeanMethod::Auto) {
  return cond_mean(spec, point_params(spec, theta, xm, xc), v, method);
}

/// logit P(Y = 1 | x, V = v) = log[{1 - h(1 - p(x), v)} / h(1 - p(x), v)] on a
/// grid of scalar covariate values. The scalar feeds the single margin
/// covariate and the single copula covariate when present. Rows follow the
/// x grid, columns follow vs.
inline Eigen::MatrixXd link_curve(const ModelSpec& spec, const ParamVector& theta, std::span<const double> x_grid,
                                  std::span<const double> vs) {
  if (spec.margin.kind() != MarginKind::Bernoulli)
    throw std::invalid_argument("link curves need a bernoulli margin");
  if (spec.margin_covariates.size() > 1 || spec.copula_covariates.size() > 1)
    throw std::invalid_argument("link curves take at most one covariate per link");
  Eigen::MatrixXd out(x_grid.size(), vs.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const std::vector<double> xm(spec.margin_covariates.size(), x_grid[i]);
    const std::vector<double> xc(spec.copula_covariates.size(), x_grid[i]);
    const auto p = point_params(spec, theta, xm, xc);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      check_latent(vs[j]);
      const double h = copula::hfunc(spec.copula, p.copula, 1.0 - p.margin.loc, vs[j]);
      out(i, j) = std::log1p(-h) - std::log(h);
    }
  }
  return out;
}

}  // namespace fcmm
