#pragma once

// Cluster likelihood f_k(y_k) = int_0^1 prod_i f_ki(y_ki, v) dv by quadrature
// over the latent factor, its log-sum-exp evaluation and the exact score.
//
// Each observation density depends on theta only through three scalars: the
// margin linear predictor, the margin log-sd and the copula linear predictor.
// Those are carried as a Dual<3>; the chain rule through the linear links is
// applied once per observation after the quadrature weights are known:
//
//   d log f_k / d theta = sum_i sum_q pi_kq * d log f_ki(v_q) / d theta,
//   pi_kq = w_q prod_i f_ki(v_q) / f_k,
//
// which is the sum over i of int {prod_{j != i} f_kj} f'_ki dv / f_k.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fcmm/copulas.hpp"
#include "fcmm/dual.hpp"
#include "fcmm/margins.hpp"
#include "fcmm/model.hpp"
#include "fcmm/parallel.hpp"
#include "fcmm/quadrature.hpp"

namespace fcmm {

using Grad3 = Dual<3>;
inline constexpr std::size_t kMarginSlot = 0;
inline constexpr std::size_t kDispersionSlot = 1;
inline constexpr std::size_t kCopulaSlot = 2;

/// Default latent rule with q nodes. For the elliptical families the cluster
/// integrand is smooth in Phi^{-1}(v) but has power-law behaviour at the ends
/// of (0, 1), so those use the Phi-mapped Hermite rule; the Archimedean
/// families keep their tail dependence in v itself and use Gauss-Legendre.
inline QuadratureRule latent_rule(const CopulaFamily& fam, int q) {
  const bool elliptical = fam.kind() == CopulaKind::Gaussian || fam.kind() == CopulaKind::Student;
  return elliptical ? gauss_hermite_unit(q) : gauss_legendre_unit(q);
}

namespace detail {

/// Node-independent pieces of one observation's density.
template <class T>
struct ObsTerms {
  T log_mass;          // log g(y) or log pmf(y)
  T param;             // copula parameter at this observation
  copula::PreparedU<T> hi;     // G(y)
  copula::PreparedU<T> lo;     // G(y-), discrete only
  bool lo_zero = false;
  bool hi_one = false;
  bool lo_one = false;  // far right tail: G(y-) already rounds to one
};

template <class T>
ObsTerms<T> prepare_obs(const ModelSpec& spec, const T& eta, const T& log_sd, const T& s,
                        double y) {
  const auto ev = margin::evaluate(spec.margin, eta, log_sd, y);
  ObsTerms<T> o;
  o.log_mass = ev.log_mass;
  o.param = copula::param_from_predictor(spec.copula, s);
  copula::check_param(spec.copula, value(o.param));
  o.hi_one = value(ev.u_hi) >= 1.0;
  o.lo_zero = value(ev.u_lo) <= 0.0;
  o.lo_one = value(ev.u_lo) >= 1.0;
  o.hi = copula::prepare_u(spec.copula, ev.u_hi);
  if (spec.margin.discrete()) o.lo = copula::prepare_u(spec.copula, ev.u_lo);
  return o;
}

/// log f(y, v) at one latent node.
template <class T>
T log_obs_density(const ModelSpec& spec, const ObsTerms<T>& o, const copula::LatentNode& node) {
  using std::log;
  if (!spec.margin.discrete()) return o.log_mass + copula::log_density(spec.copula, o.param, o.hi, node);
  const T h_hi = o.hi_one ? T(1.0) : copula::hfunc(spec.copula, o.param, o.hi, node);
  if (o.lo_one) return T(-std::numeric_limits<double>::infinity());
  const T h_lo = o.lo_zero ? T(0.0) : copula::hfunc(spec.copula, o.param, o.lo, node);
  const T diff = h_hi - h_lo;
  if (!(value(diff) > 0.0)) return T(-std::numeric_limits<double>::infinity());
  return log(diff);
}


}  // namespace detail

/// Result of evaluating one cluster.
struct ClusterEval {
  double loglik = 0.0;
  bool underflow = false;   // every node underflowed; loglik is -inf
  Eigen::VectorXd score;    // empty unless requested
};

/// Result of evaluating the total log-likelihood.
struct LoglikEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::optional<std::size_t> failed_cluster;  // first cluster with -inf / NaN
  bool nan = false;
};

/// Log-likelihood of a factor copula model on a fixed dataset and rule.
///
/// Evaluation is a map over clusters followed by a sum in cluster order
/// 0..K-1; per-cluster results are written to separate slots, so the total is
/// bit-identical for any thread count.
class Likelihood {
 public:
  Likelihood(ModelSpec spec, const ClusteredDataset& data, QuadratureRule rule, int threads = 1)
      : spec_(std::move(spec)), data_(&data), rule_(std::move(rule)), threads_(threads) {
    check_compatible(spec_, data);
    nodes_.reserve(rule_.size());
    for (double v : rule_.nodes) nodes_.push_back(copula::prepare_v(spec_.copula, v));
    log_weights_.reserve(rule_.size());
    for (double w : rule_.weights) log_weights_.push_back(std::log(w));
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const ClusteredDataset& data() const noexcept { return *data_; }
  const QuadratureRule& rule() const noexcept { return rule_; }
  std::size_t dim() const noexcept { return spec_.layout().size(); }
  void set_threads(int t) noexcept { threads_ = t; }

  ClusterEval cluster(const Eigen::VectorXd& theta, std::size_t k, bool with_score) const {
    const auto& d = *data_;
    const auto l = spec_.layout();
    const std::size_t b = d.begin(k);
    const std::size_t n = d.cluster_size(k);
    const std::size_t q_count = nodes_.size();
    ClusterEval out;
    if (with_score) out.score = Eigen::VectorXd::Zero(l.size());

    auto predictors = [&](std::size_t r) {
      const double eta = d.x_margin().row(r).dot(theta.head(l.margin_coefs));
      const double ls = l.dispersion ? std::max(theta[l.dispersion_index()], margin::kLogSdFloor) : 0.0;
      const double s = d.x_copula().row(r).dot(theta.segment(l.copula_offset(), l.copula_coefs));
      return std::array<double, 3>{eta, ls, s};
    };
    auto chain_into = [&](std::size_t r, double g_eta, double g_ls, double g_s) {
      out.score.head(l.margin_coefs) += g_eta * d.x_margin().row(r).transpose();
      if (l.dispersion) out.score[l.dispersion_index()] += g_ls;
      out.score.segment(l.copula_offset(), l.copula_coefs) += g_s * d.x_copula().row(r).transpose();
    };

    // A single observation integrates the copula out exactly.
    if (n == 1) {
      const auto p = predictors(b);
      const double y = d.y()[b];
      try {
        if (with_score) {
          const auto ev = margin::evaluate(spec_.margin, Grad3::variable(p[0], kMarginSlot),
                                           Grad3::variable(p[1], kDispersionSlot), y);
          out.loglik = ev.log_mass.v;
          chain_into(b, ev.log_mass.d[0], ev.log_mass.d[1], 0.0);
        } else {
          out.loglik = margin::evaluate(spec_.margin, p[0], p[1], y).log_mass;
        }
        copula::check_param(spec_.copula, copula::param_from_predictor(spec_.copula, p[2]));
      } catch (const std::domain_error& e) {
        throw std::domain_error(context(b, k) + ": " + e.what());
      }
      out.underflow = !std::isfinite(out.loglik);
      return out;
    }

    std::vector<double> profile(q_count, 0.0);
    std::vector<std::array<double, 3>> deriv;
    if (with_score) deriv.assign(n * q_count, {0.0, 0.0, 0.0});

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = b + i;
      const auto p = predictors(r);
      try {
        if (with_score) {
          const auto o = detail::prepare_obs(spec_, Grad3::variable(p[0], kMarginSlot),
                                             Grad3::variable(p[1], kDispersionSlot),
                                             Grad3::variable(p[2], kCopulaSlot), d.y()[r]);
          for (std::size_t q = 0; q < q_count; ++q) {
            const Grad3 lf = detail::log_obs_density(spec_, o, nodes_[q]);
            profile[q] += lf.v;
            deriv[i * q_count + q] = lf.d;
          }
        } else {
          const auto o = detail::prepare_obs(spec_, p[0], p[1], p[2], d.y()[r]);
          for (std::size_t q = 0; q < q_count; ++q)
            profile[q] += detail::log_obs_density(spec_, o, nodes_[q]);
        }
      } catch (const std::domain_error& e) {
        throw std::domain_error(context(r, k) + ": " + e.what());
      }
    }

    // log-sum-exp over nodes: subtract the cluster's largest log-integrand
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < q_count; ++q) m = std::max(m, profile[q] + log_weights_[q]);
    if (!std::isfinite(m)) {
      out.loglik = std::isnan(m) ? m : -std::numeric_limits<double>::infinity();
      out.underflow = true;
      return out;
    }
    std::vector<double> post(q_count);
    double total = 0.0;
    for (std::size_t q = 0; q < q_count; ++q) {
      post[q] = std::exp(profile[q] + log_weights_[q] - m);
      total += post[q];
    }
    out.loglik = m + std::log(total);
    if (!with_score) return out;

    for (std::size_t q = 0; q < q_count; ++q) post[q] /= total;
    for (std::size_t i = 0; i < n; ++i) {
      double g[3] = {0.0, 0.0, 0.0};
      for (std::size_t q = 0; q < q_count; ++q) {
        if (post[q] == 0.0) continue;
        const auto& dd = deriv[i * q_count + q];
        g[0] += post[q] * dd[0];
        g[1] += post[q] * dd[1];
        g[2] += post[q] * dd[2];
      }
      chain_into(b + i, g[0], g[1], g[2]);
    }
    return out;
  }

  LoglikEval evaluate(const Eigen::VectorXd& theta, bool with_gradient) const {
    check_theta(theta);
    const std::size_t k_count = data_->clusters();
    std::vector<ClusterEval> parts(k_count);
    parallel_for(k_count, threads_, [&](std::size_t k) { parts[k] = cluster(theta, k, with_gradient); });
    LoglikEval out;
    if (with_gradient) out.gradient = Eigen::VectorXd::Zero(dim());
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& c = parts[k];
      out.value += c.loglik;
      if (!std::isfinite(c.loglik) && !out.failed_cluster) out.failed_cluster = k;
      if (with_gradient && std::isfinite(c.loglik)) out.gradient += c.score;
    }
    out.nan = std::isnan(out.value) || (with_gradient && !out.gradient.allFinite() && !out.failed_cluster);
    return out;
  }

  double value(const Eigen::VectorXd& theta) const { return evaluate(theta, false).value; }

  Eigen::VectorXd score(const Eigen::VectorXd& theta) const { return evaluate(theta, true).gradient; }

  /// K x dim matrix whose k-th row is d log f_k / d theta.
  Eigen::MatrixXd per_cluster_scores(const Eigen::VectorXd& theta) const {
    check_theta(theta);
    const std::size_t k_count = data_->clusters();
    Eigen::MatrixXd out(k_count, dim());
    parallel_for(k_count, threads_, [&](std::size_t k) { out.row(k) = cluster(theta, k, true).score.transpose(); });
    return out;
  }

  /// Central finite-difference score, step 1e-6 * (1 + |theta_j|).
  Eigen::VectorXd score_fd(const Eigen::VectorXd& theta, double rel_step = 1e-6) const {
    Eigen::VectorXd g(dim());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double h = rel_step * (1.0 + std::abs(theta[j]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      g[j] = (value(tp) - value(tm)) / (2.0 * h);
    }
    return g;
  }

  /// sum_i log f_ki(y_ki, v) at arbitrary latent values v.
  std::vector<double> log_profile(const Eigen::VectorXd& theta, std::size_t k,
                                  std::span<const double> v) const {
    const auto& d = *data_;
    const auto l = spec_.layout();
    std::vector<copula::LatentNode> pts;
    pts.reserve(v.size());
    for (double x : v) pts.push_back(copula::prepare_v(spec_.copula, x));
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t r = d.begin(k); r < d.end(k); ++r) {
      const double eta = d.x_margin().row(r).dot(theta.head(l.margin_coefs));
      const double ls = l.dispersion ? std::max(theta[l.dispersion_index()], margin::kLogSdFloor) : 0.0;
      const double s = d.x_copula().row(r).dot(theta.segment(l.copula_offset(), l.copula_coefs));
      const auto o = detail::prepare_obs(spec_, eta, ls, s, d.y()[r]);
      for (std::size_t q = 0; q < pts.size(); ++q) out[q] += detail::log_obs_density(spec_, o, pts[q]);
    }
    return out;
  }

 private:
  void check_theta(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim())
      throw std::invalid_argument("theta has the wrong length for model " + spec_.label());
  }

  std::string context(std::size_t row, std::size_t k) const {
    std::ostringstream os;
    os << "observation " << data_->original_row()[row] << " (cluster '"
       << data_->cluster_labels()[k] << "')";
    return os.str();
  }

  ModelSpec spec_;
  const ClusteredDataset* data_;
  QuadratureRule rule_;
  int threads_;
  std::vector<copula::LatentNode> nodes_;
  std::vector<double> log_weights_;
};

// ---------------------------------------------------------------------------
// Free-function forms.

/// f(y, v) for one observation with margin covariates xm and copula
/// covariates xc (both without the intercept).
inline double obs_density(const ModelSpec& spec, const ParamVector& theta, double y,
                          std::span<const double> xm, std::span<const double> xc, double v) {
  if (!(v > 0.0 && v < 1.0)) throw std::domain_error("obs_density: v must be inside (0, 1)");
  margin::check_support(spec.margin, y);
  const auto l = theta.layout;
  if (xm.size() + 1 != l.margin_coefs || xc.size() + 1 != l.copula_coefs)
    throw std::invalid_argument("obs_density: covariate length mismatch");
  double eta = theta.values[0];
  for (std::size_t j = 0; j < xm.size(); ++j) eta += theta.values[j + 1] * xm[j];
  const double ls = l.dispersion ? theta.values[l.dispersion_index()] : 0.0;
  double s = theta.values[l.copula_offset()];
  for (std::size_t j = 0; j < xc.size(); ++j) s += theta.values[l.copula_offset() + j + 1] * xc[j];
  const auto o = detail::prepare_obs(spec, eta, ls, s, y);
  return std::exp(detail::log_obs_density(spec, o, copula::prepare_v(spec.copula, v)));
}

inline double cluster_loglik(const ModelSpec& spec, const ParamVector& theta,
                             const ClusteredDataset& data, std::size_t k, const QuadratureRule& rule) {
  return Likelihood(spec, data, rule).cluster(theta.values, k, false).loglik;
}

inline double total_loglik(const ModelSpec& spec, const ParamVector& theta,
                           const ClusteredDataset& data, const QuadratureRule& rule, int threads = 1) {
  return Likelihood(spec, data, rule, threads).value(theta.values);
}

inline Eigen::VectorXd score(const ModelSpec& spec, const ParamVector& theta,
                             const ClusteredDataset& data, const QuadratureRule& rule, int threads = 1) {
  return Likelihood(spec, data, rule, threads).score(theta.values);
}

inline Eigen::MatrixXd per_cluster_scores(const ModelSpec& spec, const ParamVector& theta,
                                          const ClusteredDataset& data, const QuadratureRule& rule,
                                          int threads = 1) {
  return Likelihood(spec, data, rule, threads).per_cluster_scores(theta.values);
}

}  // namespace fcmm
