#pragma once

// Sampling from the factor copula model and the catalog of simulation designs.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcmm/copulas.hpp"
#include "fcmm/margins.hpp"
#include "fcmm/model.hpp"
#include "fcmm/predict.hpp"
#include "fcmm/random.hpp"
#include "fcmm/splines.hpp"

namespace fcmm {

struct ClusterDraw {
  double v = 0.5;
  std::vector<double> u;  // copula-scale draws G(Y) before discretization
  std::vector<double> y;
};

/// Draws one cluster given V = v: W ~ U(0,1), U = h^{-1}(W, v), Y = G^{-1}(U).
/// xm and xc hold covariates without the intercept, one row per observation.
inline ClusterDraw sample_cluster_given(const ModelSpec& spec, const ParamVector& theta, const RowMatrix& xm,
                                        const RowMatrix& xc, double v, Rng& rng) {
  ClusterDraw out;
  out.v = v;
  const Eigen::Index n = xm.rows();
  out.u.resize(n);
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto p = point_params(spec, theta, std::span<const double>(xm.row(i).data(), xm.cols()),
                                std::span<const double>(xc.row(i).data(), xc.cols()));
    const double w = rng.uniform();
    const double u = std::clamp(copula::hinv(spec.copula, p.copula, w, v), std::numeric_limits<double>::min(),
                                1.0 - std::numeric_limits<double>::epsilon() / 2);
    out.u[i] = u;
    out.y[i] = margin::quantile(spec.margin, p.margin, u);
  }
  return out;
}

inline ClusterDraw sample_cluster(const ModelSpec& spec, const ParamVector& theta, const RowMatrix& xm,
                                  const RowMatrix& xc, Rng& rng) {
  const double v = rng.uniform();
  return sample_cluster_given(spec, theta, xm, xc, v, rng);
}

// ---------------------------------------------------------------------------
// Simulation designs.

/// A simulated sample: named covariate columns, responses, cluster ids, the
/// latent value of every cluster and held-out new observations that share
/// their cluster's latent value.
struct SimulatedData {
  std::string design;
  std::vector<std::string> columns;
  RowMatrix x;                 // N x columns
  std::vector<double> y;
  std::vector<int> cluster;    // 1..K
  std::vector<double> latent;  // V_k, k = 0..K-1
  RowMatrix x_new;
  std::vector<double> y_new;
  std::vector<int> cluster_new;
  ModelSpec truth;
  ParamVector theta;
};

/// Extracts named columns.
inline Eigen::MatrixXd select_columns(const RowMatrix& x, const std::vector<std::string>& all,
                                      const std::vector<std::string>& wanted) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(wanted.size()));
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    const auto it = std::find(all.begin(), all.end(), wanted[j]);
    if (it == all.end()) throw std::invalid_argument("unknown column '" + wanted[j] + "'");
    out.col(j) = x.col(it - all.begin());
  }
  return out;
}

inline ClusteredDataset make_dataset(const SimulatedData& s, const ModelSpec& spec) {
  return ClusteredDataset(s.y, select_columns(s.x, s.columns, spec.margin_covariates),
                          select_columns(s.x, s.columns, spec.copula_covariates), s.cluster);
}

struct DesignSetup {
  ModelSpec truth;
  Eigen::VectorXd theta;
  std::vector<std::string> columns;
  std::function<std::vector<double>(Rng&)> covariates;  // one row of all columns
  bool mixed_model = false;  // DGP1/DGP2: eta_k + s(x) + eps with sd_eta = 1, sd_eps = 1.5
};

namespace detail {

inline const SplineBasis& h3_basis() {
  static const SplineBasis b{1, {0.5}};
  return b;
}

inline ParamLayout layout_of(const ModelSpec& s) { return s.layout(); }

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

inline std::vector<std::string> design_names() {
  return {"exp1", "exp2", "exp3", "exp4", "exp5", "exp6", "exp7", "exp8", "dgp1", "dgp2", "dgp3",
          "dgp4", "dgp5", "dgp6", "dgp7", "dgp8", "dgp9", "dgp10", "dgp11", "dgp12"};
}

/// Default cluster size of a design: 5 for the Exp designs, 30 for the DGPs.
inline int default_cluster_size(const std::string& id) { return detail::lower(id).rfind("exp", 0) == 0 ? 5 : 30; }

/// True model, parameters and covariate generator of a named design. DGP9-12
/// draw their coefficients (and the DGP10 sd) from `rng`.
inline DesignSetup design_setup(const std::string& name, Rng& rng) {
  using detail::vec;
  const std::string id = detail::lower(name);
  const auto G = MarginFamily(MarginKind::Gaussian);
  const auto P = MarginFamily(MarginKind::Poisson);
  const auto B = MarginFamily(MarginKind::Bernoulli);
  const auto clayton = CopulaFamily(CopulaKind::Clayton);
  const auto gumbel = CopulaFamily(CopulaKind::Gumbel);
  const auto frank = CopulaFamily(CopulaKind::Frank);
  const auto gaussian = CopulaFamily(CopulaKind::Gaussian);
  DesignSetup d;

  auto uz = [](Rng& r) { return std::vector<double>{r.uniform(), r.exponential()}; };
  auto x_only = [](Rng& r) { return std::vector<double>{r.uniform()}; };
  auto x_spline = [](Rng& r) {
    const double x = r.uniform();
    const auto b = design_row(detail::h3_basis(), x);
    return std::vector<double>{x, b[0], b[1]};
  };

  if (id == "exp1") {
    d.truth = {clayton, G, {}, {}};
    d.theta = vec({10.0, 0.0, 0.0});
    d.columns = {};
    d.covariates = [](Rng&) { return std::vector<double>{}; };
  } else if (id == "exp2") {
    d.truth = {clayton, G, {}, {"u"}};
    d.theta = vec({10.0, 0.0, 1.0, -1.5});
    d.columns = {"u"};
    d.covariates = [](Rng& r) { return std::vector<double>{r.uniform()}; };
  } else if (id == "exp3" || id == "exp4" || id == "exp5") {
    d.columns = {"u", "z"};
    d.covariates = uz;
    if (id == "exp3") {
      d.truth = {gumbel, G, {"z"}, {"u"}};
      d.theta = vec({5.0, 5.0, 0.0, 1.0, -1.5});
    } else {
      d.truth = {clayton, id == "exp4" ? P : B, {"z"}, {"u"}};
      d.theta = vec({2.0, -3.0, 1.0, -1.5});
    }
  } else if (id == "exp6") {
    d.truth = {frank, G, {"z3", "u4"}, {"z1", "u2"}};
    d.theta = vec({5.0, 5.0, 3.0, 0.0, 2.0, 8.0, 3.0});
    d.columns = {"z1", "u2", "z3", "u4"};
    d.covariates = [](Rng& r) {
      const double z1 = r.exponential(), u2 = r.uniform(), z3 = r.exponential(), u4 = r.uniform();
      return std::vector<double>{z1, u2, z3, u4};
    };
  } else if (id == "exp7" || id == "exp8") {
    d.truth = {frank, id == "exp7" ? P : B, {"u3", "u4"}, {"u1", "u2"}};
    d.theta = id == "exp7" ? vec({3.0, -1.0, -0.5, 2.0, 8.0, 3.0}) : vec({1.5, -2.0, -0.5, 2.0, 8.0, 3.0});
    d.columns = {"u1", "u2", "u3", "u4"};
    d.covariates = [](Rng& r) {
      std::vector<double> v(4);
      for (auto& x : v) x = r.uniform();
      return v;
    };
  } else if (id == "dgp1" || id == "dgp3" || id == "dgp5" || id == "dgp7") {
    d.columns = {"x"};
    d.covariates = x_only;
    const double sd = std::sqrt(3.25);
    if (id == "dgp1") {
      d.truth = {gaussian, G, {"x"}, {}};
      d.theta = vec({10.0, 0.5, std::log(sd), std::atanh(1.0 / sd)});
      d.mixed_model = true;
    } else if (id == "dgp3") {
      d.truth = {gumbel, G, {"x"}, {}};
      d.theta = vec({10.0, 0.5, std::log(1.5), 0.0});
    } else if (id == "dgp5") {
      d.truth = {clayton, P, {"x"}, {}};
      d.theta = vec({0.0, 1.5, 0.0});
    } else {
      d.truth = {frank, B, {"x"}, {}};
      d.theta = vec({-1.69, 3.0, 6.0});
    }
  } else if (id == "dgp2" || id == "dgp4" || id == "dgp6" || id == "dgp8") {
    d.columns = {"x", "sp31", "sp32"};
    d.covariates = x_spline;
    const double sd = std::sqrt(3.25);
    const std::vector<std::string> h3{"sp31", "sp32"};
    if (id == "dgp2") {
      d.truth = {gaussian, G, h3, {}};
      d.theta = vec({2.0, 0.5, -1.0, std::log(sd), std::atanh(1.0 / sd)});
      d.mixed_model = true;
    } else if (id == "dgp4") {
      d.truth = {gumbel, G, h3, {}};
      d.theta = vec({2.0, 0.5, -1.0, std::log(1.5), 0.0});
    } else if (id == "dgp6") {
      d.truth = {clayton, P, h3, {}};
      d.theta = vec({2.0, 0.5, -1.0, 0.0});
    } else {
      d.truth = {frank, B, h3, {}};
      d.theta = vec({-2.7, 5.3, 3.3, 6.0});
    }
  } else if (id == "dgp9" || id == "dgp10" || id == "dgp11" || id == "dgp12") {
    std::vector<std::string> xs;
    for (int j = 1; j <= 9; ++j) xs.push_back("x" + std::to_string(j));
    d.columns = xs;
    const bool normal_x = id == "dgp11" || id == "dgp12";
    d.covariates = [normal_x](Rng& r) {
      std::vector<double> v(9);
      for (auto& x : v) x = normal_x ? r.normal() : r.uniform();
      return v;
    };
    const double hi = id == "dgp11" ? 0.5 : (id == "dgp12" ? 0.1 : 1.0);
    Eigen::VectorXd coef(10);
    for (auto& c : coef) c = rng.uniform(0.0, hi);
    CopulaFamily fam = id == "dgp9" ? gaussian : id == "dgp10" ? gumbel : id == "dgp11" ? clayton : frank;
    MarginFamily mar = id == "dgp11" ? P : id == "dgp12" ? B : G;
    d.truth = {fam, mar, xs, {}};
    const double s = copula::predictor_from_param(fam, copula::tau_to_param(fam, 0.5));
    d.theta.resize(mar.has_dispersion() ? 12 : 11);
    d.theta.head(10) = coef;
    if (mar.has_dispersion()) d.theta[10] = id == "dgp10" ? std::log(rng.uniform(3.0, 10.0)) : 0.0;
    d.theta[d.theta.size() - 1] = s;
  } else {
    throw std::invalid_argument("unknown design '" + name + "'");
  }
  return d;
}

/// Simulates K clusters of n observations plus `n_new` held-out observations
/// (the j-th assigned to cluster j mod K). Deterministic in `seed`.
inline SimulatedData simulate_design(const std::string& name, int K, int n, std::uint64_t seed, int n_new = 0) {
  if (K < 1 || n < 1) throw std::invalid_argument("simulate: K and n must be positive");
  Rng rng(seed);
  auto d = design_setup(name, rng);
  SimulatedData s;
  s.design = detail::lower(name);
  s.truth = d.truth;
  s.theta = ParamVector(d.truth.layout(), d.theta);
  s.columns = d.columns;
  const auto p = static_cast<Eigen::Index>(d.columns.size());
  const auto mcols = d.truth.margin_covariates, ccols = d.truth.copula_covariates;

  auto draw_rows = [&](int count, RowMatrix& x) {
    x.resize(count, p);
    for (int i = 0; i < count; ++i) {
      const auto row = d.covariates(rng);
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = row[j];
    }
  };
  auto responses = [&](const RowMatrix& x, double v) {
    if (d.mixed_model) {
      // eta_k + mean(x) + eps, eta_k = Phi^{-1}(v) with sd 1, eps sd 1.5
      const Eigen::MatrixXd xm = select_columns(x, s.columns, mcols);
      std::vector<double> y(x.rows());
      const double eta = norm_quantile(v);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mean = d.theta[0];
        for (Eigen::Index j = 0; j < xm.cols(); ++j) mean += d.theta[j + 1] * xm(i, j);
        y[i] = eta + mean + 1.5 * rng.normal();
      }
      return y;
    }
    const RowMatrix xm = select_columns(x, s.columns, mcols);
    const RowMatrix xc = select_columns(x, s.columns, ccols);
    return sample_cluster_given(s.truth, s.theta, xm, xc, v, rng).y;
  };

  s.latent.resize(K);
  s.x.resize(static_cast<Eigen::Index>(K) * n, p);
  for (int k = 0; k < K; ++k) {
    const double v = rng.uniform();
    s.latent[k] = v;
    RowMatrix xk;
    draw_rows(n, xk);
    const auto yk = responses(xk, v);
    s.x.middleRows(static_cast<Eigen::Index>(k) * n, n) = xk;
    for (int i = 0; i < n; ++i) {
      s.y.push_back(yk[i]);
      s.cluster.push_back(k + 1);
    }
  }
  if (n_new > 0) {
    draw_rows(n_new, s.x_new);
    s.y_new.resize(n_new);
    s.cluster_new.resize(n_new);
    for (int j = 0; j < n_new; ++j) {
      const int k = j % K;
      s.cluster_new[j] = k + 1;
      const RowMatrix row = s.x_new.row(j);
      s.y_new[j] = responses(row, s.latent[k])[0];
    }
  }
  return s;
}

}  // namespace fcmm
