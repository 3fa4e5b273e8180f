#include <gtest/gtest.h>

#include <numeric>

#include "fcmm/fcmm.hpp"
#include "oracles.hpp"

using namespace fcmm;

namespace {

const std::vector<std::string> kCopulas{"clayton", "frank", "gumbel", "gaussian", "student"};

ModelSpec make_spec(const std::string& c, const std::string& m) {
  ModelSpec s;
  s.copula = CopulaFamily::from_name(c);
  s.margin = MarginFamily::from_name(m);
  return s;
}

// Textbook recursive Cox-de Boor, with 0/0 = 0 and the right end point
// folded into the last span.
double cox_de_boor(const std::vector<double>& t, int j, int d, double x) {
  if (d == 0) {
    if (x == t.back()) return (t[j] < t[j + 1] && t[j + 1] == t.back()) ? 1.0 : 0.0;
    return t[j] <= x && x < t[j + 1] ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (t[j + d] > t[j]) a = (x - t[j]) / (t[j + d] - t[j]) * cox_de_boor(t, j, d - 1, x);
  if (t[j + d + 1] > t[j + 1]) b = (t[j + d + 1] - x) / (t[j + d + 1] - t[j + 1]) * cox_de_boor(t, j + 1, d - 1, x);
  return a + b;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = a.size();
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

ParamVector at_tau(const ModelSpec& spec, double tau) {
  const auto l = spec.layout();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(l.size());
  v[l.copula_offset()] = copula::predictor_from_param(spec.copula, copula::tau_to_param(spec.copula, tau));
  return ParamVector(l, v);
}

}  // namespace

TEST(Splines, PartitionOfUnity) {
  const std::vector<SplineBasis> bases{{1, {0.5}}, {2, {0.33, 0.67}}, {3, {0.25, 0.5, 0.75}}};
  for (const auto& b : bases)
    for (double x : {0.0, 0.1, 0.33, 0.37, 0.5, 0.8, 1.0}) {
      const auto n = bspline_basis(b, x);
      EXPECT_EQ(n.size(), b.dimension());
      double s = 0.0;
      for (double v : n) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Splines, LinearEndpointAndDesignRow) {
  const SplineBasis b{1, {0.5}};
  const auto n = bspline_basis(b, 0.0);
  EXPECT_EQ(n, (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(design_row(b, 0.0), (std::vector<double>{0.0, 0.0}));
  const auto mid = design_row(b, 0.5);
  EXPECT_DOUBLE_EQ(mid[0], 1.0);
  EXPECT_DOUBLE_EQ(mid[1], 0.0);
  EXPECT_THROW(bspline_basis(b, 1.2), std::domain_error);
  EXPECT_THROW(bspline_basis(b, -0.01), std::domain_error);
}

TEST(Splines, QuadraticMatchesRecursiveDefinition) {
  const SplineBasis b{2, {0.33, 0.67}};
  const auto t = b.knots();
  for (double x : {0.0, 0.2, 0.5, 0.66, 0.9, 1.0}) {
    const auto n = bspline_basis(b, x);
    for (std::size_t j = 0; j < n.size(); ++j) EXPECT_NEAR(n[j], cox_de_boor(t, int(j), 2, x), 1e-14) << x << " " << j;
  }
  // x = 0.5 by hand: only the three functions supported on [0.33, 0.67) are nonzero
  const auto n = bspline_basis(b, 0.5);
  const double a = (0.5 - 0.33) / (0.67 - 0.33);
  EXPECT_NEAR(n[0], 0.0, 1e-15);
  EXPECT_NEAR(n[1], (0.67 - 0.5) / 0.67 * (1 - a), 1e-14);
  EXPECT_NEAR(n[3], (0.5 - 0.33) / (1.0 - 0.33) * a, 1e-14);
  EXPECT_NEAR(n[4], 0.0, 1e-15);
}

TEST(Splines, PiecewiseLinearLinkIsContinuousAtKnot) {
  // 2 + 0.5 B1 - B2 reproduces (2 + x) below the knot and (4 - 3x) above
  Rng rng(0);
  const auto setup = design_setup("dgp2", rng);
  const SplineBasis b{1, {0.5}};
  auto s2 = [&](double x) {
    const auto r = design_row(b, x);
    return setup.theta[0] + setup.theta[1] * r[0] + setup.theta[2] * r[1];
  };
  EXPECT_NEAR(s2(0.5), 2.5, 1e-14);
  EXPECT_NEAR(2.0 + 0.5, 4.0 - 3.0 * 0.5, 1e-15);
  for (double x = 0.0; x <= 1.0; x += 0.05) EXPECT_NEAR(s2(x), x < 0.5 ? 2.0 + x : 4.0 - 3.0 * x, 1e-12) << x;
}

TEST(Designs, SeedDeterminism) {
  for (const auto& d : design_names()) {
    const auto a = simulate_design(d, 6, 3, 42, 4);
    const auto b = simulate_design(d, 6, 3, 42, 4);
    EXPECT_EQ(a.y, b.y) << d;
    EXPECT_EQ(a.y_new, b.y_new) << d;
    EXPECT_TRUE(a.x == b.x) << d;
    EXPECT_EQ(a.latent, b.latent) << d;
    const auto c = simulate_design(d, 6, 3, 43, 4);
    EXPECT_NE(a.y, c.y) << d;
    // the true parameter vector fits the truth model
    EXPECT_EQ(a.theta.layout, a.truth.layout()) << d;
    EXPECT_NO_THROW(make_dataset(a, a.truth)) << d;
  }
  EXPECT_THROW(simulate_design("exp9", 5, 5, 1), std::invalid_argument);
  EXPECT_THROW(simulate_design("exp1", 0, 5, 1), std::invalid_argument);
  EXPECT_EQ(stream_seed(7, 0), stream_seed(7, 0));
  EXPECT_NE(stream_seed(7, 0), stream_seed(7, 1));
  EXPECT_NE(stream_seed(7, 0), stream_seed(8, 0));
}

TEST(Designs, NewObservationsShareClusterLatent) {
  const auto s = simulate_design("exp2", 7, 5, 3, 20);
  ASSERT_EQ(s.y_new.size(), 20u);
  for (int j = 0; j < 20; ++j) EXPECT_EQ(s.cluster_new[j], j % 7 + 1);
  EXPECT_EQ(s.x_new.rows(), 20);
  EXPECT_EQ(s.cluster.front(), 1);
  EXPECT_EQ(s.cluster.back(), 7);
}

TEST(Designs, Exp1MarginIsStandardNormalAroundTen) {
  // one observation per cluster gives independent draws
  const auto s = simulate_design("exp1", 5000, 1, 9);
  EXPECT_GT(oracle::ks_pvalue(s.y, [](double y) { return oracle::phi_cdf(y - 10.0); }), 0.01);
  const double mean = std::accumulate(s.y.begin(), s.y.end(), 0.0) / s.y.size();
  EXPECT_NEAR(mean, 10.0, 3.0 / std::sqrt(5000.0));
}

TEST(Designs, Dgp1WithinClusterCorrelation) {
  const auto s = simulate_design("dgp1", 6000, 2, 10);
  std::vector<double> a, b;
  for (std::size_t k = 0; k < 6000; ++k) {
    // remove the known covariate effect
    a.push_back(s.y[2 * k] - 0.5 * s.x(2 * k, 0));
    b.push_back(s.y[2 * k + 1] - 0.5 * s.x(2 * k + 1, 0));
  }
  EXPECT_NEAR(pearson(a, b), 1.0 / 3.25, 0.04);
}

TEST(Designs, Dgp1MixedFormMatchesCopulaForm) {
  const auto mixed = simulate_design("dgp1", 3000, 3, 12);
  Rng rng(13);
  std::vector<double> first_mixed, first_cop, pair_mixed_a, pair_mixed_b, pair_cop_a, pair_cop_b;
  for (int k = 0; k < 3000; ++k) {
    RowMatrix xm(3, 1), xc(3, 0);
    for (int i = 0; i < 3; ++i) xm(i, 0) = rng.uniform();
    const auto d = sample_cluster(mixed.truth, mixed.theta, xm, xc, rng);
    first_cop.push_back(d.y[0] - 0.5 * xm(0, 0));
    pair_cop_a.push_back(d.y[1] - 0.5 * xm(1, 0));
    pair_cop_b.push_back(d.y[2] - 0.5 * xm(2, 0));
    first_mixed.push_back(mixed.y[3 * k] - 0.5 * mixed.x(3 * k, 0));
    pair_mixed_a.push_back(mixed.y[3 * k + 1] - 0.5 * mixed.x(3 * k + 1, 0));
    pair_mixed_b.push_back(mixed.y[3 * k + 2] - 0.5 * mixed.x(3 * k + 2, 0));
  }
  EXPECT_GT(oracle::ks2_pvalue(first_mixed, first_cop), 0.01);
  EXPECT_NEAR(pearson(pair_mixed_a, pair_mixed_b), pearson(pair_cop_a, pair_cop_b), 0.08);
}

TEST(Sampler, PooledUniformAndConditionalLaw) {
  for (const auto& c : kCopulas) {
    const auto spec = make_spec(c, "gaussian");
    auto th = at_tau(spec, 0.5);
    Rng rng(100);
    const RowMatrix xm(1, 0), xc(1, 0);
    std::vector<double> pooled, given;
    for (int i = 0; i < 10000; ++i) pooled.push_back(sample_cluster(spec, th, xm, xc, rng).u[0]);
    for (int i = 0; i < 10000; ++i) given.push_back(sample_cluster_given(spec, th, xm, xc, 0.3, rng).u[0]);
    EXPECT_GT(oracle::ks_pvalue(pooled, [](double u) { return u; }), 0.01) << c;
    const double par = copula::param_from_predictor(spec.copula, th.values[2]);
    EXPECT_GT(oracle::ks_pvalue(given, [&](double u) { return copula::hfunc(spec.copula, par, u, 0.3); }), 0.01) << c;
  }
}

TEST(Sampler, IndependenceGivesMarginalLaw) {
  const auto spec = make_spec("frank", "gaussian");
  const ParamVector th(spec.layout(), Eigen::Vector3d(1.0, std::log(2.0), 0.0));
  Rng rng(5);
  std::vector<double> y;
  const RowMatrix xm(4, 0), xc(4, 0);
  for (int i = 0; i < 2500; ++i)
    for (double v : sample_cluster(spec, th, xm, xc, rng).y) y.push_back(v);
  EXPECT_GT(oracle::ks_pvalue(y, [](double v) { return oracle::phi_cdf((v - 1.0) / 2.0); }), 0.01);
}

TEST(Sampler, ClustersAreExchangeable) {
  const auto spec = make_spec("clayton", "gaussian");
  const auto th = at_tau(spec, 0.5);
  Rng rng(6);
  const RowMatrix xm(3, 0), xc(3, 0);
  std::vector<double> a, b, c;
  for (int i = 0; i < 8000; ++i) {
    const auto d = sample_cluster(spec, th, xm, xc, rng);
    a.push_back(d.y[0]);
    b.push_back(d.y[1]);
    c.push_back(d.y[2]);
  }
  EXPECT_NEAR(pearson(a, b), pearson(b, c), 0.05);
  EXPECT_NEAR(pearson(a, c), pearson(b, c), 0.05);
  EXPECT_GT(oracle::ks2_pvalue(a, c), 0.01);
}

TEST(Sampler, CountingMarginsUseLeftInverse) {
  const auto spec = make_spec("clayton", "poisson");
  const ParamVector th(spec.layout(), Eigen::Vector2d(std::log(2.0), 0.0));
  Rng rng(8);
  const RowMatrix xm(1, 0), xc(1, 0);
  for (int i = 0; i < 200; ++i) {
    const auto d = sample_cluster(spec, th, xm, xc, rng);
    const MarginParam p{2.0, 0};
    EXPECT_GE(margin::cdf(spec.margin, p, d.y[0]), d.u[0]);
    if (d.y[0] > 0) EXPECT_LT(margin::cdf(spec.margin, p, d.y[0] - 1), d.u[0]);
  }
}

TEST(Harness, RmseAndTopFive) {
  const std::vector<double> t{1, 9, 3, 7, 5, 10, 2}, p{1, 8, 3, 7, 4, 10, 2};
  EXPECT_EQ(rmse(t, t), 0.0);
  EXPECT_NEAR(rmse(t, p), std::sqrt(2.0 / 7.0), 1e-15);
  // five largest targets: 10, 9, 7, 5, 3
  EXPECT_NEAR(rmse(t, p, 5), std::sqrt(2.0 / 5.0), 1e-15);
  EXPECT_THROW(rmse({}, {}), std::invalid_argument);
}

TEST(Harness, DeterministicAcrossThreads) {
  HarnessConfig cfg;
  cfg.design = "exp1";
  cfg.K = 12;
  cfg.replications = 4;
  cfg.seed = 77;
  cfg.prediction = true;
  cfg.new_obs = 30;
  cfg.candidates = {"clayton", "gumbel", kIndependence};
  const auto a = run_harness(cfg);
  cfg.threads = 3;
  const auto b = run_harness(cfg);
  ASSERT_EQ(a.replications.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(a.replications[r].chosen, b.replications[r].chosen);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a.replications[r].candidates[i].rmse, b.replications[r].candidates[i].rmse);
      EXPECT_EQ(a.replications[r].candidates[i].theta, b.replications[r].candidates[i].theta);
    }
  }
  EXPECT_EQ(a.param_rmse, b.param_rmse);
  double total = 0.0;
  for (double s : a.selection_pct) total += s;
  EXPECT_NEAR(total, 100.0, 1e-9);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_GE(a.mean_rmse95[i], 0.0);
}

TEST(Harness, RejectsBadConfig) {
  HarnessConfig cfg;
  cfg.replications = 0;
  EXPECT_THROW(run_harness(cfg), std::invalid_argument);
  cfg.replications = 1;
  cfg.candidates = {"joe"};
  EXPECT_THROW(run_harness(cfg), std::invalid_argument);
  cfg.candidates = {};
  cfg.start = "random";
  EXPECT_THROW(run_harness(cfg), std::invalid_argument);
}
