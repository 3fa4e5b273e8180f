#include <gtest/gtest.h>

#include "fcmm/fcmm.hpp"
#include "oracles.hpp"

using namespace fcmm;

namespace {
const MarginFamily G(MarginKind::Gaussian);
const MarginFamily P(MarginKind::Poisson);
const MarginFamily B(MarginKind::Bernoulli);
}  // namespace

TEST(MarginFamily, MeasureAndNames) {
  EXPECT_EQ(G.measure(), ReferenceMeasure::Lebesgue);
  EXPECT_EQ(P.measure(), ReferenceMeasure::Counting);
  EXPECT_EQ(B.measure(), ReferenceMeasure::Counting);
  EXPECT_TRUE(G.has_dispersion());
  EXPECT_FALSE(P.has_dispersion());
  for (auto n : {"gaussian", "poisson", "bernoulli"}) EXPECT_EQ(MarginFamily::from_name(n).name(), n);
  EXPECT_THROW(MarginFamily::from_name("gamma"), std::invalid_argument);
}

TEST(MarginLink, ParamAt) {
  auto g = margin::param_at(G, {{10.0}, std::log(1.0)}, {});
  EXPECT_DOUBLE_EQ(g.loc, 10.0);
  EXPECT_DOUBLE_EQ(g.scale, 1.0);
  const std::vector<double> z{0.4};
  EXPECT_NEAR(margin::param_at(P, {{2.0, -3.0}, std::nullopt}, z).loc, std::exp(2.0 - 3.0 * 0.4), 1e-14);
  EXPECT_DOUBLE_EQ(margin::param_at(B, {{0.0}, std::nullopt}, {}).loc, 0.5);
  EXPECT_THROW(margin::param_at(P, {{2.0}, std::nullopt}, z), std::invalid_argument);
  EXPECT_THROW(margin::param_at(G, {{2.0}, std::nullopt}, {}), std::invalid_argument);
  EXPECT_THROW(margin::param_at(P, {{2.0}, 0.0}, {}), std::invalid_argument);
}

TEST(MarginCdf, Examples) {
  EXPECT_DOUBLE_EQ(margin::cdf(G, {10.0, 1.0}, 10.0), 0.5);
  EXPECT_NEAR(margin::cdf(B, {0.3, 0}, 0.0), 0.7, 1e-15);
  EXPECT_EQ(margin::cdf_left(B, {0.3, 0}, 0.0), 0.0);
  double s = 0.0;
  for (int k = 0; k <= 3; ++k) s += std::exp(-2.0) * std::pow(2.0, k) / std::tgamma(k + 1.0);
  EXPECT_NEAR(margin::cdf(P, {2.0, 0}, 3.0), s, 1e-14);
  EXPECT_NEAR(margin::cdf(P, {2.0, 0}, 3.0), 0.857123, 5e-7);
  EXPECT_NEAR(margin::cdf_left(P, {2.0, 0}, 3.0), margin::cdf(P, {2.0, 0}, 2.0), 1e-15);
  EXPECT_EQ(margin::cdf_left(P, {2.0, 0}, 0.0), 0.0);
  EXPECT_EQ(margin::cdf_left(G, {0.0, 2.0}, 0.3), margin::cdf(G, {0.0, 2.0}, 0.3));
  EXPECT_THROW(margin::cdf(G, {0.0, 0.0}, 1.0), std::domain_error);
  EXPECT_THROW(margin::cdf(P, {-1.0, 0}, 1.0), std::domain_error);
  EXPECT_THROW(margin::cdf(B, {1.0, 0}, 1.0), std::domain_error);
}

TEST(MarginPdf, Examples) {
  EXPECT_NEAR(margin::pdf_or_pmf(G, {0.0, 1.0}, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_DOUBLE_EQ(margin::pdf_or_pmf(B, {0.3, 0}, 1.0), 0.3);
  EXPECT_NEAR(margin::pdf_or_pmf(P, {1.0, 0}, 0.0), std::exp(-1.0), 1e-15);
  for (int k = 0; k < 30; ++k)
    EXPECT_NEAR(margin::pdf_or_pmf(P, {6.5, 0}, k), oracle::poisson_pmf(k, 6.5), 1e-14);
  EXPECT_EQ(margin::pdf_or_pmf(P, {2.0, 0}, 1.5), 0.0);
}

TEST(MarginPdf, MassSumsToOne) {
  for (double rate : {0.01, 0.7, 3.0, 54.6, 400.0}) {
    double s = 0.0;
    for (int y = 0;; ++y) {
      s += margin::pdf_or_pmf(P, {rate, 0}, y);
      if (margin::cdf(P, {rate, 0}, y) >= 1.0 - 1e-12) break;
    }
    EXPECT_GE(s, 1.0 - 1e-12);
    EXPECT_LE(s, 1.0 + 1e-12);
  }
  const auto rule = gauss_legendre_unit(200);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double y = -20.0 + 40.0 * rule.nodes[i];
    s += 40.0 * rule.weights[i] * margin::pdf_or_pmf(G, {1.0, 2.0}, y);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(MarginQuantile, Examples) {
  EXPECT_DOUBLE_EQ(margin::quantile(G, {10.0, 1.0}, 0.5), 10.0);
  EXPECT_EQ(margin::quantile(B, {0.3, 0}, 0.7), 0.0);
  EXPECT_EQ(margin::quantile(B, {0.3, 0}, 0.71), 1.0);
  EXPECT_EQ(margin::quantile(P, {2.0, 0}, 0.857123), 3.0);
  EXPECT_THROW(margin::quantile(G, {0.0, 1.0}, 0.0), std::domain_error);
  EXPECT_THROW(margin::quantile(P, {1.0, 0}, 1.0), std::domain_error);
}

TEST(MarginQuantile, LeftInverse) {
  for (double rate : {0.05, 1.0, 7.3, 54.6, 900.0}) {
    const MarginParam p{rate, 0};
    for (int y = 0; margin::cdf(P, p, y) < 1.0 - 1e-12; ++y) {
      const double u = margin::cdf(P, p, y);
      if (u <= 0.0) continue;
      EXPECT_EQ(margin::quantile(P, p, u), y) << rate;
    }
    for (double u : {1e-9, 0.01, 0.3, 0.5, 0.99, 1.0 - 1e-9}) {
      const double q = margin::quantile(P, p, u);
      EXPECT_GE(margin::cdf(P, p, q), u);
      if (q > 0) EXPECT_LT(margin::cdf(P, p, q - 1), u);
    }
  }
  for (double y : {-3.0, 0.0, 0.4, 2.5, 7.0})
    EXPECT_NEAR(margin::quantile(G, {1.0, 2.0}, margin::cdf(G, {1.0, 2.0}, y)), y, 1e-8);
}

TEST(MarginCdf, MonotoneRightContinuous) {
  for (const auto& [fam, p] : std::vector<std::pair<MarginFamily, MarginParam>>{{P, {3.0, 0}}, {B, {0.4, 0}}, {G, {0, 1}}}) {
    double prev = 0.0;
    for (double y = -2.0; y <= 10.0; y += 0.25) {
      const double c = margin::cdf(fam, p, y);
      EXPECT_GE(c, prev);
      EXPECT_EQ(margin::cdf(fam, p, y + 1e-12 * (fam.discrete() ? 1 : 0)), c);
      prev = c;
    }
  }
}

TEST(MarginEvaluate, MatchesPlainFunctions) {
  // the templated evaluation used by the likelihood agrees with the public API
  for (double y : {0.0, 1.0, 4.0}) {
    const auto e = margin::evaluate(P, 0.7, 0.0, y);
    EXPECT_NEAR(std::exp(e.log_mass), margin::pdf_or_pmf(P, {std::exp(0.7), 0}, y), 1e-14);
    EXPECT_NEAR(e.u_hi, margin::cdf(P, {std::exp(0.7), 0}, y), 1e-14);
    EXPECT_NEAR(e.u_lo, margin::cdf_left(P, {std::exp(0.7), 0}, y), 1e-14);
  }
  for (double y : {0.0, 1.0}) {
    const auto e = margin::evaluate(B, -0.3, 0.0, y);
    const MarginParam p{margin::logistic(-0.3), 0};
    EXPECT_NEAR(std::exp(e.log_mass), margin::pdf_or_pmf(B, p, y), 1e-14);
    EXPECT_NEAR(e.u_hi, margin::cdf(B, p, y), 1e-14);
    EXPECT_NEAR(e.u_lo, margin::cdf_left(B, p, y), 1e-14);
  }
  const auto e = margin::evaluate(G, 1.0, std::log(2.0), 2.2);
  EXPECT_NEAR(std::exp(e.log_mass), margin::pdf_or_pmf(G, {1.0, 2.0}, 2.2), 1e-14);
}

TEST(MarginSupport, Checks) {
  EXPECT_THROW(margin::check_support(P, -1.0), std::domain_error);
  EXPECT_THROW(margin::check_support(P, 1.5), std::domain_error);
  EXPECT_THROW(margin::check_support(B, 2.0), std::domain_error);
  EXPECT_NO_THROW(margin::check_support(G, -4.0));
}
