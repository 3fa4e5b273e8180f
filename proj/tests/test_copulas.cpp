#include <gtest/gtest.h>

#include "fcmm/fcmm.hpp"
#include "oracles.hpp"

using namespace fcmm;

namespace {

struct Case {
  const char* name;
  double param;
};

const std::vector<Case> kCases = {
    {"clayton", 0.7}, {"clayton", 2.0}, {"clayton", 8.0}, {"gumbel", 1.3},   {"gumbel", 2.0},
    {"gumbel", 5.0},  {"frank", -6.0},  {"frank", 1.5},   {"frank", 12.0},   {"gaussian", -0.7},
    {"gaussian", 0.3}, {"gaussian", 0.9}, {"student", -0.5}, {"student", 0.2}, {"student", 0.85},
};

const std::vector<double> kGrid = {0.02, 0.1, 0.27, 0.5, 0.64, 0.9, 0.98};

}  // namespace

TEST(CopulaLink, ParamFromPredictor) {
  EXPECT_DOUBLE_EQ(copula::param_from_predictor(CopulaFamily(CopulaKind::Clayton), 0.0), 2.0);
  EXPECT_DOUBLE_EQ(copula::param_from_predictor(CopulaFamily(CopulaKind::Gaussian), 0.0), 0.0);
  EXPECT_NEAR(copula::param_from_predictor(CopulaFamily(CopulaKind::Gumbel), 1.0), 3.718281828459045, 1e-14);
  EXPECT_DOUBLE_EQ(copula::param_from_predictor(CopulaFamily(CopulaKind::Frank), -1.25), -1.25);
  EXPECT_NEAR(copula::param_from_predictor(CopulaFamily(CopulaKind::Student), 0.4), std::tanh(0.4), 1e-15);
  EXPECT_THROW(copula::param_from_predictor(CopulaFamily(CopulaKind::Clayton), std::nan("")), std::domain_error);
}

TEST(CopulaLink, PredictorInverts) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    const double s = copula::predictor_from_param(fam, c.param);
    EXPECT_NEAR(copula::param_from_predictor(fam, s), c.param, 1e-12 * (1 + std::abs(c.param))) << c.name;
  }
}

TEST(CopulaFamily, Names) {
  for (auto n : {"clayton", "frank", "gumbel", "gaussian", "student"}) EXPECT_EQ(CopulaFamily::from_name(n).name(), n);
  EXPECT_THROW(CopulaFamily::from_name("joe"), std::invalid_argument);
  EXPECT_THROW(CopulaFamily(CopulaKind::Student, 2.0), std::domain_error);
  EXPECT_DOUBLE_EQ(CopulaFamily::from_name("student").df(), 15.0);
}

TEST(CopulaCdf, Examples) {
  const auto clayton = CopulaFamily(CopulaKind::Clayton);
  EXPECT_NEAR(copula::cdf(clayton, 2.0, 0.5, 0.5), 1.0 / std::sqrt(7.0), 1e-14);
  EXPECT_NEAR(copula::cdf(clayton, 1e-9, 0.5, 0.5), 0.25, 1e-8);
  for (auto n : {"clayton", "frank", "gumbel", "gaussian", "student"}) {
    const auto fam = CopulaFamily::from_name(n);
    const double th = n == std::string("clayton") ? 2.0 : n == std::string("gumbel") ? 2.0 : n == std::string("frank") ? 3.0 : 0.4;
    EXPECT_EQ(copula::cdf(fam, th, 0.3, 0.0), 0.0) << n;
    EXPECT_EQ(copula::cdf(fam, th, 0.0, 0.7), 0.0) << n;
  }
  EXPECT_THROW(copula::cdf(clayton, -1.0, 0.5, 0.5), std::domain_error);
  EXPECT_THROW(copula::cdf(CopulaFamily(CopulaKind::Gumbel), 0.5, 0.5, 0.5), std::domain_error);
  EXPECT_THROW(copula::cdf(CopulaFamily(CopulaKind::Gaussian), 1.0, 0.5, 0.5), std::domain_error);
  EXPECT_THROW(copula::cdf(clayton, 2.0, 1.5, 0.5), std::domain_error);
}

TEST(CopulaCdf, MatchesClosedForms) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double u : kGrid)
      for (double v : kGrid)
        EXPECT_NEAR(copula::cdf(fam, c.param, u, v), oracle::copula_cdf(c.name, c.param, u, v), 1e-10)
            << c.name << " " << c.param << " " << u << " " << v;
  }
}

TEST(CopulaCdf, UniformMargins) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double u : kGrid) {
      EXPECT_NEAR(copula::cdf(fam, c.param, u, 1.0), u, 1e-12);
      EXPECT_NEAR(copula::cdf(fam, c.param, 1.0, u), u, 1e-12);
    }
  }
}

TEST(CopulaCdf, TwoIncreasing) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (std::size_t i = 0; i + 1 < kGrid.size(); ++i)
      for (std::size_t j = 0; j + 1 < kGrid.size(); ++j) {
        const double vol = copula::cdf(fam, c.param, kGrid[i + 1], kGrid[j + 1]) -
                           copula::cdf(fam, c.param, kGrid[i + 1], kGrid[j]) -
                           copula::cdf(fam, c.param, kGrid[i], kGrid[j + 1]) + copula::cdf(fam, c.param, kGrid[i], kGrid[j]);
        EXPECT_GE(vol, -1e-12) << c.name;
      }
  }
}

TEST(CopulaHfunc, Independence) {
  const auto g = CopulaFamily(CopulaKind::Gaussian);
  for (double u : kGrid)
    for (double v : kGrid) EXPECT_NEAR(copula::hfunc(g, 0.0, u, v), u, 1e-14);
  EXPECT_NEAR(copula::hfunc(g, 0.5, 0.5, 0.5), 0.5, 1e-14);
}

TEST(CopulaHfunc, ClaytonExampleMatchesFiniteDifference) {
  const auto c = CopulaFamily(CopulaKind::Clayton);
  const double h = 1e-6;
  const double fd = (oracle::clayton_cdf(2.0, 0.3, 0.7 + h) - oracle::clayton_cdf(2.0, 0.3, 0.7 - h)) / (2 * h);
  EXPECT_NEAR(copula::hfunc(c, 2.0, 0.3, 0.7), fd, 1e-8);
}

TEST(CopulaHfunc, FiniteDifferenceOfCdf) {
  const double h = 1e-6;
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double u : kGrid)
      for (double v : {0.1, 0.27, 0.5, 0.64, 0.9}) {
        const double fd = (oracle::copula_cdf(c.name, c.param, u, v + h) - oracle::copula_cdf(c.name, c.param, u, v - h)) / (2 * h);
        const double val = copula::hfunc(fam, c.param, u, v);
        EXPECT_NEAR(val, fd, 1e-5 * std::abs(fd) + 1e-9) << c.name << " " << c.param << " " << u << " " << v;
      }
  }
}

TEST(CopulaHfunc, BoundaryAndErrors) {
  const auto fam = CopulaFamily(CopulaKind::Clayton);
  EXPECT_EQ(copula::hfunc(fam, 2.0, 0.0, 0.5), 0.0);
  EXPECT_EQ(copula::hfunc(fam, 2.0, 1.0, 0.5), 1.0);
  EXPECT_THROW(copula::hfunc(fam, 2.0, 0.5, 0.0), std::domain_error);
  EXPECT_THROW(copula::hfunc(fam, 2.0, 0.5, 1.0), std::domain_error);
  // extreme arguments are clamped, never NaN
  for (const auto& c : kCases) {
    const auto f = CopulaFamily::from_name(c.name);
    for (double u : {1e-300, 1e-12, 1.0 - 1e-15})
      for (double v : {1e-300, 1e-12, 0.5, 1.0 - 1e-15}) {
        const double val = copula::hfunc(f, c.param, u, v);
        EXPECT_TRUE(val >= 0.0 && val <= 1.0) << c.name;
        EXPECT_TRUE(std::isfinite(copula::log_density(f, c.param, u, v))) << c.name;
      }
  }
}

TEST(CopulaHfunc, NondecreasingInU) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double v : {0.05, 0.5, 0.95}) {
      double prev = 0.0;
      for (int i = 1; i < 200; ++i) {
        const double h = copula::hfunc(fam, c.param, i / 200.0, v);
        EXPECT_GE(h, prev - 1e-15);
        prev = h;
      }
    }
  }
}

TEST(CopulaHfunc, IntegratesToU) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double u : {0.1, 0.5, 0.9}) {
      const double i = ts.integrate([&](double v) { return copula::hfunc(fam, c.param, u, v); }, 0.0, 1.0, 1e-12);
      EXPECT_NEAR(i, u, 1e-8) << c.name << " " << c.param;
    }
  }
}

TEST(CopulaDensity, MixedFiniteDifference) {
  const double h = 1e-4;
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double u : {0.1, 0.27, 0.5, 0.9})
      for (double v : {0.1, 0.5, 0.64}) {
        auto C = [&](double a, double b) { return oracle::copula_cdf(c.name, c.param, a, b); };
        const double fd = (C(u + h, v + h) - C(u + h, v - h) - C(u - h, v + h) + C(u - h, v - h)) / (4 * h * h);
        EXPECT_NEAR(copula::density(fam, c.param, u, v), fd, 1e-4 * fd + 1e-6) << c.name << " " << u << " " << v;
      }
  }
}

TEST(CopulaDensity, IndependenceLimits) {
  EXPECT_NEAR(copula::density(CopulaFamily(CopulaKind::Frank), 0.0, 0.3, 0.8), 1.0, 1e-15);
  EXPECT_NEAR(copula::density(CopulaFamily(CopulaKind::Frank), 1e-8, 0.3, 0.8), 1.0, 1e-7);
  EXPECT_NEAR(copula::density(CopulaFamily(CopulaKind::Gaussian), 0.0, 0.3, 0.8), 1.0, 1e-14);
  EXPECT_NEAR(copula::density(CopulaFamily(CopulaKind::Gumbel), 1.0, 0.3, 0.8), 1.0, 1e-14);
}

TEST(CopulaDensity, IntegratesToOneOnGrid) {
  const auto rule = gauss_legendre_unit(120);
  for (const auto& c : kCases) {
    if (std::string(c.name) == "clayton" && c.param > 3) continue;  // corner spike needs more nodes
    if (std::string(c.name) == "gumbel" && c.param > 3) continue;
    const auto fam = CopulaFamily::from_name(c.name);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      for (std::size_t j = 0; j < rule.size(); ++j)
        s += rule.weights[i] * rule.weights[j] * copula::density(fam, c.param, rule.nodes[i], rule.nodes[j]);
    EXPECT_NEAR(s, 1.0, 2e-3) << c.name << " " << c.param;
  }
}

TEST(CopulaHinv, IndependenceAndRoundTrip) {
  EXPECT_NEAR(copula::hinv(CopulaFamily(CopulaKind::Gaussian), 0.0, 0.37, 0.2), 0.37, 1e-14);
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    const double w = copula::hfunc(fam, c.param, 0.3, 0.7);
    EXPECT_NEAR(copula::hinv(fam, c.param, w, 0.7), 0.3, 1e-8) << c.name;
    for (double u : kGrid)
      for (double v : kGrid) {
        const double x = copula::hfunc(fam, c.param, u, v);
        if (x <= 0.0 || x >= 1.0) continue;
        EXPECT_NEAR(copula::hfunc(fam, c.param, copula::hinv(fam, c.param, x, v), v), x, 1e-8) << c.name;
      }
  }
}

TEST(CopulaHinv, BisectionOracle) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    for (double w : {0.05, 0.4, 0.83})
      for (double v : {0.15, 0.5, 0.9}) {
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 50; ++i) {
          const double mid = 0.5 * (lo + hi);
          (oracle::copula_cdf(c.name, c.param, mid, v + 1e-6) - oracle::copula_cdf(c.name, c.param, mid, v - 1e-6)) / 2e-6 < w
              ? lo = mid
              : hi = mid;
        }
        EXPECT_NEAR(copula::hinv(fam, c.param, w, v), 0.5 * (lo + hi), 1e-5) << c.name;
      }
  }
}

TEST(CopulaHinv, GaussianClosedForm) {
  const auto fam = CopulaFamily(CopulaKind::Gaussian);
  for (double r : {-0.8, 0.3, 0.95})
    for (double w : {0.1, 0.5, 0.77})
      for (double v : {0.2, 0.6}) {
        const double expect = oracle::phi_cdf(std::sqrt(1 - r * r) * oracle::phi_inv(w) + r * oracle::phi_inv(v));
        EXPECT_NEAR(copula::hinv(fam, r, w, v), expect, 1e-12);
      }
}

TEST(CopulaHinv, DomainErrors) {
  const auto fam = CopulaFamily(CopulaKind::Gumbel);
  EXPECT_THROW(copula::hinv(fam, 2.0, 0.5, 0.0), std::domain_error);
  EXPECT_THROW(copula::hinv(fam, 2.0, 1.5, 0.5), std::domain_error);
}

TEST(CopulaTau, Examples) {
  EXPECT_NEAR(copula::tau(CopulaFamily(CopulaKind::Clayton), 2.0), 0.5, 1e-15);
  EXPECT_NEAR(copula::tau(CopulaFamily(CopulaKind::Gaussian), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(copula::tau(CopulaFamily(CopulaKind::Gumbel), 2.0), 0.5, 1e-15);
  EXPECT_NEAR(copula::tau(CopulaFamily(CopulaKind::Student), std::sin(std::numbers::pi / 4)), 0.5, 1e-15);
  EXPECT_NEAR(copula::tau(CopulaFamily(CopulaKind::Frank), -1.648949), -0.178, 5e-4);
}

TEST(CopulaTau, FrankMatchesDebyeQuadrature) {
  const auto fam = CopulaFamily(CopulaKind::Frank);
  for (double th : {-20.0, -3.0, -0.5, 1e-4, 0.01, 2.0, 7.0, 35.0})
    EXPECT_NEAR(copula::tau(fam, th), oracle::frank_tau(th), 1e-10) << th;
  EXPECT_EQ(copula::tau(fam, 0.0), 0.0);
}

TEST(CopulaTau, RoundTrip) {
  for (const auto& c : kCases) {
    const auto fam = CopulaFamily::from_name(c.name);
    EXPECT_NEAR(copula::tau_to_param(fam, copula::tau(fam, c.param)), c.param, 1e-8 * (1 + std::abs(c.param))) << c.name;
  }
}

TEST(CopulaTau, Unreachable) {
  EXPECT_THROW(copula::tau_to_param(CopulaFamily(CopulaKind::Clayton), -0.2), std::domain_error);
  EXPECT_THROW(copula::tau_to_param(CopulaFamily(CopulaKind::Gumbel), -0.2), std::domain_error);
  EXPECT_THROW(copula::tau_to_param(CopulaFamily(CopulaKind::Frank), 0.99), std::domain_error);
  EXPECT_THROW(copula::tau_to_param(CopulaFamily(CopulaKind::Gaussian), 1.0), std::domain_error);
}

TEST(CopulaPure, ThreadSafe) {
  // the same calls from several threads give identical results
  const auto fam = CopulaFamily(CopulaKind::Gumbel);
  std::vector<double> out(64);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = copula::hinv(fam, 2.5, (i + 0.5) / 64.0, 0.3); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], copula::hinv(fam, 2.5, (i + 0.5) / 64.0, 0.3));
}
