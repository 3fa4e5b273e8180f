#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fcmm {

/// Nodes and weights on (0, 1). Nodes are strictly interior and increasing;
/// the weights integrate functions of the latent v directly.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Nodes and weights on (-1, 1) by Newton iteration on P_n, the classical
/// construction (accurate to a few ulps for n up to several hundred).
inline void legendre_nodes(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("quadrature: need at least one node");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p0 / dp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    // recompute derivative at the converged root for the weight
    double p0 = 1.0;
    double p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Gauss-Legendre mapped from (-1, 1) onto (0, 1); weights sum to one.
inline QuadratureRule gauss_legendre_unit(int n) {
  std::vector<double> x, w;
  legendre_nodes(n, x, w);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = 0.5 * (x[i] + 1.0);
    rule.weights[i] = 0.5 * w[i];
  }
  return rule;
}

/// Gauss-Hermite rule for the standard normal pushed onto (0, 1) through Phi,
/// i.e. nodes Phi(z_i) and weights w_i with sum w_i f(Phi(z_i)) ~ int_0^1 f.
/// Nodes beyond |z| = 8 are dropped: Phi rounds them to one, and their
/// combined weight is below 1e-15.
inline QuadratureRule gauss_hermite_unit(int n) {
  if (n < 1) throw std::invalid_argument("quadrature: need at least one node");
  // Golub-Welsch for starting values, then Newton on the orthonormal
  // recurrence, which also gives the weights to full relative accuracy
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(i / 2.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac, Eigen::EigenvaluesOnly);
  const double pi_quarter = std::pow(std::numbers::pi, -0.25);
  QuadratureRule rule;
  for (int i = 0; i < n; ++i) {
    double x = eig.eigenvalues()[i];
    double p_prev = 0.0;
    for (int it = 0; it < 6; ++it) {
      double p = pi_quarter;
      p_prev = 0.0;
      for (int j = 0; j < n; ++j) {
        const double next = x * std::sqrt(2.0 / (j + 1)) * p - std::sqrt(double(j) / (j + 1)) * p_prev;
        p_prev = p;
        p = next;
      }
      const double step = p / (std::sqrt(2.0 * n) * p_prev);
      x -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    const double z = std::numbers::sqrt2 * x;
    if (std::abs(z) > 8.0) continue;
    rule.nodes.push_back(0.5 * std::erfc(-z / std::numbers::sqrt2));
    rule.weights.push_back(1.0 / (n * p_prev * p_prev) / std::sqrt(std::numbers::pi));
  }
  return rule;
}

/// Integrates f over [a, b] with an n-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, const std::vector<double>& x,
                    const std::vector<double>& w) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(mid + half * x[i]);
  return half * s;
}

}  // namespace fcmm
