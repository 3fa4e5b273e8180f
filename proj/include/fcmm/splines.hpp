#pragma once

// B-spline bases on [0, 1] by the Cox-de Boor recursion.

#include <stdexcept>
#include <vector>

namespace fcmm {

/// Clamped B-spline basis on [0, 1] with the given interior knots. The full
/// basis has interior.size() + degree + 1 functions; `design_row` drops the
/// first one, which is the usual convention when an intercept is present.
struct SplineBasis {
  int degree = 1;
  std::vector<double> interior;

  std::size_t dimension() const { return interior.size() + degree + 1; }

  std::vector<double> knots() const {
    std::vector<double> t(degree + 1, 0.0);
    t.insert(t.end(), interior.begin(), interior.end());
    t.insert(t.end(), degree + 1, 1.0);
    return t;
  }
};

/// All basis functions at x; they sum to one on [0, 1].
inline std::vector<double> bspline_basis(const SplineBasis& b, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("bspline_basis: x must lie in [0, 1]");
  const auto t = b.knots();
  const std::size_t m = t.size() - 1;  // number of knot spans
  // degree-0 functions; the right end point belongs to the last non-empty span
  std::vector<double> n(m, 0.0);
  if (x >= 1.0) {
    std::size_t j = m - 1;
    while (j > 0 && t[j] == t[j + 1]) --j;
    n[j] = 1.0;
  } else {
    for (std::size_t j = 0; j < m; ++j)
      if (t[j] <= x && x < t[j + 1]) n[j] = 1.0;
  }
  for (int d = 1; d <= b.degree; ++d) {
    for (std::size_t j = 0; j + d < m; ++j) {
      double v = 0.0;
      const double l = t[j + d] - t[j];
      const double r = t[j + d + 1] - t[j + 1];
      if (l > 0.0) v += (x - t[j]) / l * n[j];
      if (r > 0.0) v += (t[j + d + 1] - x) / r * n[j + 1];
      n[j] = v;
    }
  }
  n.resize(b.dimension());
  return n;
}

/// Basis without its first function.
inline std::vector<double> design_row(const SplineBasis& b, double x) {
  auto n = bspline_basis(b, x);
  n.erase(n.begin());
  return n;
}

}  // namespace fcmm
