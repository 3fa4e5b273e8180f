#pragma once

// Scalar special functions used by the copula and margin kernels, each with a
// Dual overload that carries the exact derivative.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fcmm/dual.hpp"
#include "fcmm/quadrature.hpp"

namespace fcmm {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_quantile(double p) {
  if (p <= 0.0) return -INFINITY;
  if (p >= 1.0) return INFINITY;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

template <std::size_t N>
inline Dual<N> norm_cdf(const Dual<N>& x) {
  return chain(x, norm_cdf(x.v), norm_pdf(x.v));
}
template <std::size_t N>
inline Dual<N> norm_quantile(const Dual<N>& p) {
  const double z = norm_quantile(p.v);
  return chain(p, z, 1.0 / norm_pdf(z));
}

// Student t with real degrees of freedom.
inline double t_log_pdf(double nu, double x) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}
inline double t_pdf(double nu, double x) { return std::exp(t_log_pdf(nu, x)); }
inline double t_cdf(double nu, double x) {
  if (!std::isfinite(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}
inline double t_quantile(double nu, double p) {
  if (p <= 0.0) return -INFINITY;
  if (p >= 1.0) return INFINITY;
  return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

template <std::size_t N>
inline Dual<N> t_cdf(double nu, const Dual<N>& x) {
  return chain(x, t_cdf(nu, x.v), t_pdf(nu, x.v));
}
template <std::size_t N>
inline Dual<N> t_quantile(double nu, const Dual<N>& p) {
  const double z = t_quantile(nu, p.v);
  return chain(p, z, 1.0 / t_pdf(nu, z));
}

// Poisson cdf P(Y <= y) as a function of the rate; dG/drate = -pmf(y).
inline double poisson_log_pmf(double y, double rate) {
  if (rate == 0.0) return y == 0.0 ? 0.0 : -INFINITY;
  return y * std::log(rate) - rate - std::lgamma(y + 1.0);
}
inline double poisson_cdf(double y, double rate) {
  if (y < 0.0) return 0.0;
  return boost::math::gamma_q(std::floor(y) + 1.0, rate);
}
template <std::size_t N>
inline Dual<N> poisson_cdf(double y, const Dual<N>& rate) {
  if (y < 0.0) return Dual<N>(0.0);
  return chain(rate, poisson_cdf(y, rate.v), -std::exp(poisson_log_pmf(std::floor(y), rate.v)));
}

/// Debye function of order one, D1(x) = (1/x) * int_0^x t / (e^t - 1) dt.
inline double debye1(double x) {
  if (x == 0.0) return 1.0;
  if (std::abs(x) < 1e-3) return 1.0 - x / 4.0 + x * x / 36.0 - x * x * x * x / 3600.0;
  static const auto rule = [] {
    std::vector<double> nodes, weights;
    legendre_nodes(64, nodes, weights);
    return std::pair{nodes, weights};
  }();
  const double integral = integrate_gl(
      [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); }, 0.0, x, rule.first,
      rule.second);
  return integral / x;
}

/// Upper bivariate normal probability P(X > dh, Y > dk) with correlation r.
///
/// Drezner-Wesolowsky / Genz algorithm (double precision accuracy).
inline double bvn_upper(double dh, double dk, double r) {
  constexpr double tp = 2.0 * std::numbers::pi;
  if (dh == INFINITY || dk == INFINITY) return 0.0;
  if (dh == -INFINITY) return dk == -INFINITY ? 1.0 : norm_cdf(-dk);
  if (dk == -INFINITY) return norm_cdf(-dh);
  if (r == 0.0) return norm_cdf(-dh) * norm_cdf(-dk);

  static constexpr double w6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr double x6[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr double w12[6] = {.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                    0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
  static constexpr double x12[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                    0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static constexpr double w20[10] = {.01761400713915212, .04060142980038694, .06267204833410906,
                                     .08327674157670475, 0.1019301198172404, 0.1181945319615184,
                                     0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                                     0.1527533871307259};
  static constexpr double x20[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                     0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                     0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                     0.07652652113349733};
  const double* wh;
  const double* xh;
  int lg;
  if (std::abs(r) < 0.3) {
    wh = w6, xh = x6, lg = 3;
  } else if (std::abs(r) < 0.75) {
    wh = w12, xh = x12, lg = 6;
  } else {
    wh = w20, xh = x20, lg = 10;
  }
  // expand the half rule to the symmetric full rule on (0, 2)
  std::vector<double> w(2 * lg), x(2 * lg);
  for (int i = 0; i < lg; ++i) {
    w[i] = w[i + lg] = wh[i];
    x[i] = 1.0 - xh[i];
    x[i + lg] = 1.0 + xh[i];
  }

  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (int i = 0; i < 2 * lg; ++i) {
      const double sn = std::sin(asr * x[i]);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::abs(r) < 1.0) {
      const double as = 1.0 - r * r;
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      double asr = -(bs / as + hk) / 2.0;
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(tp) * norm_cdf(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a /= 2.0;
      double sum = 0.0;
      for (int i = 0; i < 2 * lg; ++i) {
        const double xs = (a * x[i]) * (a * x[i]);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          sum += w[i] * (std::exp(asr) * ep - std::exp(-bs / (2.0 * xs)) * sp);
        }
      }
      bvn = (a * sum - bvn) / tp;
    }
    if (r > 0.0) {
      bvn += norm_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double l = h < 0.0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
      bvn = l - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

/// Bivariate normal cdf P(X <= x, Y <= y).
inline double bvn_cdf(double x, double y, double r) { return bvn_upper(-x, -y, r); }

/// Bivariate Student t cdf P(X <= dh, Y <= dk) for integer degrees of freedom
/// (Dunnett-Sobel closed form, as in Genz's bvtl).
inline double bvt_cdf(int nu, double dh, double dk, double r) {
  constexpr double eps = 1e-15;
  constexpr double pi = std::numbers::pi;
  constexpr double tpi = 2.0 * pi;
  if (1.0 - r <= eps) return t_cdf(nu, std::min(dh, dk));
  if (r + 1.0 <= eps) return dh > -dk ? t_cdf(nu, dh) - t_cdf(nu, -dk) : 0.0;
  const double snu = std::sqrt(static_cast<double>(nu));
  const double ors = 1.0 - r * r;
  const double hrk = dh - r * dk;
  const double krh = dk - r * dh;
  double xnhk = 0.0;
  double xnkh = 0.0;
  if (std::abs(hrk) + ors > 0.0) {
    xnhk = hrk * hrk / (hrk * hrk + ors * (nu + dk * dk));
    xnkh = krh * krh / (krh * krh + ors * (nu + dh * dh));
  }
  const double hs = dh - r * dk < 0.0 ? -1.0 : 1.0;
  const double ks = dk - r * dh < 0.0 ? -1.0 : 1.0;
  double bvt;
  if (nu % 2 == 0) {
    bvt = std::atan2(std::sqrt(ors), -r) / tpi;
    double gmph = dh / std::sqrt(16.0 * (nu + dh * dh));
    double gmpk = dk / std::sqrt(16.0 * (nu + dk * dk));
    double btnckh = 2.0 * std::atan2(std::sqrt(xnkh), std::sqrt(1.0 - xnkh)) / pi;
    double btpdkh = 2.0 * std::sqrt(xnkh * (1.0 - xnkh)) / pi;
    double btnchk = 2.0 * std::atan2(std::sqrt(xnhk), std::sqrt(1.0 - xnhk)) / pi;
    double btpdhk = 2.0 * std::sqrt(xnhk * (1.0 - xnhk)) / pi;
    for (int j = 1; j <= nu / 2; ++j) {
      bvt += gmph * (1.0 + ks * btnckh);
      bvt += gmpk * (1.0 + hs * btnchk);
      btnckh += btpdkh;
      btpdkh = 2.0 * j * btpdkh * (1.0 - xnkh) / (2.0 * j + 1.0);
      btnchk += btpdhk;
      btpdhk = 2.0 * j * btpdhk * (1.0 - xnhk) / (2.0 * j + 1.0);
      gmph = gmph * (2.0 * j - 1.0) / (2.0 * j * (1.0 + dh * dh / nu));
      gmpk = gmpk * (2.0 * j - 1.0) / (2.0 * j * (1.0 + dk * dk / nu));
    }
  } else {
    const double qhrk = std::sqrt(dh * dh + dk * dk - 2.0 * r * dh * dk + nu * ors);
    const double hkrn = dh * dk + r * nu;
    const double hkn = dh * dk - nu;
    const double hpk = dh + dk;
    bvt = std::atan2(-snu * (hkn * qhrk + hpk * hkrn), hkn * hkrn - nu * hpk * qhrk) / tpi;
    if (bvt < -eps) bvt += 1.0;
    double gmph = dh / (tpi * snu * (1.0 + dh * dh / nu));
    double gmpk = dk / (tpi * snu * (1.0 + dk * dk / nu));
    double btnckh = std::sqrt(xnkh);
    double btpdkh = btnckh;
    double btnchk = std::sqrt(xnhk);
    double btpdhk = btnchk;
    for (int j = 1; j <= (nu - 1) / 2; ++j) {
      bvt += gmph * (1.0 + ks * btnckh);
      bvt += gmpk * (1.0 + hs * btnchk);
      btpdkh = (2.0 * j - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * j);
      btnckh += btpdkh;
      btpdhk = (2.0 * j - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * j);
      btnchk += btpdhk;
      gmph = gmph * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + dh * dh / nu));
      gmpk = gmpk * 2.0 * j / ((2.0 * j + 1.0) * (1.0 + dk * dk / nu));
    }
  }
  return std::clamp(bvt, 0.0, 1.0);
}

}  // namespace fcmm
