#pragma once

// Bivariate linking copulas: cdf, density, h-function (dC/dv), its inverse,
// Kendall's tau and the link from a real linear predictor to the family's
// parameter range.
//
// The kernels are templates over the scalar type so the likelihood can push
// Dual numbers through them. A copula argument u is "prepared" once per
// observation and the latent value v once per quadrature node; the expensive
// quantile transforms of the elliptical families live in that preparation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fcmm/dual.hpp"
#include "fcmm/special.hpp"

namespace fcmm {

/// Raised when an iterative solver fails to reach its tolerance.
class numeric_error : public std::runtime_error {
 public:
  numeric_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

enum class CopulaKind { Clayton, Frank, Gumbel, Gaussian, Student };

class CopulaFamily {
 public:
  explicit CopulaFamily(CopulaKind kind = CopulaKind::Gaussian, double df = 15.0)
      : kind_(kind), df_(df) {
    if (kind_ == CopulaKind::Student && !(df_ > 2.0 && std::isfinite(df_)))
      throw std::domain_error("student copula: degrees of freedom must exceed 2");
  }

  CopulaKind kind() const noexcept { return kind_; }
  double df() const noexcept { return df_; }

  std::string name() const {
    switch (kind_) {
      case CopulaKind::Clayton: return "clayton";
      case CopulaKind::Frank: return "frank";
      case CopulaKind::Gumbel: return "gumbel";
      case CopulaKind::Gaussian: return "gaussian";
      case CopulaKind::Student: return "student";
    }
    return "unknown";
  }

  static CopulaFamily from_name(std::string_view name, double df = 15.0) {
    if (name == "clayton") return CopulaFamily(CopulaKind::Clayton);
    if (name == "frank") return CopulaFamily(CopulaKind::Frank);
    if (name == "gumbel") return CopulaFamily(CopulaKind::Gumbel);
    if (name == "gaussian") return CopulaFamily(CopulaKind::Gaussian);
    if (name == "student") return CopulaFamily(CopulaKind::Student, df);
    throw std::invalid_argument("unknown copula family '" + std::string(name) + "'");
  }

  bool operator==(const CopulaFamily&) const = default;

 private:
  CopulaKind kind_;
  double df_;
};

namespace copula {

inline constexpr double kUMin = 1e-10;
inline constexpr double kUMax = 1.0 - 1e-10;
inline constexpr double kFrankSeriesCut = 1e-6;

template <class T>
inline T clamp_unit(const T& u) {
  if (value(u) < kUMin) return T(kUMin);
  if (value(u) > kUMax) return T(kUMax);
  return u;
}

inline void check_unit(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0)) {
    std::ostringstream os;
    os << what << " = " << u << " is outside [0, 1]";
    throw std::domain_error(os.str());
  }
}

/// Maps a real linear predictor into the family's parameter range.
template <class T>
T param_from_predictor(const CopulaFamily& fam, const T& s) {
  using std::exp;
  using std::tanh;
  if (!std::isfinite(value(s))) throw std::domain_error("copula predictor is not finite");
  switch (fam.kind()) {
    case CopulaKind::Clayton: return 2.0 * exp(s);
    case CopulaKind::Gumbel: return 1.0 + exp(s);
    case CopulaKind::Frank: return s;
    case CopulaKind::Gaussian:
    case CopulaKind::Student: return tanh(s);
  }
  return s;
}

/// Inverse of param_from_predictor.
inline double predictor_from_param(const CopulaFamily& fam, double param) {
  switch (fam.kind()) {
    case CopulaKind::Clayton: return std::log(param / 2.0);
    case CopulaKind::Gumbel: return std::log(param - 1.0);
    case CopulaKind::Frank: return param;
    case CopulaKind::Gaussian:
    case CopulaKind::Student: return std::atanh(param);
  }
  return param;
}

inline void check_param(const CopulaFamily& fam, double p) {
  bool ok = std::isfinite(p);
  switch (fam.kind()) {
    case CopulaKind::Clayton: ok = ok && p > 0.0; break;
    case CopulaKind::Gumbel: ok = ok && p >= 1.0; break;
    case CopulaKind::Frank: break;
    case CopulaKind::Gaussian:
    case CopulaKind::Student: ok = ok && std::abs(p) < 1.0; break;
  }
  if (!ok) {
    std::ostringstream os;
    os << fam.name() << " copula: parameter " << p << " out of range";
    throw std::domain_error(os.str());
  }
}

/// A copula argument u with its family-specific transform:
/// Clayton log(u), Gumbel log(-log u), Gaussian/Student quantile score.
template <class T>
struct PreparedU {
  T u;
  T z;
};

/// Same as PreparedU for the latent value, which is never differentiated.
struct LatentNode {
  double v;
  double z;
};

template <class T>
PreparedU<T> prepare_u(const CopulaFamily& fam, const T& raw) {
  using std::log;
  const T u = clamp_unit(raw);
  switch (fam.kind()) {
    case CopulaKind::Clayton: return {u, log(u)};
    case CopulaKind::Gumbel: return {u, log(-log(u))};
    case CopulaKind::Gaussian: return {u, norm_quantile(u)};
    case CopulaKind::Student: return {u, t_quantile(fam.df(), u)};
    case CopulaKind::Frank: return {u, u};
  }
  return {u, u};
}

inline LatentNode prepare_v(const CopulaFamily& fam, double raw) {
  const double v = clamp_unit(raw);
  switch (fam.kind()) {
    case CopulaKind::Clayton: return {v, std::log(v)};
    case CopulaKind::Gumbel: return {v, std::log(-std::log(v))};
    case CopulaKind::Gaussian: return {v, norm_quantile(v)};
    case CopulaKind::Student: return {v, t_quantile(fam.df(), v)};
    case CopulaKind::Frank: return {v, v};
  }
  return {v, v};
}

namespace detail {

// log(u^-th + v^-th - 1) from lu = log u, lv = log v, stable for any th > 0.
template <class T, class S>
T clayton_log_a(const T& th, const T& lu, const S& lv) {
  using std::exp;
  using std::expm1;
  using std::log1p;
  const T a = -th * lu;
  const T b = -th * lv;
  return value(a) >= value(b) ? a + log1p(exp(-a) * expm1(b)) : b + log1p(exp(-b) * expm1(a));
}

// log D for Frank with th > 0, where
// D = (1 - e^-th) - (1 - e^-th u)(1 - e^-th v)
//   = e^-th u (1 - e^-th v) + e^-th v (1 - e^-th (1 - v)).
template <class T>
T frank_log_d(const T& th, const T& u, double v) {
  using std::expm1;
  using std::log;
  return log_add_exp(T(-th * u + log(-expm1(-th * v))), T(-th * v + log(-expm1(-th * (1.0 - v)))));
}

template <class T>
T frank_log_density_pos(const T& th, const T& u, double v) {
  using std::expm1;
  using std::log;
  return log(th) + log(-expm1(-th)) - th * (u + v) - 2.0 * frank_log_d(th, u, v);
}

template <class T>
T frank_hfunc_pos(const T& th, const T& u, double v) {
  using std::exp;
  using std::expm1;
  using std::log;
  return exp(-th * v + log(-expm1(-th * u)) - frank_log_d(th, u, v));
}

}  // namespace detail

/// log c(u, v) with u prepared per observation and v per node.
template <class T>
T log_density(const CopulaFamily& fam, const T& th, const PreparedU<T>& a, const LatentNode& n) {
  using std::exp;
  using std::log;
  using std::log1p;
  switch (fam.kind()) {
    case CopulaKind::Clayton: {
      const T la = detail::clayton_log_a(th, a.z, n.z);
      return log1p(th) - (th + 1.0) * (a.z + n.z) - (1.0 / th + 2.0) * la;
    }
    case CopulaKind::Frank: {
      if (std::abs(value(th)) < kFrankSeriesCut)
        return log1p(0.5 * th * (1.0 - 2.0 * a.u) * (1.0 - 2.0 * n.v));
      if (value(th) > 0.0) return detail::frank_log_density_pos(th, a.u, n.v);
      return detail::frank_log_density_pos(T(-th), T(1.0 - a.u), n.v);
    }
    case CopulaKind::Gumbel: {
      const T ls = log_add_exp(T(th * a.z), T(th * n.z));
      const T big_a = exp(ls / th);
      const T lu = -exp(a.z);
      const double lv = -std::exp(n.z);
      return -big_a - lu - lv + (th - 1.0) * (a.z + n.z) + (1.0 / th - 2.0) * ls +
             log(big_a + th - 1.0);
    }
    case CopulaKind::Gaussian: {
      const T om = (1.0 - th) * (1.0 + th);
      const T& x = a.z;
      const double y = n.z;
      return -0.5 * log(om) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * om);
    }
    case CopulaKind::Student: {
      const double nu = fam.df();
      const double k = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
                       2.0 * std::lgamma(0.5 * (nu + 1.0));
      const T om = (1.0 - th) * (1.0 + th);
      const T& x = a.z;
      const double y = n.z;
      return k - 0.5 * log(om) -
             0.5 * (nu + 2.0) * log1p((x * x + y * y - 2.0 * th * x * y) / (nu * om)) +
             0.5 * (nu + 1.0) * (log1p(x * x / nu) + std::log1p(y * y / nu));
    }
  }
  return T(0.0);
}

/// h(u, v) = dC(u, v)/dv, the conditional cdf of U given V = v.
template <class T>
T hfunc(const CopulaFamily& fam, const T& th, const PreparedU<T>& a, const LatentNode& n) {
  using std::exp;
  using std::sqrt;
  switch (fam.kind()) {
    case CopulaKind::Clayton: {
      const T la = detail::clayton_log_a(th, a.z, n.z);
      return exp(-(th + 1.0) * n.z - (1.0 / th + 1.0) * la);
    }
    case CopulaKind::Frank: {
      if (std::abs(value(th)) < kFrankSeriesCut)
        return a.u + 0.5 * th * a.u * (1.0 - a.u) * (1.0 - 2.0 * n.v);
      if (value(th) > 0.0) return detail::frank_hfunc_pos(th, a.u, n.v);
      return 1.0 - detail::frank_hfunc_pos(T(-th), T(1.0 - a.u), n.v);
    }
    case CopulaKind::Gumbel: {
      const T ls = log_add_exp(T(th * a.z), T(th * n.z));
      const T big_a = exp(ls / th);
      const double lv = -std::exp(n.z);
      return exp(-big_a - lv + (th - 1.0) * n.z + (1.0 / th - 1.0) * ls);
    }
    case CopulaKind::Gaussian: {
      const T om = (1.0 - th) * (1.0 + th);
      return norm_cdf(T((a.z - th * n.z) / sqrt(om)));
    }
    case CopulaKind::Student: {
      const double nu = fam.df();
      const T om = (1.0 - th) * (1.0 + th);
      const T scale = sqrt((nu + n.z * n.z) * om / (nu + 1.0));
      return t_cdf(nu + 1.0, T((a.z - th * n.z) / scale));
    }
  }
  return a.u;
}

// ---------------------------------------------------------------------------
// Plain double API.

inline double log_density(const CopulaFamily& fam, double th, double u, double v) {
  check_param(fam, th);
  check_unit(u, "u");
  check_unit(v, "v");
  return log_density(fam, th, prepare_u(fam, u), prepare_v(fam, v));
}

inline double density(const CopulaFamily& fam, double th, double u, double v) {
  return std::exp(log_density(fam, th, u, v));
}

inline double hfunc(const CopulaFamily& fam, double th, double u, double v) {
  check_param(fam, th);
  check_unit(u, "u");
  check_unit(v, "v");
  if (v == 0.0 || v == 1.0) throw std::domain_error("hfunc: v must be strictly inside (0, 1)");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  return std::clamp(hfunc(fam, th, prepare_u(fam, u), prepare_v(fam, v)), 0.0, 1.0);
}

inline double cdf(const CopulaFamily& fam, double th, double u, double v) {
  check_param(fam, th);
  check_unit(u, "u");
  check_unit(v, "v");
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  switch (fam.kind()) {
    case CopulaKind::Clayton:
      return std::exp(-detail::clayton_log_a(th, std::log(u), std::log(v)) / th);
    case CopulaKind::Frank: {
      auto pos = [](double t, double uu, double vv) {
        return -(detail::frank_log_d(t, uu, vv) - std::log(-std::expm1(-t))) / t;
      };
      if (std::abs(th) < kFrankSeriesCut) return u * v * (1.0 + 0.5 * th * (1.0 - u) * (1.0 - v));
      if (th > 0.0) return pos(th, u, v);
      return v - pos(-th, 1.0 - u, v);
    }
    case CopulaKind::Gumbel: {
      const double ls = log_add_exp(th * std::log(-std::log(u)), th * std::log(-std::log(v)));
      return std::exp(-std::exp(ls / th));
    }
    case CopulaKind::Gaussian: return bvn_cdf(norm_quantile(u), norm_quantile(v), th);
    case CopulaKind::Student: {
      const double nu = fam.df();
      const double x = t_quantile(nu, u);
      const double y = t_quantile(nu, v);
      if (nu == std::round(nu) && nu < 1000.0) return bvt_cdf(static_cast<int>(nu), x, y, th);
      // non-integer df: C(u, v) = int_{-inf}^{y} h(u, F(z)) f(z) dz
      const auto pu = prepare_u(fam, u);
      auto integrand = [&](double z) {
        const double t = t_cdf(nu, z);
        if (t <= 0.0 || t >= 1.0) return t >= 1.0 ? u * t_pdf(nu, z) : 0.0;
        return hfunc(fam, th, pu, LatentNode{t, z}) * t_pdf(nu, z);
      };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -INFINITY, y,
                                                                            15, 1e-13);
    }
  }
  return u * v;
}

namespace detail {

// Safeguarded Newton on t = log(-log u) for h(u, v) = w; h is decreasing in t.
inline double hinv_numeric(const CopulaFamily& fam, double th, double w, double v) {
  const LatentNode node = prepare_v(fam, v);
  auto eval = [&](double t, double& deriv) {
    const double x = std::exp(t);
    const double u = std::exp(-x);
    PreparedU<double> a{u, 0.0};
    switch (fam.kind()) {
      case CopulaKind::Clayton: a.z = -x; break;
      case CopulaKind::Gumbel: a.z = t; break;
      case CopulaKind::Gaussian: a.z = norm_quantile(u); break;
      case CopulaKind::Student: a.z = t_quantile(fam.df(), u); break;
      case CopulaKind::Frank: a.z = u; break;
    }
    const double h = hfunc(fam, th, a, node);
    // dh/dt = c(u, v) * du/dt = -c(u, v) * u * x
    deriv = -std::exp(log_density(fam, th, a, node) - x + t);
    return h - w;
  };
  double lo = -40.0;  // u ~ 1
  double hi = 6.5;    // u ~ e^-665
  double t = std::log(-std::log(std::clamp(w, 1e-300, 1.0 - 1e-16)));
  double resid = 0.0;
  double width = hi - lo;
  for (int it = 0; it < 200; ++it) {
    double d = 0.0;
    resid = eval(t, d);
    if (!std::isfinite(resid)) resid = 0.0;
    if (std::abs(resid) < 1e-14) return std::exp(-std::exp(t));
    if (resid > 0.0) lo = t; else hi = t;
    double next = (d < 0.0 && std::isfinite(d)) ? t - resid / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    // Newton that stops shrinking the bracket gets replaced by bisection
    if (it % 4 == 3) {
      if (hi - lo > 0.5 * width) next = 0.5 * (lo + hi);
      width = hi - lo;
    }
    if (std::abs(next - t) < 1e-13 * (1.0 + std::abs(t)) || hi - lo < 1e-13) {
      return std::exp(-std::exp(next));
    }
    t = next;
  }
  throw numeric_error("hinv: root solve did not converge", resid);
}

}  // namespace detail

/// Left inverse of u -> h(u, v).
inline double hinv(const CopulaFamily& fam, double th, double w, double v) {
  check_param(fam, th);
  check_unit(w, "w");
  check_unit(v, "v");
  if (v == 0.0 || v == 1.0) throw std::domain_error("hinv: v must be strictly inside (0, 1)");
  if (w == 0.0) return 0.0;
  if (w == 1.0) return 1.0;
  switch (fam.kind()) {
    case CopulaKind::Gaussian: {
      const double om = (1.0 - th) * (1.0 + th);
      return norm_cdf(std::sqrt(om) * norm_quantile(w) + th * norm_quantile(v));
    }
    case CopulaKind::Student: {
      const double nu = fam.df();
      const double y = t_quantile(nu, v);
      const double om = (1.0 - th) * (1.0 + th);
      const double scale = std::sqrt((nu + y * y) * om / (nu + 1.0));
      return t_cdf(nu, t_quantile(nu + 1.0, w) * scale + th * y);
    }
    case CopulaKind::Clayton: {
      const double lv = std::log(v);
      const double t = -th / (th + 1.0) * std::log(w) - th * lv;
      // B = e^t - expm1(-th lv); u = B^(-1/th)
      const double lb = t + std::log1p(-std::expm1(-th * lv) * std::exp(-t));
      return std::exp(-lb / th);
    }
    case CopulaKind::Frank: {
      if (std::abs(th) < kFrankSeriesCut) return w - 0.5 * th * w * (1.0 - w) * (1.0 - 2.0 * v);
      auto pos = [](double t, double ww, double vv) {
        const double num = log_add_exp(std::log1p(-ww) - t * vv, std::log(ww) - t);
        const double den = log_add_exp(std::log(ww), std::log1p(-ww) - t * vv);
        return -(num - den) / t;
      };
      if (th > 0.0) return pos(th, w, v);
      return 1.0 - pos(-th, 1.0 - w, v);
    }
    case CopulaKind::Gumbel: return detail::hinv_numeric(fam, th, w, v);
  }
  return w;
}

/// Kendall's tau of the family at parameter th.
inline double tau(const CopulaFamily& fam, double th) {
  check_param(fam, th);
  switch (fam.kind()) {
    case CopulaKind::Clayton: return th / (th + 2.0);
    case CopulaKind::Gumbel: return 1.0 - 1.0 / th;
    case CopulaKind::Frank: {
      if (th == 0.0) return 0.0;
      const double a = std::abs(th);
      const double t = a < 1e-3 ? a / 9.0 - a * a * a / 900.0 : 1.0 + 4.0 * (debye1(a) - 1.0) / a;
      return th > 0.0 ? t : -t;
    }
    case CopulaKind::Gaussian:
    case CopulaKind::Student: return 2.0 / std::numbers::pi * std::asin(th);
  }
  return 0.0;
}

/// Inverse of tau; throws when the family cannot reach the requested value.
inline double tau_to_param(const CopulaFamily& fam, double t) {
  auto fail = [&] {
    std::ostringstream os;
    os << fam.name() << " copula cannot attain Kendall's tau " << t;
    throw std::domain_error(os.str());
  };
  if (!(t > -1.0 && t < 1.0)) fail();
  switch (fam.kind()) {
    case CopulaKind::Clayton:
      if (t <= 0.0) fail();
      return 2.0 * t / (1.0 - t);
    case CopulaKind::Gumbel:
      if (t < 0.0) fail();
      return 1.0 / (1.0 - t);
    case CopulaKind::Gaussian:
    case CopulaKind::Student: return std::sin(std::numbers::pi * t / 2.0);
    case CopulaKind::Frank: {
      if (t == 0.0) return 0.0;
      constexpr double kMax = 50.0;
      if (std::abs(t) >= tau(fam, kMax)) fail();
      double lo = 0.0;
      double hi = kMax;
      const double target = std::abs(t);
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (tau(fam, mid) < target) lo = mid; else hi = mid;
      }
      const double th = 0.5 * (lo + hi);
      return t > 0.0 ? th : -th;
    }
  }
  return 0.0;
}

}  // namespace copula
}  // namespace fcmm
