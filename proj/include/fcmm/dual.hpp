#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
//
// The likelihood only ever needs derivatives with respect to three scalars per
// observation (margin predictor, margin log-scale, copula predictor), so a
// fixed-size tangent keeps everything on the stack. All copula and margin
// kernels are written as templates over the scalar type and instantiated with
// either double or Dual<N>.

#include <array>
#include <cmath>
#include <cstddef>

namespace fcmm {

template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double x) : v(x) {}  // NOLINT: implicit lift of constants

  static Dual variable(double x, std::size_t slot) {
    Dual r(x);
    r.d[slot] = 1.0;
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
  Dual& operator+=(double o) {
    v += o;
    return *this;
  }
  Dual& operator-=(double o) {
    v -= o;
    return *this;
  }
  Dual& operator*=(double o) {
    v *= o;
    for (auto& x : d) x *= o;
    return *this;
  }
  Dual& operator/=(double o) { return *this *= (1.0 / o); }
};

// Applies the chain rule for a unary function with value fx and derivative dfx.
template <std::size_t N>
inline Dual<N> chain(const Dual<N>& x, double fx, double dfx) {
  Dual<N> r(fx);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = dfx * x.d[i];
  return r;
}

template <std::size_t N>
inline Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}

template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N>
inline Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N>
inline Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, double b) { return a += b; }
template <std::size_t N>
inline Dual<N> operator+(double a, Dual<N> b) { return b += a; }
template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, double b) { return a -= b; }
template <std::size_t N>
inline Dual<N> operator-(double a, const Dual<N>& b) { return -b + a; }
template <std::size_t N>
inline Dual<N> operator*(Dual<N> a, double b) { return a *= b; }
template <std::size_t N>
inline Dual<N> operator*(double a, Dual<N> b) { return b *= a; }
template <std::size_t N>
inline Dual<N> operator/(Dual<N> a, double b) { return a /= b; }
template <std::size_t N>
inline Dual<N> operator/(double a, const Dual<N>& b) {
  const double q = a / b.v;
  return chain(b, q, -q / b.v);
}

template <std::size_t N>
inline bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N>
inline bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }

inline double value(double x) { return x; }
template <std::size_t N>
inline double value(const Dual<N>& x) { return x.v; }

template <std::size_t N>
inline Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return chain(x, e, e);
}
template <std::size_t N>
inline Dual<N> expm1(const Dual<N>& x) {
  return chain(x, std::expm1(x.v), std::exp(x.v));
}
template <std::size_t N>
inline Dual<N> log(const Dual<N>& x) {
  return chain(x, std::log(x.v), 1.0 / x.v);
}
template <std::size_t N>
inline Dual<N> log1p(const Dual<N>& x) {
  return chain(x, std::log1p(x.v), 1.0 / (1.0 + x.v));
}
template <std::size_t N>
inline Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.v);
  return chain(x, s, 0.5 / s);
}
template <std::size_t N>
inline Dual<N> tanh(const Dual<N>& x) {
  const double t = std::tanh(x.v);
  return chain(x, t, 1.0 - t * t);
}
template <std::size_t N>
inline Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}
template <std::size_t N>
inline Dual<N> pow(const Dual<N>& x, double p) {
  const double f = std::pow(x.v, p);
  return chain(x, f, p * std::pow(x.v, p - 1.0));
}

// Numerically stable log(e^a + e^b).
template <class T>
inline T log_add_exp(const T& a, const T& b) {
  using std::exp;
  using std::log1p;
  if (value(a) == -INFINITY) return b;
  if (value(b) == -INFINITY) return a;
  return value(a) >= value(b) ? a + log1p(exp(b - a)) : b + log1p(exp(a - b));
}

}  // namespace fcmm
