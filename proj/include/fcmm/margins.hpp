#pragma once

// Margin families G_a with their covariate links: cdf, left-limit cdf,
// density/pmf and left-inverse quantile.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fcmm/dual.hpp"
#include "fcmm/special.hpp"

namespace fcmm {

enum class MarginKind { Gaussian, Poisson, Bernoulli };
enum class ReferenceMeasure { Lebesgue, Counting };

class MarginFamily {
 public:
  explicit MarginFamily(MarginKind kind = MarginKind::Gaussian) : kind_(kind) {}

  MarginKind kind() const noexcept { return kind_; }
  ReferenceMeasure measure() const noexcept {
    return kind_ == MarginKind::Gaussian ? ReferenceMeasure::Lebesgue : ReferenceMeasure::Counting;
  }
  bool discrete() const noexcept { return measure() == ReferenceMeasure::Counting; }
  bool has_dispersion() const noexcept { return kind_ == MarginKind::Gaussian; }

  std::string name() const {
    switch (kind_) {
      case MarginKind::Gaussian: return "gaussian";
      case MarginKind::Poisson: return "poisson";
      case MarginKind::Bernoulli: return "bernoulli";
    }
    return "unknown";
  }

  static MarginFamily from_name(std::string_view name) {
    if (name == "gaussian") return MarginFamily(MarginKind::Gaussian);
    if (name == "poisson") return MarginFamily(MarginKind::Poisson);
    if (name == "bernoulli") return MarginFamily(MarginKind::Bernoulli);
    throw std::invalid_argument("unknown margin family '" + std::string(name) + "'");
  }

  bool operator==(const MarginFamily&) const = default;

 private:
  MarginKind kind_;
};

/// Margin parameter: (mean, sd) for Gaussian, (rate) for Poisson, (p) for Bernoulli.
struct MarginParam {
  double loc = 0.0;
  double scale = 1.0;
};

/// Regression coefficients of the margin link; the intercept comes first.
struct MarginLink {
  std::vector<double> coefficients;
  std::optional<double> log_dispersion;  // log sd, Gaussian only
};

namespace margin {

inline constexpr double kLogSdFloor = -13.815510557964274;  // log(1e-6)

inline double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

/// Parameter of the margin at covariates x (intercept prepended internally).
inline MarginParam param_at(const MarginFamily& fam, const MarginLink& link,
                            std::span<const double> x) {
  if (link.coefficients.size() != x.size() + 1) {
    std::ostringstream os;
    os << "margin link has " << link.coefficients.size() << " coefficients but "
       << x.size() << " covariates (+ intercept)";
    throw std::invalid_argument(os.str());
  }
  if (fam.has_dispersion() != link.log_dispersion.has_value())
    throw std::invalid_argument(fam.name() + " margin: dispersion entry mismatch");
  double eta = link.coefficients[0];
  for (std::size_t j = 0; j < x.size(); ++j) eta += link.coefficients[j + 1] * x[j];
  switch (fam.kind()) {
    case MarginKind::Gaussian: return {eta, std::exp(*link.log_dispersion)};
    case MarginKind::Poisson: return {std::exp(eta), 0.0};
    case MarginKind::Bernoulli: return {logistic(eta), 0.0};
  }
  return {};
}

inline void check_param(const MarginFamily& fam, const MarginParam& p) {
  bool ok = std::isfinite(p.loc);
  switch (fam.kind()) {
    case MarginKind::Gaussian: ok = ok && p.scale > 0.0 && std::isfinite(p.scale); break;
    case MarginKind::Poisson: ok = ok && p.loc > 0.0; break;
    case MarginKind::Bernoulli: ok = ok && p.loc > 0.0 && p.loc < 1.0; break;
  }
  if (!ok) throw std::domain_error(fam.name() + " margin: invalid parameter");
}

/// Checks that y lies in the support of a counting margin.
inline void check_support(const MarginFamily& fam, double y) {
  switch (fam.kind()) {
    case MarginKind::Gaussian:
      if (!std::isfinite(y)) throw std::domain_error("gaussian margin: response is not finite");
      break;
    case MarginKind::Poisson:
      if (!(y >= 0.0 && y == std::floor(y)))
        throw std::domain_error("poisson margin: response must be a non-negative integer");
      break;
    case MarginKind::Bernoulli:
      if (y != 0.0 && y != 1.0) throw std::domain_error("bernoulli margin: response must be 0 or 1");
      break;
  }
}

inline double cdf(const MarginFamily& fam, const MarginParam& p, double y) {
  check_param(fam, p);
  switch (fam.kind()) {
    case MarginKind::Gaussian: return norm_cdf((y - p.loc) / p.scale);
    case MarginKind::Poisson: return y < 0.0 ? 0.0 : poisson_cdf(std::floor(y), p.loc);
    case MarginKind::Bernoulli: return y < 0.0 ? 0.0 : (y < 1.0 ? 1.0 - p.loc : 1.0);
  }
  return 0.0;
}

/// G(y-): equals cdf for Lebesgue margins, cdf(y - 1) on the integers.
inline double cdf_left(const MarginFamily& fam, const MarginParam& p, double y) {
  if (!fam.discrete()) return cdf(fam, p, y);
  const double fl = std::floor(y);
  return cdf(fam, p, fl == y ? y - 1.0 : fl);
}

inline double pdf_or_pmf(const MarginFamily& fam, const MarginParam& p, double y) {
  check_param(fam, p);
  switch (fam.kind()) {
    case MarginKind::Gaussian: return norm_pdf((y - p.loc) / p.scale) / p.scale;
    case MarginKind::Poisson:
      if (y < 0.0 || y != std::floor(y)) return 0.0;
      return std::exp(poisson_log_pmf(y, p.loc));
    case MarginKind::Bernoulli:
      if (y == 0.0) return 1.0 - p.loc;
      if (y == 1.0) return p.loc;
      return 0.0;
  }
  return 0.0;
}

inline double mean(const MarginFamily& fam, const MarginParam& p) {
  (void)fam;
  return p.loc;
}

/// Left-inverse quantile inf{y : G(y) >= u}.
inline double quantile(const MarginFamily& fam, const MarginParam& p, double u) {
  check_param(fam, p);
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("margin quantile: u must be inside (0, 1)");
  switch (fam.kind()) {
    case MarginKind::Gaussian: return p.loc + p.scale * norm_quantile(u);
    case MarginKind::Bernoulli: return u <= 1.0 - p.loc ? 0.0 : 1.0;
    case MarginKind::Poisson: {
      const double rate = p.loc;
      const double cap = std::ceil(rate + 40.0 * std::sqrt(rate));
      double y = std::floor(rate);
      if (poisson_cdf(y, rate) >= u) {
        while (y > 0.0 && poisson_cdf(y - 1.0, rate) >= u) y -= 1.0;
        return y;
      }
      while (y < cap && poisson_cdf(y, rate) < u) y += 1.0;
      return y;
    }
  }
  return 0.0;
}

/// Log density/mass at y and the cdf values G(y), G(y-) as functions of the
/// linear predictor eta and log-sd (Gaussian only).
template <class T>
struct Evaluation {
  T log_mass;
  T u_hi;
  T u_lo;
};

template <class T>
Evaluation<T> evaluate(const MarginFamily& fam, const T& eta, const T& log_sd, double y) {
  using std::exp;
  using std::log1p;
  switch (fam.kind()) {
    case MarginKind::Gaussian: {
      const T z = (y - eta) / exp(log_sd);
      const T u = norm_cdf(z);
      return {-kLogSqrt2Pi - log_sd - 0.5 * z * z, u, u};
    }
    case MarginKind::Poisson: {
      const T rate = exp(eta);
      const T lpmf = y * eta - rate - std::lgamma(y + 1.0);
      return {lpmf, poisson_cdf(y, rate), y > 0.0 ? poisson_cdf(y - 1.0, rate) : T(0.0)};
    }
    case MarginKind::Bernoulli: {
      // 1 - p = 1 / (1 + e^eta)
      const T q = 1.0 / (1.0 + exp(eta));
      auto softplus = [](const T& s) {
        using std::exp;
        using std::log1p;
        return value(s) > 0.0 ? s + log1p(exp(-s)) : log1p(exp(s));
      };
      if (y == 0.0) return {-softplus(eta), q, T(0.0)};
      return {-softplus(-eta), T(1.0), q};
    }
  }
  return {T(0.0), T(0.0), T(0.0)};
}

}  // namespace margin
}  // namespace fcmm
