#pragma once

// Clustered data, model specification and the flat parameter vector
// theta = (alpha, beta).

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "fcmm/copulas.hpp"
#include "fcmm/margins.hpp"

namespace fcmm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Responses, design matrices and cluster membership, with rows grouped by
/// cluster. Clusters are numbered 0..K-1 in order of first appearance and
/// rows keep their relative order inside a cluster. Both design matrices
/// carry a leading intercept column.
class ClusteredDataset {
 public:
  ClusteredDataset() = default;

  ClusteredDataset(const std::vector<double>& y, const Eigen::MatrixXd& x_margin,
                   const Eigen::MatrixXd& x_copula, const std::vector<std::string>& cluster) {
    const std::size_t n = y.size();
    if (static_cast<std::size_t>(x_margin.rows()) != n ||
        static_cast<std::size_t>(x_copula.rows()) != n || cluster.size() != n)
      throw std::invalid_argument("dataset: response, designs and cluster ids differ in length");
    if (n == 0) throw std::invalid_argument("dataset: no observations");

    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = index.try_emplace(cluster[i], members.size());
      if (fresh) {
        members.emplace_back();
        labels_.push_back(cluster[i]);
      }
      members[it->second].push_back(i);
    }

    y_.resize(n);
    xm_.resize(n, x_margin.cols() + 1);
    xc_.resize(n, x_copula.cols() + 1);
    row_.resize(n);
    offsets_.assign(1, 0);
    std::size_t r = 0;
    for (const auto& m : members) {
      for (std::size_t i : m) {
        y_[r] = y[i];
        xm_(r, 0) = 1.0;
        xc_(r, 0) = 1.0;
        xm_.row(r).tail(x_margin.cols()) = x_margin.row(i);
        xc_.row(r).tail(x_copula.cols()) = x_copula.row(i);
        row_[r] = i;
        ++r;
      }
      offsets_.push_back(r);
    }
  }

  /// Convenience overload for integer cluster ids.
  ClusteredDataset(const std::vector<double>& y, const Eigen::MatrixXd& x_margin,
                   const Eigen::MatrixXd& x_copula, const std::vector<int>& cluster)
      : ClusteredDataset(y, x_margin, x_copula, to_labels(cluster)) {}

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t clusters() const noexcept { return labels_.size(); }
  std::size_t begin(std::size_t k) const { return offsets_[k]; }
  std::size_t end(std::size_t k) const { return offsets_[k + 1]; }
  std::size_t cluster_size(std::size_t k) const { return offsets_[k + 1] - offsets_[k]; }

  const std::vector<double>& y() const noexcept { return y_; }
  const RowMatrix& x_margin() const noexcept { return xm_; }
  const RowMatrix& x_copula() const noexcept { return xc_; }
  const std::vector<std::string>& cluster_labels() const noexcept { return labels_; }
  /// Position of each (reordered) row in the caller's original input.
  const std::vector<std::size_t>& original_row() const noexcept { return row_; }

  /// Cluster-size imbalance diagnostic sum(n_k^2) / N.
  double lambda() const {
    double s = 0.0;
    for (std::size_t k = 0; k < clusters(); ++k) {
      const double nk = static_cast<double>(cluster_size(k));
      s += nk * nk;
    }
    return s / static_cast<double>(size());
  }

 private:
  static std::vector<std::string> to_labels(const std::vector<int>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(std::to_string(id));
    return out;
  }

  std::vector<double> y_;
  RowMatrix xm_;
  RowMatrix xc_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> row_;
};

/// Positions of the margin coefficients, the log-sd entry and the copula
/// coefficients inside theta.
struct ParamLayout {
  std::size_t margin_coefs = 1;
  bool dispersion = false;
  std::size_t copula_coefs = 1;

  std::size_t size() const noexcept { return margin_coefs + (dispersion ? 1 : 0) + copula_coefs; }
  std::size_t dispersion_index() const noexcept { return margin_coefs; }
  std::size_t copula_offset() const noexcept { return margin_coefs + (dispersion ? 1 : 0); }
  bool operator==(const ParamLayout&) const = default;
};

struct ModelSpec {
  CopulaFamily copula;
  MarginFamily margin;
  std::vector<std::string> margin_covariates;
  std::vector<std::string> copula_covariates;

  ParamLayout layout() const {
    return {margin_covariates.size() + 1, margin.has_dispersion(), copula_covariates.size() + 1};
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names{"margin.(Intercept)"};
    for (const auto& c : margin_covariates) names.push_back("margin." + c);
    if (margin.has_dispersion()) names.emplace_back("margin.log_sd");
    names.emplace_back("copula.(Intercept)");
    for (const auto& c : copula_covariates) names.push_back("copula." + c);
    return names;
  }

  std::string label() const { return copula.name() + "/" + margin.name(); }
};

/// theta = (alpha, beta) with its layout.
struct ParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;

  ParamVector() = default;
  ParamVector(ParamLayout l, Eigen::VectorXd v) : layout(l), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != layout.size())
      throw std::invalid_argument("parameter vector length does not match the model");
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) throw std::domain_error("parameter vector has non-finite entries");
  }

  MarginLink margin_link() const {
    MarginLink link;
    link.coefficients.assign(values.data(), values.data() + layout.margin_coefs);
    if (layout.dispersion) link.log_dispersion = values[layout.dispersion_index()];
    return link;
  }

  Eigen::VectorXd copula_coefficients() const {
    return values.segment(layout.copula_offset(), layout.copula_coefs);
  }
};

/// Checks that the dataset's design widths match the model.
inline void check_compatible(const ModelSpec& spec, const ClusteredDataset& data) {
  const auto l = spec.layout();
  if (static_cast<std::size_t>(data.x_margin().cols()) != l.margin_coefs ||
      static_cast<std::size_t>(data.x_copula().cols()) != l.copula_coefs) {
    std::ostringstream os;
    os << "dataset designs (" << data.x_margin().cols() << ", " << data.x_copula().cols()
       << " columns) do not match model " << spec.label() << " (" << l.margin_coefs << ", "
       << l.copula_coefs << ")";
    throw std::invalid_argument(os.str());
  }
  for (std::size_t i = 0; i < data.size(); ++i) margin::check_support(spec.margin, data.y()[i]);
}

}  // namespace fcmm
