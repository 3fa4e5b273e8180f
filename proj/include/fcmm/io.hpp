#pragma once

// CSV ingestion, CSV writing and JSON reports.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcmm/estimate.hpp"
#include "fcmm/harness.hpp"
#include "fcmm/predict.hpp"
#include "fcmm/simulate.hpp"

namespace fcmm {

/// Input problems (bad file, missing column, non-numeric cell).
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // file line of each row (header is line 1)

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw input_error("column '" + name + "' not found in the input header");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      std::ostringstream os;
      os << "row at line " << lineno << " has " << cells.size() << " fields, header has " << t.header.size();
      throw input_error(os.str());
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw input_error("no data rows (empty input)");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open '" + path + "'");
  return read_csv(f);
}

inline double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    std::ostringstream os;
    os << "non-numeric value '" << s << "' in column '" << column << "' at row " << line;
    throw input_error(os.str());
  }
  return v;
}

struct LoadedData {
  ClusteredDataset data;
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;  // rows with a missing required field
};

/// Builds the dataset from named columns. Rows with a missing required field
/// are dropped and counted.
inline LoadedData load_dataset(const CsvTable& t, const std::string& response, const std::string& cluster,
                               const std::vector<std::string>& margin_cols, const std::vector<std::string>& copula_cols) {
  const std::size_t jy = t.column(response), jc = t.column(cluster);
  std::vector<std::size_t> jm, jk;
  for (const auto& c : margin_cols) jm.push_back(t.column(c));
  for (const auto& c : copula_cols) jk.push_back(t.column(c));
  if (t.rows.empty()) throw input_error("no data rows");

  LoadedData out;
  out.rows_read = t.rows.size();
  std::vector<double> y;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> xm, xc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    bool missing = detail::is_missing(row[jy]) || detail::is_missing(row[jc]);
    for (auto j : jm) missing = missing || detail::is_missing(row[j]);
    for (auto j : jk) missing = missing || detail::is_missing(row[j]);
    if (missing) {
      ++out.rows_rejected;
      continue;
    }
    y.push_back(parse_number(row[jy], t.lines[r], response));
    ids.push_back(row[jc]);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < jm.size(); ++i) a.push_back(parse_number(row[jm[i]], t.lines[r], margin_cols[i]));
    for (std::size_t i = 0; i < jk.size(); ++i) b.push_back(parse_number(row[jk[i]], t.lines[r], copula_cols[i]));
    xm.push_back(std::move(a));
    xc.push_back(std::move(b));
  }
  if (y.empty()) throw input_error("no data rows (all rows have missing values)");
  Eigen::MatrixXd m(y.size(), jm.size()), c(y.size(), jk.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < jm.size(); ++j) m(i, j) = xm[i][j];
    for (std::size_t j = 0; j < jk.size(); ++j) c(i, j) = xc[i][j];
  }
  out.data = ClusteredDataset(y, m, c, ids);
  return out;
}

// ---------------------------------------------------------------------------
// Output.

inline std::string fmt17(double x) {
  if (std::isnan(x)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

inline nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

/// Writes a simulated sample as CSV: cluster, y, covariate columns.
inline void write_simulated_csv(std::ostream& os, const SimulatedData& s) {
  os << "cluster,y";
  for (const auto& c : s.columns) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    os << s.cluster[i] << ',' << fmt17(s.y[i]);
    for (Eigen::Index j = 0; j < s.x.cols(); ++j) os << ',' << fmt17(s.x(i, j));
    os << '\n';
  }
}

inline nlohmann::json model_json(const ModelSpec& spec) {
  return {{"copula", spec.copula.name()},
          {"margin", spec.margin.name()},
          {"margin_covariates", spec.margin_covariates},
          {"copula_covariates", spec.copula_covariates}};
}

inline nlohmann::json fit_json(const FitResult& f, const std::vector<LatentEstimate>* latent = nullptr,
                               std::size_t rows_rejected = 0) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t j = 0; j < f.dim(); ++j)
    params.push_back({{"name", f.names[j]}, {"estimate", f.theta.values[j]},
                      {"se", num(f.se.size() ? f.se[j] : std::nan(""))},
                      {"start", f.start.values[j]}});
  nlohmann::json j = {{"model", model_json(f.spec)},
                      {"parameters", params},
                      {"loglik", num(f.loglik)},
                      {"start_loglik", num(f.start_loglik)},
                      {"aic", num(f.aic)},
                      {"bic", num(f.bic)},
                      {"grad_norm", num(f.grad_norm)},
                      {"converged", f.converged},
                      {"iterations", f.iterations},
                      {"lambda", f.lambda},
                      {"nan_encountered", f.nan_encountered},
                      {"se_available", f.se_available},
                      {"pseudo_inverse", f.pseudo_inverse},
                      {"observations", f.observations},
                      {"clusters", f.clusters},
                      {"rows_rejected", rows_rejected},
                      {"quad_nodes", f.quad_nodes},
                      {"message", f.message}};
  if (latent) {
    nlohmann::json l = nlohmann::json::array();
    for (const auto& e : *latent)
      l.push_back({{"cluster", e.label}, {"median", e.median}, {"mean", e.mean}, {"degenerate", e.degenerate}});
    j["latent"] = l;
  }
  return j;
}

/// Parses a fit report's parameter estimates back into a ParamVector.
inline ParamVector params_from_json(const nlohmann::json& j, const ModelSpec& spec) {
  const auto names = spec.parameter_names();
  const auto& ps = j.at("parameters");
  if (ps.size() != names.size()) throw input_error("parameter file does not match the model");
  Eigen::VectorXd v(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (ps[i].at("name").get<std::string>() != names[i])
      throw input_error("parameter file: expected '" + names[i] + "' at position " + std::to_string(i));
    v[i] = ps[i].at("estimate").get<double>();
  }
  return ParamVector(spec.layout(), v);
}

inline HarnessConfig harness_config_from_json(const nlohmann::json& j) {
  HarnessConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) j.at(key).get_to(dst);
  };
  if (!j.contains("dgp")) throw input_error("harness config: missing 'dgp'");
  get("dgp", c.design);
  get("K", c.K);
  get("n", c.n);
  get("replications", c.replications);
  get("seed", c.seed);
  get("start", c.start);
  get("start_tau", c.start_tau);
  get("quad_nodes", c.quad_nodes);
  get("candidates", c.candidates);
  get("new_obs", c.new_obs);
  get("threads", c.threads);
  get("max_iter", c.max_iter);
  if (j.contains("criterion")) c.criterion = criterion_from_name(j.at("criterion").get<std::string>());
  if (j.contains("metrics")) {
    c.params = c.prediction = c.selection = false;
    for (const auto& m : j.at("metrics")) {
      const auto s = m.get<std::string>();
      if (s == "params") c.params = true;
      else if (s == "prediction") c.prediction = true;
      else if (s == "selection") c.selection = true;
      else throw input_error("harness config: unknown metric '" + s + "'");
    }
  }
  return c;
}

inline nlohmann::json harness_json(const HarnessReport& r) {
  const auto& c = r.config;
  nlohmann::json cfg = {{"dgp", c.design},       {"K", c.K},
                        {"n", c.n},              {"replications", c.replications},
                        {"seed", c.seed},        {"start", c.start},
                        {"start_tau", c.start_tau}, {"quad_nodes", c.quad_nodes},
                        {"candidates", r.candidates}, {"criterion", c.criterion == Criterion::AIC ? "aic" : "bic"},
                        {"new_obs", c.new_obs}};
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    cands.push_back({{"name", r.candidates[i]},
                     {"selected_pct", r.selection_pct[i]},
                     {"mean_rmse", num(r.mean_rmse[i])},
                     {"mean_rmse95", num(r.mean_rmse95[i])},
                     {"converged", r.converged[i]},
                     {"failures", r.failures[i]}});
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t j = 0; j < r.parameter_names.size(); ++j)
    params.push_back({{"name", r.parameter_names[j]},
                      {"rmse", num(r.param_rmse[j])},
                      {"bias", num(r.param_bias[j])},
                      {"fits", r.param_count[j]},
                      {"covered", r.coverage[j]}});
  return {{"config", cfg}, {"candidates", cands}, {"parameters", params}, {"coverage_fits", r.coverage_count}};
}

/// One row per replication and candidate.
inline void write_harness_csv(std::ostream& os, const HarnessReport& r) {
  os << "replication,seed,candidate,ok,converged,loglik,aic,bic,rmse,rmse95,chosen\n";
  for (const auto& rep : r.replications)
    for (const auto& c : rep.candidates)
      os << rep.replication << ',' << rep.seed << ',' << c.name << ',' << (c.ok ? 1 : 0) << ','
         << (c.converged ? 1 : 0) << ',' << fmt17(c.loglik) << ',' << fmt17(c.aic) << ',' << fmt17(c.bic) << ','
         << fmt17(c.rmse) << ',' << fmt17(c.rmse95) << ',' << (c.chosen ? 1 : 0) << '\n';
}

}  // namespace fcmm
