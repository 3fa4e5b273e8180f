// fcmm: fit, predict, simulate, select and curves for factor copula mixed models.
//
// Exit codes: 0 success, 1 input or configuration error, 2 fit did not converge
// (the report is still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "fcmm/fcmm.hpp"

namespace {

using namespace fcmm;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

struct ModelArgs {
  std::string input;
  std::string copula = "gaussian";
  std::string margin = "gaussian";
  std::string cluster_col = "cluster";
  std::string response_col = "y";
  std::vector<std::string> margin_covariates;
  std::vector<std::string> copula_covariates;
};

struct EstimationArgs {
  int quad_nodes = 100;
  std::string start = "auto";
  double start_tau = 0.5;
  std::string criterion = "bic";
  int max_iter = 500;
  double tol_grad = 0.0;  // 0: default
  int threads = 1;
};

void add_model(CLI::App* app, ModelArgs& m, bool with_copula = true) {
  app->add_option("input", m.input, "CSV file with a header row")->required();
  if (with_copula) app->add_option("--copula", m.copula, "clayton|frank|gumbel|gaussian|student")->capture_default_str();
  app->add_option("--margin", m.margin, "gaussian|poisson|bernoulli")->capture_default_str();
  app->add_option("--cluster-col", m.cluster_col)->capture_default_str();
  app->add_option("--response-col", m.response_col)->capture_default_str();
  app->add_option("--margin-covariates", m.margin_covariates, "comma separated column names")->delimiter(',');
  app->add_option("--copula-covariates", m.copula_covariates, "comma separated column names")->delimiter(',');
}

void add_estimation(CLI::App* app, EstimationArgs& e) {
  app->add_option("--quad-nodes", e.quad_nodes, "quadrature nodes for the latent factor")
      ->check(CLI::Range(2, 400))
      ->capture_default_str();
  app->add_option("--start", e.start, "auto, or a JSON fit report holding starting values")->capture_default_str();
  app->add_option("--start-tau", e.start_tau, "Kendall's tau used by the auto start")
      ->check(CLI::Range(-0.95, 0.95))
      ->capture_default_str();
  app->add_option("--criterion", e.criterion, "aic|bic")->check(CLI::IsMember({"aic", "bic"}))->capture_default_str();
  app->add_option("--max-iter", e.max_iter)->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--tol-grad", e.tol_grad, "score sup-norm tolerance (default 1e-5*sqrt(N))");
  app->add_option("--threads", e.threads)->check(CLI::PositiveNumber)->capture_default_str();
}

ModelSpec make_spec(const ModelArgs& m) {
  ModelSpec s;
  s.copula = CopulaFamily::from_name(m.copula);
  s.margin = MarginFamily::from_name(m.margin);
  s.margin_covariates = m.margin_covariates;
  s.copula_covariates = m.copula_covariates;
  return s;
}

FitOptions make_options(const EstimationArgs& e) {
  FitOptions o;
  o.quad_nodes = e.quad_nodes;
  o.max_iter = e.max_iter;
  o.start_tau = e.start_tau;
  o.threads = e.threads;
  if (e.tol_grad > 0.0) o.tol_grad = e.tol_grad;
  return o;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw input_error("'" + path + "' is not valid JSON: " + ex.what());
  }
}

// Writes to the file named by `out`, or to stdout when empty.
template <class F>
void emit(const std::string& out, F&& write) {
  if (out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(out);
  if (!os) throw input_error("cannot write '" + out + "'");
  write(os);
}

std::optional<ParamVector> load_start(const std::string& start, const ModelSpec& spec) {
  if (start == "auto") return std::nullopt;
  return params_from_json(read_json(start), spec);
}

struct Loaded {
  ModelSpec spec;
  LoadedData data;
};

Loaded load(const ModelArgs& m) {
  Loaded l;
  l.spec = make_spec(m);
  const auto table = read_csv_file(m.input);
  l.data = load_dataset(table, m.response_col, m.cluster_col, m.margin_covariates, m.copula_covariates);
  check_compatible(l.spec, l.data.data);
  return l;
}

int cmd_fit(const ModelArgs& m, const EstimationArgs& e, const std::string& out) {
  const auto l = load(m);
  const FitResult f = fit(l.spec, l.data.data, make_options(e), load_start(e.start, l.spec));
  std::vector<LatentEstimate> latent;
  if (std::isfinite(f.loglik)) {
    const Likelihood lik(l.spec, l.data.data, latent_rule(l.spec.copula, e.quad_nodes));
    latent = latent_posteriors(lik, f.theta.values, e.threads);
  }
  const auto j = fit_json(f, &latent, l.data.rows_rejected);
  emit(out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  if (!f.converged) {
    std::cerr << "fit did not converge: " << f.message << '\n';
    return kNotConverged;
  }
  return kOk;
}

int cmd_predict(const ModelArgs& m, const EstimationArgs& e, const std::string& params, const std::string& newdata,
                std::vector<double> quantiles, const std::string& out) {
  for (double q : quantiles)
    if (!(q > 0.0 && q < 1.0)) throw input_error("quantile levels must lie inside (0, 1)");
  const auto l = load(m);
  bool converged = true;
  ParamVector theta;
  if (!params.empty()) {
    theta = params_from_json(read_json(params), l.spec);
  } else {
    const FitResult f = fit(l.spec, l.data.data, make_options(e), load_start(e.start, l.spec));
    if (!std::isfinite(f.loglik)) throw input_error("fit failed: " + f.message);
    converged = f.converged;
    theta = f.theta;
  }
  const Likelihood lik(l.spec, l.data.data, latent_rule(l.spec.copula, e.quad_nodes));
  const auto latent = latent_posteriors(lik, theta.values, e.threads);
  std::unordered_map<std::string, std::size_t> by_label;
  for (std::size_t k = 0; k < latent.size(); ++k) by_label[latent[k].label] = k;

  // rows to predict: the new-data file, or the fitted rows themselves
  const auto table = read_csv_file(newdata.empty() ? m.input : newdata);
  const std::size_t jc = table.column(m.cluster_col);
  std::vector<std::size_t> jm, jk;
  for (const auto& c : m.margin_covariates) jm.push_back(table.column(c));
  for (const auto& c : m.copula_covariates) jk.push_back(table.column(c));

  emit(out, [&](std::ostream& os) {
    os << "row,cluster,v_median,v_mean,mean";
    for (double q : quantiles) os << ",q" << fmt17(q);
    os << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      std::vector<double> xm, xc;
      bool missing = detail::is_missing(row[jc]);
      for (auto j : jm) missing = missing || detail::is_missing(row[j]);
      for (auto j : jk) missing = missing || detail::is_missing(row[j]);
      if (missing) continue;
      for (std::size_t i = 0; i < jm.size(); ++i) xm.push_back(parse_number(row[jm[i]], table.lines[r], m.margin_covariates[i]));
      for (std::size_t i = 0; i < jk.size(); ++i) xc.push_back(parse_number(row[jk[i]], table.lines[r], m.copula_covariates[i]));
      const auto p = point_params(l.spec, theta, xm, xc);
      os << table.lines[r] << ',' << csv_quote(row[jc]);
      const auto it = by_label.find(row[jc]);
      if (it == by_label.end()) {
        // unseen cluster: the latent factor is integrated out
        os << ",NA,NA," << fmt17(margin::mean(l.spec.margin, p.margin));
        for (double q : quantiles) os << ',' << fmt17(margin::quantile(l.spec.margin, p.margin, q));
      } else {
        const auto& le = latent[it->second];
        os << ',' << fmt17(le.median) << ',' << fmt17(le.mean) << ',' << fmt17(cond_mean(l.spec, p, le.median));
        for (double q : quantiles) os << ',' << fmt17(cond_quantile(l.spec, p, q, le.median));
      }
      os << '\n';
    }
  });
  return converged ? kOk : kNotConverged;
}

int cmd_simulate(const std::string& dgp, int K, int n, std::uint64_t seed, int new_obs, const std::string& config,
                 const std::string& out, const std::string& table, int threads) {
  if (!config.empty()) {
    HarnessConfig c = harness_config_from_json(read_json(config));
    if (threads > 1) c.threads = threads;
    const auto rep = run_harness(c);
    emit(out, [&](std::ostream& os) { os << harness_json(rep).dump(2) << '\n'; });
    if (!table.empty()) emit(table, [&](std::ostream& os) { write_harness_csv(os, rep); });
    return kOk;
  }
  if (dgp.empty()) throw input_error("simulate needs --dgp or --config");
  if (K < 1) throw input_error("--K must be positive");
  const auto sim = simulate_design(dgp, K, n > 0 ? n : default_cluster_size(dgp), seed, new_obs);
  emit(out, [&](std::ostream& os) { write_simulated_csv(os, sim); });
  if (!table.empty()) {
    // held-out rows in the same layout
    SimulatedData held = sim;
    held.x = sim.x_new;
    held.y = sim.y_new;
    held.cluster = sim.cluster_new;
    emit(table, [&](std::ostream& os) { write_simulated_csv(os, held); });
  }
  return kOk;
}

int cmd_select(const ModelArgs& m, const EstimationArgs& e, const std::vector<std::string>& candidates,
               const std::string& out) {
  const auto l = load(m);
  std::vector<ModelSpec> specs;
  for (const auto& c : candidates) {
    ModelSpec s = l.spec;
    s.copula = CopulaFamily::from_name(c);
    specs.push_back(s);
  }
  const Criterion crit = criterion_from_name(e.criterion);
  FitOptions opt = make_options(e);
  const auto ranked = select(specs, l.data.data, crit, opt, e.threads);
  emit(out, [&](std::ostream& os) {
    os << "rank,copula,margin,parameters,loglik,aic,bic,converged,chosen\n";
    for (const auto& r : ranked)
      os << r.rank << ',' << r.fit.spec.copula.name() << ',' << r.fit.spec.margin.name() << ',' << r.fit.dim() << ','
         << fmt17(r.fit.loglik) << ',' << fmt17(r.fit.aic) << ',' << fmt17(r.fit.bic) << ','
         << (r.fit.converged ? 1 : 0) << ',' << (r.rank == 1 ? 1 : 0) << '\n';
  });
  return kOk;
}

int cmd_curves(const ModelArgs& m, const std::string& params, const std::vector<double>& theta_in,
               std::vector<double> grid, const std::vector<double>& vs, const std::string& out) {
  const ModelSpec spec = make_spec(m);
  ParamVector theta;
  if (!params.empty()) {
    theta = params_from_json(read_json(params), spec);
  } else {
    if (theta_in.size() != spec.layout().size())
      throw input_error("--theta needs " + std::to_string(spec.layout().size()) + " values for this model");
    theta = ParamVector(spec.layout(), Eigen::Map<const Eigen::VectorXd>(theta_in.data(), theta_in.size()));
  }
  if (grid.size() != 3 || !(grid[2] >= 2)) throw input_error("--x-grid takes from,to,count with count >= 2");
  std::vector<double> xs(static_cast<std::size_t>(grid[2]));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = grid[0] + (grid[1] - grid[0]) * i / (xs.size() - 1.0);
  const Eigen::MatrixXd c = link_curve(spec, theta, xs, vs);
  emit(out, [&](std::ostream& os) {
    os << "x,v,logit\n";
    for (std::size_t j = 0; j < vs.size(); ++j)
      for (std::size_t i = 0; i < xs.size(); ++i) os << fmt17(xs[i]) << ',' << fmt17(vs[j]) << ',' << fmt17(c(i, j)) << '\n';
  });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor copula mixed models for clustered data"};
  app.require_subcommand(1);
  std::string out;

  ModelArgs fm;
  EstimationArgs fe;
  auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit, JSON report");
  add_model(fit_cmd, fm);
  add_estimation(fit_cmd, fe);
  fit_cmd->add_option("--out", out, "report path (default stdout)");

  ModelArgs pm;
  EstimationArgs pe;
  std::string params, newdata;
  std::vector<double> quantiles{0.5};
  auto* predict_cmd = app.add_subcommand("predict", "latent factor estimates and conditional predictions, CSV");
  add_model(predict_cmd, pm);
  add_estimation(predict_cmd, pe);
  predict_cmd->add_option("--params", params, "fit report to take estimates from (otherwise fit first)");
  predict_cmd->add_option("--new", newdata, "CSV of rows to predict (default: the input rows)");
  predict_cmd->add_option("--quantiles", quantiles, "conditional quantile levels")->delimiter(',');
  predict_cmd->add_option("--out", out);

  std::string dgp, config, table;
  int K = 50, n = 0, new_obs = 0, sim_threads = 1;
  std::uint64_t seed = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a design, or run a replication harness with --config");
  sim_cmd->add_option("--dgp", dgp, "exp1..exp8, dgp1..dgp12");
  sim_cmd->add_option("--K", K, "clusters")->capture_default_str();
  sim_cmd->add_option("--n", n, "observations per cluster (default by design)");
  sim_cmd->add_option("--seed", seed)->capture_default_str();
  sim_cmd->add_option("--new-obs", new_obs, "held-out observations, written to --table");
  sim_cmd->add_option("--config", config, "harness config (JSON)");
  sim_cmd->add_option("--table", table, "held-out rows, or the per-replication harness table");
  sim_cmd->add_option("--threads", sim_threads)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", out);

  ModelArgs sm;
  EstimationArgs se;
  std::vector<std::string> candidates{"clayton", "frank", "gumbel", "gaussian", "student"};
  auto* select_cmd = app.add_subcommand("select", "rank copula candidates by AIC or BIC, CSV");
  add_model(select_cmd, sm, false);
  add_estimation(select_cmd, se);
  select_cmd->add_option("--candidates", candidates, "copula families")->delimiter(',')->capture_default_str();
  select_cmd->add_option("--out", out);

  ModelArgs cm;
  cm.margin = "bernoulli";
  std::string curve_params;
  std::vector<double> theta, grid{0.0, 1.0, 101.0}, vs{0.1, 0.5, 0.9};
  auto* curves_cmd = app.add_subcommand("curves", "logit P(Y=1 | x, v) curves for a bernoulli margin, CSV");
  curves_cmd->add_option("--copula", cm.copula)->capture_default_str();
  curves_cmd->add_option("--margin", cm.margin)->capture_default_str();
  curves_cmd->add_option("--margin-covariates", cm.margin_covariates)->delimiter(',');
  curves_cmd->add_option("--copula-covariates", cm.copula_covariates)->delimiter(',');
  curves_cmd->add_option("--params", curve_params, "fit report with the estimates");
  curves_cmd->add_option("--theta", theta, "parameter vector in report order")->delimiter(',');
  curves_cmd->add_option("--x-grid", grid, "from,to,count")->delimiter(',')->capture_default_str();
  curves_cmd->add_option("--v", vs, "latent values")->delimiter(',')->capture_default_str();
  curves_cmd->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fm, fe, out);
    if (*predict_cmd) return cmd_predict(pm, pe, params, newdata, quantiles, out);
    if (*sim_cmd) return cmd_simulate(dgp, K, n, seed, new_obs, config, out, table, sim_threads);
    if (*select_cmd) return cmd_select(sm, se, candidates, out);
    if (*curves_cmd) return cmd_curves(cm, curve_params, theta, grid, vs, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}
