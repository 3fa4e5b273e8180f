// Simulates the Exp2 design (Clayton copula whose parameter moves with a
// uniform covariate, N(10, 1) margins), fits it, and predicts a few new
// observations from the estimated cluster effects.

#include <cstdio>

#include "fcmm/fcmm.hpp"

int main() {
  using namespace fcmm;

  const SimulatedData sim = simulate_design("exp2", 100, 5, 11, 5);
  const ModelSpec spec = sim.truth;
  const ClusteredDataset data = make_dataset(sim, spec);

  const FitResult f = fit(spec, data);
  std::printf("%s  loglik %.4f  bic %.4f  converged %s (%d iterations)\n", spec.label().c_str(), f.loglik, f.bic,
              f.converged ? "yes" : "no", f.iterations);
  for (std::size_t j = 0; j < f.dim(); ++j)
    std::printf("  %-22s %9.4f  se %.4f  true %8.4f\n", f.names[j].c_str(), f.theta.values[j], f.se[j],
                sim.theta.values[j]);

  const Likelihood lik(spec, data, latent_rule(spec.copula, 100));
  const auto latent = latent_posteriors(lik, f.theta.values);

  const RowMatrix xm = select_columns(sim.x_new, sim.columns, spec.margin_covariates);
  const RowMatrix xc = select_columns(sim.x_new, sim.columns, spec.copula_covariates);
  std::puts("\n  cluster   V median   V true   E(Y|x,V)      y");
  for (std::size_t j = 0; j < sim.y_new.size(); ++j) {
    const int k = sim.cluster_new[j] - 1;
    const double v = latent[k].median;
    const double m = cond_mean(spec, f.theta, {xm.row(j).data(), (std::size_t)xm.cols()},
                               {xc.row(j).data(), (std::size_t)xc.cols()}, v);
    std::printf("  %7d   %8.4f  %7.4f   %8.4f  %8.4f\n", k + 1, v, sim.latent[k], m, sim.y_new[j]);
  }
}
