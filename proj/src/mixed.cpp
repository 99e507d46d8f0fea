#include "rcps/mixed.hpp"

#include <cmath>

#include "rcps/errors.hpp"
#include "rcps/inference.hpp"
#include "rcps/penalty.hpp"

namespace rcps {

namespace {

void validate(const MixedSpec& spec) {
  if (spec.sigma2.size() < 1) throw config_error("pql: sigma2 list is empty");
  for (Eigen::Index j = 0; j < spec.sigma2.size(); ++j)
    if (!(spec.sigma2[j] > 0.0) || !std::isfinite(spec.sigma2[j]))
      throw config_error("pql: sigma2 entries must be positive and finite");
  if (spec.knot_count < 2)
    throw config_error("pql: knot_count must be >= 2 so the hinge block is nonempty");
  if (!(spec.ridge_tilde > 0.0)) throw config_error("pql: ridge_tilde must be positive");
}

}  // namespace

GamSpec equivalent_gam_spec(const MixedSpec& spec, int n_covariates) {
  validate(spec);
  if (spec.sigma2.size() != n_covariates)
    throw config_error("pql: sigma2 length does not match covariate count");
  GamSpec g;
  g.family = spec.family;
  const double k2p = std::pow(static_cast<double>(spec.knot_count), 2 * spec.degree);
  g.penalty.order = spec.degree + 1;
  g.penalty.ridge = spec.ridge_tilde;
  g.penalty.lambdas.resize(spec.sigma2.size());
  for (Eigen::Index j = 0; j < spec.sigma2.size(); ++j) {
    g.bases.emplace_back(spec.degree, spec.knot_count, spec.degree + 1);
    g.penalty.lambdas[j] = k2p / spec.sigma2[j];
  }
  g.max_iter = spec.max_iter;
  g.tol = spec.tol;
  g.normalize = spec.normalize;
  return g;
}

double pql_objective(const MixedSpec& spec, const GamData& data,
                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  return penalized_loglik(equivalent_gam_spec(spec, static_cast<int>(data.covariates.cols())),
                          data, b);
}

PqlFit pql_fit(const MixedSpec& spec, const GamData& data) {
  const GamSpec g = equivalent_gam_spec(spec, static_cast<int>(data.covariates.cols()));
  PqlFit fit;
  fit.bfit = fit_rcps(g, data);

  const int D = fit.bfit.n_covariates();
  const int p = spec.degree;
  const int K = spec.knot_count;
  fit.beta.resize(D);
  fit.u.resize(D);
  fit.L.resize(D);
  double worst = 0.0;
  for (int j = 0; j < D; ++j) {
    fit.L[j] = change_of_basis(fit.bfit.bases[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd theta = fit.L[j] * fit.bfit.block(j);
    fit.beta[j] = theta.head(p + 1);
    fit.u[j] = theta.tail(K - 1);
    for (int i = 0; i <= 200; ++i) {
      const double x = static_cast<double>(i) / 200.0;
      const double s_val = truncated_power_vector(p, K, x).dot(theta);
      const double b_val =
          curve_value(fit.bfit.bases[static_cast<std::size_t>(j)], fit.bfit.block(j), x);
      worst = std::max(worst, std::fabs(s_val - b_val));
    }
  }
  fit.reparam_residual = worst;
  return fit;
}

double pql_bias_sigma(const PqlFit& fit, const GamData& data, int j, double x) {
  const auto& bfit = fit.bfit;
  if (j < 0 || j >= bfit.n_covariates()) throw std::domain_error("pql_bias_sigma: index");
  const auto& spec_j = bfit.bases[static_cast<std::size_t>(j)];
  const double n = static_cast<double>(data.covariates.rows());
  // unpenalized weighted Gram G-hat_j = Gamma-hat_j(0)
  const GammaHat gh = gamma_hat(bfit, data, j, 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(gh.without);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd jittered = gh.without;
    jittered.diagonal().array() += 1e-12;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success)
      throw numeric_error("pql_bias_sigma: weighted Gram is singular");
  }
  const Eigen::MatrixXd Dm = difference_matrix(spec_j.penalty_order, spec_j.size());
  const double lambda = bfit.penalty.lambdas[j];  // K^{2p}/sigma_j^2
  const Eigen::VectorXd rhs = (lambda / n) * (Dm.transpose() * (Dm * bfit.block(j)));
  return -basis_vector(spec_j, x).dot(llt.solve(rhs));
}

double pql_variance(const PqlFit& fit, const GamData& data, int j, double x) {
  return ComponentInference(fit.bfit, data, j).variance(x);
}

double pql_psi(const PqlFit& fit, const GamData& data, int j, double x) {
  return ComponentInference(fit.bfit, data, j).psi(x);
}

}  // namespace rcps
