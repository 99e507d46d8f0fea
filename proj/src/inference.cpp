#include "rcps/inference.hpp"

#include <cmath>
#include <string>

#include "rcps/errors.hpp"
#include "rcps/penalty.hpp"
#include "rcps/stats.hpp"

namespace rcps {

namespace {

Eigen::VectorXd unit_column(const GamFit& fit, const GamData& data, int j) {
  Eigen::VectorXd u(data.covariates.rows());
  const auto& nrm = fit.normalizers[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u[i] = nrm.to_unit(data.covariates(i, j));
    if (u[i] < 0.0 && u[i] > -1e-12) u[i] = 0.0;
    if (u[i] > 1.0 && u[i] < 1.0 + 1e-12) u[i] = 1.0;
  }
  return u;
}

Eigen::MatrixXd weighted_gram(const GamFit& fit, const GamData& data, int j) {
  const Eigen::MatrixXd Zj =
      design_matrix(fit.bases[static_cast<std::size_t>(j)], unit_column(fit, data, j));
  return Zj.transpose() * fit.weights.asDiagonal() * Zj / static_cast<double>(Zj.rows());
}

}  // namespace

GammaHat gamma_hat(const GamFit& fit, const GamData& data, int j, double lambda) {
  if (j < 0 || j >= fit.n_covariates()) throw std::domain_error("gamma_hat: covariate index");
  const auto& spec = fit.bases[static_cast<std::size_t>(j)];
  const double n = static_cast<double>(data.covariates.rows());
  GammaHat g;
  g.without = weighted_gram(fit, data, j);
  const Eigen::MatrixXd Dm = difference_matrix(spec.penalty_order, spec.size());
  g.with_lambda = g.without + (lambda / n) * (Dm.transpose() * Dm);
  return g;
}

GamSpec pilot_spec(const GamSpec& spec) {
  GamSpec pilot = spec;
  for (auto& b : pilot.bases) b = BasisSpec(b.degree + 2, b.knot_count, b.penalty_order);
  return pilot;
}

GamFit fit_pilot_on_design(const GamDesign& pilot_design, const Eigen::VectorXd& y) {
  const auto& pilot = pilot_design.spec();
  if (pilot_design.design().cols() >= y.size())
    throw config_error("pilot fit: raised degree violates the dimension rule");

  // GCV over a shared multiplier on the sqrt(n/K) scale
  const double n = static_cast<double>(y.size());
  double kbar = 0.0;
  for (const auto& b : pilot.bases) kbar += b.knot_count;
  kbar /= static_cast<double>(pilot.bases.size());
  const double scale = std::sqrt(n / kbar);

  const double multipliers[] = {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0};
  bool have = false;
  double best_gcv = 0.0, best_mult = 0.0;
  GamFit best;
  Eigen::VectorXd warm;
  const Eigen::VectorXd* warm_ptr = nullptr;
  for (double t : multipliers) {
    Eigen::VectorXd lambdas =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(pilot.bases.size()), t * scale);
    try {
      GamFit f = pilot_design.fit_lambda(y, lambdas, warm_ptr);
      warm = f.coef;
      warm_ptr = &warm;
      if (!have || f.gcv < best_gcv - 1e-12 ||
          (std::fabs(f.gcv - best_gcv) <= 1e-12 && t > best_mult)) {
        have = true;
        best_gcv = f.gcv;
        best_mult = t;
        best = std::move(f);
      }
    } catch (const convergence_error&) {
      warm_ptr = nullptr;
    }
  }
  if (!have) throw convergence_error("pilot fit: no smoothing candidate converged", 0, 0.0);
  return best;
}

GamFit fit_pilot(const GamSpec& spec, const GamData& data) {
  const GamDesign design(pilot_spec(spec), data.covariates);
  return fit_pilot_on_design(design, data.response);
}

PilotDerivative pilot_derivative(const GamFit& pilot, int j) {
  if (j < 0 || j >= pilot.n_covariates())
    throw std::domain_error("pilot_derivative: covariate index");
  const auto& spec = pilot.bases[static_cast<std::size_t>(j)];
  const int order = spec.degree - 1;  // pilot degree p+2, differentiate p+1 times
  auto [dspec, dcoef] = curve_derivative_coeffs(spec, pilot.block(j), order);
  return PilotDerivative{dspec, std::move(dcoef), order};
}

PilotDerivative pilot_derivative(const GamData& data, const GamSpec& spec, int j) {
  return pilot_derivative(fit_pilot(spec, data), j);
}

double bias_a_value(double eta_deriv, const BasisSpec& spec, double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("bias_a: x outside [0,1]");
  const int p = spec.degree;
  const int K = spec.knot_count;
  const int l = spec.interval_index(x);  // right-closed intervals, as in the basis
  const double u = x * K - (l - 1);      // within-interval position in [0,1]
  double factorial = 1.0;
  for (int i = 2; i <= p + 1; ++i) factorial *= i;
  return -eta_deriv / (std::pow(static_cast<double>(K), p + 1) * factorial) *
         bernoulli_poly(p + 1, u);
}

double bias_a(const PilotDerivative& pd, const BasisSpec& spec, double x) {
  return bias_a_value(pd(x), spec, x);
}

void ComponentInference::build(const BasisSpec& basis, const Eigen::Ref<const Eigen::MatrixXd>& Zj,
                               const Eigen::VectorXd& weights, const Eigen::VectorXd& coef_block,
                               double lambda) {
  basis_ = basis;
  coef_ = coef_block;
  n_ = static_cast<double>(Zj.rows());
  gamma0_ = Zj.transpose() * weights.asDiagonal() * Zj / n_;
  const Eigen::MatrixXd Dm = difference_matrix(basis_.penalty_order, basis_.size());
  const Eigen::MatrixXd DtD = Dm.transpose() * Dm;
  Eigen::MatrixXd with_lambda = gamma0_ + (lambda / n_) * DtD;
  gamma_llt_.compute(with_lambda);
  if (gamma_llt_.info() != Eigen::Success) {
    // near-zero working weights can defeat the factorization; retry with a
    // reported jitter
    with_lambda.diagonal().array() += 1e-12;
    gamma_llt_.compute(with_lambda);
    jittered_ = true;
    if (gamma_llt_.info() != Eigen::Success)
      throw numeric_error("inference: curvature matrix is singular");
  }
  penalty_coef_ = (lambda / n_) * (DtD * coef_);
}

ComponentInference::ComponentInference(const GamFit& fit, const GamData& data, int j)
    : basis_(0, 1, 0) {
  if (j < 0 || j >= fit.n_covariates()) throw std::domain_error("inference: covariate index");
  const Eigen::MatrixXd Zj =
      design_matrix(fit.bases[static_cast<std::size_t>(j)], unit_column(fit, data, j));
  build(fit.bases[static_cast<std::size_t>(j)], Zj, fit.weights, fit.block(j),
        fit.penalty.lambdas[j]);
}

ComponentInference::ComponentInference(const GamFit& fit, const GamData& data, int j,
                                       double lambda)
    : basis_(0, 1, 0) {
  if (j < 0 || j >= fit.n_covariates()) throw std::domain_error("inference: covariate index");
  const Eigen::MatrixXd Zj =
      design_matrix(fit.bases[static_cast<std::size_t>(j)], unit_column(fit, data, j));
  build(fit.bases[static_cast<std::size_t>(j)], Zj, fit.weights, fit.block(j), lambda);
}

ComponentInference::ComponentInference(const BasisSpec& basis,
                                       const Eigen::Ref<const Eigen::MatrixXd>& Zj,
                                       const Eigen::VectorXd& weights,
                                       const Eigen::VectorXd& coef_block, double lambda)
    : basis_(0, 1, 0) {
  build(basis, Zj, weights, coef_block, lambda);
}

double ComponentInference::eta(double x) const { return curve_value(basis_, coef_, x); }

double ComponentInference::bias_lambda(double x) const {
  return -basis_vector(basis_, x).dot(gamma_llt_.solve(penalty_coef_));
}

double ComponentInference::variance(double x) const {
  const Eigen::VectorXd Bx = basis_vector(basis_, x);
  const Eigen::VectorXd v = gamma_llt_.solve(Bx);
  return v.dot(gamma0_ * v) / n_;
}

double ComponentInference::psi(double x) const {
  return variance(x) * n_ / basis_.knot_count;
}

double bias_lambda(const GamFit& fit, const GamData& data, int j, double x) {
  return ComponentInference(fit, data, j).bias_lambda(x);
}

double variance_hat(const GamFit& fit, const GamData& data, int j, double x) {
  return ComponentInference(fit, data, j).variance(x);
}

double psi_hat(const GamFit& fit, const GamData& data, int j, double x) {
  return ComponentInference(fit, data, j).psi(x);
}

InferenceBand confidence_interval(const GamFit& fit, const GamData& data, int j,
                                  const Eigen::VectorXd& grid, double alpha,
                                  const GamFit* pilot) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("confidence_interval: alpha must be in (0,1)");
  GamFit pilot_local;
  if (!pilot) {
    GamSpec spec;
    spec.family = fit.family;
    spec.bases = fit.bases;
    spec.penalty = fit.penalty;
    spec.normalize = fit.normalize;
    pilot_local = fit_pilot(spec, data);
    pilot = &pilot_local;
  }
  const PilotDerivative pd = pilot_derivative(*pilot, j);
  const ComponentInference ci(fit, data, j);
  const auto& spec_j = fit.bases[static_cast<std::size_t>(j)];
  const double z = normal_quantile(1.0 - alpha / 2.0);

  InferenceBand band;
  band.covariate = j;
  band.alpha = alpha;
  band.grid = grid;
  const auto m = grid.size();
  band.eta_hat.resize(m);
  band.bias_a.resize(m);
  band.bias_lambda.resize(m);
  band.se.resize(m);
  band.lower.resize(m);
  band.upper.resize(m);
  band.lower_2se.resize(m);
  band.upper_2se.resize(m);
  band.jittered = ci.jittered();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = grid[i];
    band.eta_hat[i] = ci.eta(x);
    band.bias_a[i] = bias_a_value(pd(x), spec_j, x);
    band.bias_lambda[i] = ci.bias_lambda(x);
    const double v = ci.variance(x);
    if (!(v >= 0.0)) throw numeric_error("confidence_interval: negative variance estimate");
    band.se[i] = std::sqrt(v);
    const double center = band.eta_hat[i] - band.bias_a[i] - band.bias_lambda[i];
    band.lower[i] = center - z * band.se[i];
    band.upper[i] = center + z * band.se[i];
    band.lower_2se[i] = band.eta_hat[i] - 2.0 * band.se[i];
    band.upper_2se[i] = band.eta_hat[i] + 2.0 * band.se[i];
  }
  return band;
}

Eigen::VectorXd partial_residuals(const GamFit& fit, const GamData& data, int j) {
  if (j < 0 || j >= fit.n_covariates())
    throw std::domain_error("partial_residuals: covariate index");
  const auto n = data.covariates.rows();
  if (fit.weights.size() != n || fit.eta.size() != n)
    throw config_error("partial_residuals: fit does not match data dimensions");
  const Eigen::VectorXd u = unit_column(fit, data, j);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = fit.weights[i];
    if (!(w > 0.0))
      throw numeric_error("partial_residuals: nonpositive working weight at row " +
                          std::to_string(i));
    const double comp =
        curve_value(fit.bases[static_cast<std::size_t>(j)], fit.block(j), u[i]);
    out[i] = comp + (data.response[i] - fit.family.mean(fit.eta[i])) / w;
  }
  return out;
}

Eigen::VectorXd inference_grid(const BasisSpec& spec, int points) {
  const double lo = 1.0 / spec.knot_count;
  const double hi = 1.0 - lo;
  Eigen::VectorXd g(points);
  for (int i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  return g;
}

}  // namespace rcps
