#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rcps/fit.hpp"

namespace rcps {

// Additive penalized quasi-likelihood model in the truncated-power mixed
// parameterization: fixed polynomial part of degree p plus random hinge
// coefficients with per-covariate variance sigma_j^2 (user supplied). A tiny
// ridge keeps the reparameterized system invertible.
struct MixedSpec {
  int degree = 3;
  int knot_count = 10;
  Eigen::VectorXd sigma2;     // one per covariate, > 0
  double ridge_tilde = 1e-8;  // gamma-tilde regularizer
  FamilyModel family = FamilyModel::gaussian();
  int max_iter = 100;
  double tol = 1e-8;
  bool normalize = true;
};

struct PqlFit {
  GamFit bfit;                        // fit in the B-spline parameterization
  std::vector<Eigen::VectorXd> beta;  // polynomial blocks, length p+1
  std::vector<Eigen::VectorXd> u;     // hinge blocks, length K-1
  std::vector<Eigen::MatrixXd> L;     // per-covariate change of basis
  double reparam_residual = 0.0;      // max grid |S(x)'theta - B(x)'b|
};

// The smoothing-parameter substitution that makes the quasi-likelihood a
// penalized spline objective: lambda_j = K^{2p}/sigma_j^2 with penalty order
// p+1 and ridge gamma-tilde.
GamSpec equivalent_gam_spec(const MixedSpec& spec, int n_covariates);

// Quasi-likelihood objective in the B-spline parameterization (additive
// constant dropped); identical code path to the penalized log-likelihood.
double pql_objective(const MixedSpec& spec, const GamData& data,
                     const Eigen::Ref<const Eigen::VectorXd>& b);

// Maximizes the quasi-likelihood for given variance components via the
// B-spline reparameterization, then back-transforms to (beta, u) blocks.
PqlFit pql_fit(const MixedSpec& spec, const GamData& data);

// Plug-in bias of component j at unit-scale x induced by the random-effect
// shrinkage, using the unpenalized weighted Gram in place of the penalized
// curvature.
double pql_bias_sigma(const PqlFit& fit, const GamData& data, int j, double x);

// Plug-in sandwich variance of component j at unit-scale x (per-n value) and
// its K/n-normalized version.
double pql_variance(const PqlFit& fit, const GamData& data, int j, double x);
double pql_psi(const PqlFit& fit, const GamData& data, int j, double x);

}  // namespace rcps
