#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rcps/fit.hpp"

namespace rcps {

// Plug-in curvature matrices for one covariate: with_lambda is
// n^{-1}(Z_j' W Z_j + lambda D'D), without is n^{-1} Z_j' W Z_j.
struct GammaHat {
  Eigen::MatrixXd with_lambda;
  Eigen::MatrixXd without;
};

GammaHat gamma_hat(const GamFit& fit, const GamData& data, int j, double lambda);

// Derivative curve of a higher-degree pilot fit, evaluated on the unit scale.
struct PilotDerivative {
  BasisSpec basis;
  Eigen::VectorXd coef;
  int order;  // how many derivatives were taken

  double operator()(double x_unit) const { return curve_value(basis, coef, x_unit); }
};

// Fits the pilot model used for higher-order derivative estimation: each
// basis degree is raised by two and the smoothing parameters are re-selected
// by GCV over a common multiplier grid.
GamFit fit_pilot(const GamSpec& spec, const GamData& data);

// Pilot basis list for a main specification (degrees raised by two).
GamSpec pilot_spec(const GamSpec& spec);

// Same selection on a prebuilt pilot design; lets Monte Carlo replicates
// reuse the design matrix.
GamFit fit_pilot_on_design(const GamDesign& pilot_design, const Eigen::VectorXd& y);

// (p_j+1)-th derivative of component j of a pilot fit (pilot degree p_j+2).
PilotDerivative pilot_derivative(const GamFit& pilot, int j);

// Convenience wrapper: fit the pilot internally.
PilotDerivative pilot_derivative(const GamData& data, const GamSpec& spec, int j);

// Spline approximation bias at x from a (p+1)-th derivative value: scaled
// Bernoulli polynomial of the within-interval position.
double bias_a_value(double eta_deriv, const BasisSpec& spec, double x);
double bias_a(const PilotDerivative& pd, const BasisSpec& spec, double x);

// Penalty-induced shrinkage bias of component j at x (unit scale).
double bias_lambda(const GamFit& fit, const GamData& data, int j, double x);

// Plug-in sandwich variance of the component estimate at x; psi_hat is the
// same quantity normalized by K/n.
double variance_hat(const GamFit& fit, const GamData& data, int j, double x);
double psi_hat(const GamFit& fit, const GamData& data, int j, double x);

// Precomputed factorizations for repeated bias/variance evaluation over one
// covariate; lambda may be overridden (default: the fitted value).
class ComponentInference {
 public:
  ComponentInference(const GamFit& fit, const GamData& data, int j);
  ComponentInference(const GamFit& fit, const GamData& data, int j, double lambda);
  // raw-pieces constructor for callers that already hold the design block
  ComponentInference(const BasisSpec& basis, const Eigen::Ref<const Eigen::MatrixXd>& Zj,
                     const Eigen::VectorXd& weights, const Eigen::VectorXd& coef_block,
                     double lambda);

  double eta(double x) const;          // uncentered component value
  double bias_lambda(double x) const;
  double variance(double x) const;     // per-n sandwich value
  double psi(double x) const;          // (n/K) * variance
  bool jittered() const { return jittered_; }

 private:
  void build(const BasisSpec& basis, const Eigen::Ref<const Eigen::MatrixXd>& Zj,
             const Eigen::VectorXd& weights, const Eigen::VectorXd& coef_block, double lambda);
  BasisSpec basis_;
  Eigen::VectorXd coef_;
  Eigen::LLT<Eigen::MatrixXd> gamma_llt_;  // of Gamma-hat(lambda)
  Eigen::MatrixXd gamma0_;
  Eigen::VectorXd penalty_coef_;           // lambda/n * D'D b_j
  double n_ = 0.0;
  bool jittered_ = false;
};

struct InferenceBand {
  int covariate = 0;
  double alpha = 0.05;
  Eigen::VectorXd grid;         // unit-scale evaluation points
  Eigen::VectorXd eta_hat;      // uncentered component estimate
  Eigen::VectorXd bias_a;       // approximation bias estimate
  Eigen::VectorXd bias_lambda;  // shrinkage bias estimate
  Eigen::VectorXd se;           // sqrt of the per-n sandwich variance
  Eigen::VectorXd lower, upper;          // bias-corrected interval
  Eigen::VectorXd lower_2se, upper_2se;  // uncorrected +-2se comparison band
  bool jittered = false;
};

// Pointwise band over a unit-scale grid; the pilot fit may be supplied to
// reuse it across covariates (fitted internally when null).
InferenceBand confidence_interval(const GamFit& fit, const GamData& data, int j,
                                  const Eigen::VectorXd& grid, double alpha,
                                  const GamFit* pilot = nullptr);

// Component value plus working residual for each training row.
Eigen::VectorXd partial_residuals(const GamFit& fit, const GamData& data, int j);

// Default inference grid: equispaced on [1/K, 1 - 1/K].
Eigen::VectorXd inference_grid(const BasisSpec& spec, int points);

}  // namespace rcps
