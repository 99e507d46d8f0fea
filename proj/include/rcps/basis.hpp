#pragma once

#include <Eigen/Dense>
#include <utility>

namespace rcps {

// Uniform B-spline basis configuration on the unit interval. Knots sit at
// k/knot_count for k = -degree .. knot_count+degree, so the basis functions
// indexed k = -degree+1 .. knot_count form a partition of unity on [0,1].
// penalty_order is the difference-penalty order used when this basis enters a
// penalized fit; penalty_order == 0 marks an evaluation-only basis (allowed
// for derivative curves, rejected by the fitting layer).
struct BasisSpec {
  int degree;         // p >= 0
  int knot_count;     // K >= 1, interior resolution
  int penalty_order;  // m, 1 <= m < K + p for fitting; 0 for evaluation-only

  BasisSpec(int p, int K, int m = 1);

  // number of basis functions, K + p
  int size() const { return knot_count + degree; }

  // knot position k/K, valid for k in [-degree, knot_count+degree]
  double knot(int k) const;

  // index of the knot interval (kappa_{l-1}, kappa_l] containing x, with the
  // right-limit convention at x == 0; l in 1..K for x in [0,1]
  int interval_index(double x) const;
};

// Min-max map from raw covariate units onto [0,1].
struct CovariateNormalizer {
  double lo;
  double hi;

  CovariateNormalizer(double lo_, double hi_);
  static CovariateNormalizer unit() { return CovariateNormalizer(0.0, 1.0); }
  static CovariateNormalizer from_data(const Eigen::Ref<const Eigen::VectorXd>& xs);

  double to_unit(double x) const { return (x - lo) / (hi - lo); }
  double from_unit(double u) const { return lo + u * (hi - lo); }
};

// Single basis function B_k(x) for k in [-p+1, K]; zero outside
// (kappa_{k-1}, kappa_{k+p}].
double bspline_eval(const BasisSpec& spec, int k, double x);

// All K+p basis functions at x in [0,1]; at most p+1 entries are nonzero.
Eigen::VectorXd basis_vector(const BasisSpec& spec, double x);

// Like basis_vector but accepts x beyond [0,1] as long as some basis
// function still has support there (exterior-knot extrapolation).
Eigen::VectorXd basis_vector_extrapolating(const BasisSpec& spec, double x);

// n x (K+p) matrix with row i = basis_vector(spec, xs[i]).
Eigen::MatrixXd design_matrix(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& xs);

// Spline value B(x)^T b.
double curve_value(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& b, double x);

// Bernoulli polynomial Br_r(x), standard convention: Br_0 = 1,
// Br_r' = r Br_{r-1}, and Br_r integrates to zero over [0,1] for r >= 1.
double bernoulli_poly(int r, double x);

// Coefficients of the m-th derivative of the spline with coefficients b:
// the derivative is a degree p-m spline with coefficients K^m * Delta_m * b.
std::pair<BasisSpec, Eigen::VectorXd> curve_derivative_coeffs(
    const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& b, int m);

// Truncated power basis (1, x, ..., x^p, (x-kappa_1)_+^p, ...,
// (x-kappa_{K-1})_+^p) with interior knots at k/K; length K+p.
Eigen::VectorXd truncated_power_vector(int p, int K, double x);

// Invertible L with B(x)^T = S(x)^T L on [0,1], where S is the truncated
// power vector of the same space. Solved by collocation at K+p interior
// points; if cond_out is given it receives the collocation condition number.
Eigen::MatrixXd change_of_basis(const BasisSpec& spec, double* cond_out = nullptr);

}  // namespace rcps
