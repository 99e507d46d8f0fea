#pragma once

#include <Eigen/Dense>

namespace rcps {

// Difference-penalty configuration shared by all covariates of a fit:
// order m, per-covariate smoothing parameters lambda_j > 0, and the small
// ridge gamma that keeps the Fisher-scoring Hessian invertible.
struct PenaltyConfig {
  int order = 2;
  Eigen::VectorXd lambdas;
  double ridge = 1e-6;
};

// m-th order forward difference matrix of shape (c-m) x c; annihilates
// coefficient sequences that are polynomials of degree < m in the index.
Eigen::MatrixXd difference_matrix(int m, int c);

// Block-diagonal penalty diag[lambda_1 D'D, ..., lambda_D D'D] with D = the
// m-th difference matrix for block size c. Symmetric positive semidefinite.
Eigen::MatrixXd block_penalty(const PenaltyConfig& cfg, int c, int D);

struct AdmissibilityReport {
  bool admissible;
  double lambda_inverse;
  double max_eigenvalue;  // of (Z'Z)^{-1/2} D'D (Z'Z)^{-1/2}
};

// Checks whether 1/lambda exceeds the largest eigenvalue of the scaled
// penalty spectrum; advisory regime check for the asymptotic theory.
AdmissibilityReport lambda_admissible(const Eigen::MatrixXd& Zj, double lambda, int m);

}  // namespace rcps
