#include "rcps/penalty.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rcps/errors.hpp"

namespace rcps {

Eigen::MatrixXd difference_matrix(int m, int c) {
  if (m < 1) throw std::domain_error("difference_matrix: order must be >= 1");
  if (c <= m) throw std::domain_error("difference_matrix: need c > m");
  // binomial stencil (-1)^{m-j} C(m, j)
  Eigen::VectorXd stencil(m + 1);
  stencil[0] = (m % 2 == 0) ? 1.0 : -1.0;
  for (int j = 1; j <= m; ++j) stencil[j] = -stencil[j - 1] * (m - j + 1) / j;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(c - m, c);
  for (int i = 0; i < c - m; ++i)
    for (int j = 0; j <= m; ++j) D(i, i + j) = stencil[j];
  return D;
}

Eigen::MatrixXd block_penalty(const PenaltyConfig& cfg, int c, int D) {
  if (cfg.lambdas.size() != D)
    throw std::domain_error("block_penalty: lambdas length does not match covariate count");
  const Eigen::MatrixXd Dm = difference_matrix(cfg.order, c);
  const Eigen::MatrixXd DtD = Dm.transpose() * Dm;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(D * c, D * c);
  for (int j = 0; j < D; ++j) Q.block(j * c, j * c, c, c) = cfg.lambdas[j] * DtD;
  return Q;
}

AdmissibilityReport lambda_admissible(const Eigen::MatrixXd& Zj, double lambda, int m) {
  const int c = static_cast<int>(Zj.cols());
  const Eigen::MatrixXd gram = Zj.transpose() * Zj;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(gram);
  if (gram_eig.eigenvalues().minCoeff() <= 0.0)
    throw numeric_error("lambda_admissible: Z'Z is singular");
  // symmetric inverse square root of Z'Z
  const Eigen::MatrixXd inv_root =
      gram_eig.eigenvectors() *
      gram_eig.eigenvalues().array().rsqrt().matrix().asDiagonal() *
      gram_eig.eigenvectors().transpose();
  const Eigen::MatrixXd Dm = difference_matrix(m, c);
  const Eigen::MatrixXd scaled = inv_root * (Dm.transpose() * Dm) * inv_root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double max_eig = eig.eigenvalues().maxCoeff();
  const double inv_lambda = 1.0 / lambda;
  return {inv_lambda > max_eig, inv_lambda, max_eig};
}

}  // namespace rcps
