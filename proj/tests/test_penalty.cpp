#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "rcps/basis.hpp"
#include "rcps/errors.hpp"
#include "rcps/penalty.hpp"
#include "rcps/rng.hpp"

using namespace rcps;

TEST_CASE("difference stencils") {
  Eigen::MatrixXd D1 = difference_matrix(1, 3);
  REQUIRE(D1.rows() == 2);
  CHECK(D1(0, 0) == -1.0);
  CHECK(D1(0, 1) == 1.0);
  CHECK(D1(0, 2) == 0.0);
  CHECK(D1(1, 1) == -1.0);
  CHECK(D1(1, 2) == 1.0);

  Eigen::MatrixXd D2 = difference_matrix(2, 4);
  REQUIRE(D2.rows() == 2);
  CHECK(D2(0, 0) == 1.0);
  CHECK(D2(0, 1) == -2.0);
  CHECK(D2(0, 2) == 1.0);
  CHECK(D2(1, 3) == 1.0);

  for (int m : {1, 2, 3}) {
    Eigen::VectorXd cst = Eigen::VectorXd::Constant(10, 3.7);
    CHECK((difference_matrix(m, 10) * cst).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK_THROWS_AS(difference_matrix(3, 3), std::domain_error);
  CHECK_THROWS_AS(difference_matrix(0, 5), std::domain_error);
}

TEST_CASE("m-th difference equals the first difference applied m times") {
  const int c = 9;
  for (int m = 2; m <= 4; ++m) {
    Eigen::MatrixXd composed = Eigen::MatrixXd::Identity(c, c);
    for (int s = 0; s < m; ++s) composed = difference_matrix(1, c - s) * composed;
    CHECK((difference_matrix(m, c) - composed).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("difference annihilates polynomial sequences below its order") {
  for (int m = 1; m <= 3; ++m) {
    Eigen::MatrixXd D = difference_matrix(m, 8);
    for (int deg = 0; deg < m; ++deg) {
      Eigen::VectorXd poly(8);
      for (int i = 0; i < 8; ++i) poly[i] = std::pow(i, deg);
      CHECK((D * poly).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
}

TEST_CASE("block penalty structure") {
  PenaltyConfig cfg;
  cfg.order = 2;

  SUBCASE("single block reduces to lambda D'D") {
    cfg.lambdas = Eigen::VectorXd::Constant(1, 2.5);
    Eigen::MatrixXd Q = block_penalty(cfg, 5, 1);
    Eigen::MatrixXd D = difference_matrix(2, 5);
    CHECK((Q - 2.5 * D.transpose() * D).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SUBCASE("zero lambdas give the zero matrix") {
    cfg.lambdas = Eigen::VectorXd::Zero(2);
    CHECK(block_penalty(cfg, 5, 2).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("PSD with rank 2(c-m) for two blocks") {
    cfg.lambdas = Eigen::VectorXd(2);
    cfg.lambdas << 1.0, 10.0;
    Eigen::MatrixXd Q = block_penalty(cfg, 5, 2);
    CHECK((Q - Q.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
    int rank = 0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i)
      if (eig.eigenvalues()[i] > 1e-10) ++rank;
    CHECK(rank == 2 * (5 - 2));
  }
  SUBCASE("null space of each block has dimension m") {
    cfg.lambdas = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::MatrixXd Q = block_penalty(cfg, 6, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    int nullity = 0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i)
      if (eig.eigenvalues()[i] < 1e-10) ++nullity;
    CHECK(nullity == 2);
  }
  SUBCASE("linear scaling in lambda") {
    cfg.lambdas = Eigen::VectorXd(2);
    cfg.lambdas << 0.7, 3.0;
    Eigen::MatrixXd Q1 = block_penalty(cfg, 5, 2);
    PenaltyConfig scaled = cfg;
    scaled.lambdas *= 4.0;
    CHECK((block_penalty(scaled, 5, 2) - 4.0 * Q1).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("wrong lambda count is rejected") {
    cfg.lambdas = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(block_penalty(cfg, 5, 2), std::domain_error);
  }
}

TEST_CASE("smoothing admissibility against a dense eigensolver oracle") {
  // simulated design: n=200, p=3, K=8, m=2
  BasisSpec spec(3, 8, 2);
  Rng rng(123);
  Eigen::VectorXd xs(200);
  for (int i = 0; i < 200; ++i) xs[i] = rng.uniform();
  Eigen::MatrixXd Z = design_matrix(spec, xs);

  // oracle: boundary lambda* from the scaled penalty spectrum
  Eigen::MatrixXd gram = Z.transpose() * Z;
  Eigen::MatrixXd D = difference_matrix(2, spec.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(gram);
  Eigen::MatrixXd inv_root = gram_eig.eigenvectors() *
                             gram_eig.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                             gram_eig.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inv_root * D.transpose() * D * inv_root);
  const double lambda_star = 1.0 / eig.eigenvalues().maxCoeff();

  auto low = lambda_admissible(Z, lambda_star / 2.0, 2);
  CHECK(low.admissible);
  auto high = lambda_admissible(Z, 2.0 * lambda_star, 2);
  CHECK_FALSE(high.admissible);
  CHECK(low.max_eigenvalue == doctest::Approx(eig.eigenvalues().maxCoeff()).epsilon(1e-9));

  // enormous lambda is never admissible against a nonzero spectrum
  CHECK_FALSE(lambda_admissible(Z, 1e12, 2).admissible);
}
