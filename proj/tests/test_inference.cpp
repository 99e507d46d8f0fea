#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "rcps/errors.hpp"
#include "rcps/fit.hpp"
#include "rcps/inference.hpp"
#include "rcps/penalty.hpp"
#include "rcps/rng.hpp"
#include "rcps/stats.hpp"

using namespace rcps;

namespace {

GamSpec make_spec(const FamilyModel& family, int D, int p, int K, int m, double lambda,
                  double ridge) {
  GamSpec spec;
  spec.family = family;
  spec.penalty.order = m;
  spec.penalty.ridge = ridge;
  spec.penalty.lambdas = Eigen::VectorXd::Constant(D, lambda);
  for (int j = 0; j < D; ++j) spec.bases.emplace_back(p, K, m);
  spec.normalize = false;
  return spec;
}

GamData gaussian_data(int n, Rng& rng, const std::function<double(double)>& truth) {
  GamData data;
  data.covariates.resize(n, 1);
  data.response.resize(n);
  for (int i = 0; i < n; ++i) {
    data.covariates(i, 0) = rng.uniform();
    data.response[i] = truth(data.covariates(i, 0)) + rng.normal();
  }
  return data;
}

}  // namespace

TEST_CASE("gamma_hat") {
  Rng rng(21);
  GamData data = gaussian_data(40, rng, [](double x) { return std::sin(6.283 * x); });
  GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 4, 2, 0.8, 1e-6);
  GamFit fit = fit_rcps(spec, data);

  SUBCASE("zero smoothing leaves the weighted Gram") {
    const GammaHat g = gamma_hat(fit, data, 0, 0.0);
    CHECK((g.with_lambda - g.without).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("gaussian weights are the identity") {
    const GammaHat g = gamma_hat(fit, data, 0, 0.0);
    const Eigen::MatrixXd Z = design_matrix(fit.bases[0], data.covariates.col(0));
    CHECK((g.without - Z.transpose() * Z / 40.0).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("entries match direct summation") {
    const double lambda = 0.8;
    const GammaHat g = gamma_hat(fit, data, 0, lambda);
    const auto& basis = fit.bases[0];
    const Eigen::MatrixXd D = difference_matrix(2, basis.size());
    const Eigen::MatrixXd DtD = D.transpose() * D;
    for (int u = 0; u < basis.size(); ++u)
      for (int v = 0; v < basis.size(); ++v) {
        double acc = 0.0;
        for (int i = 0; i < 40; ++i)
          acc += fit.weights[i] * bspline_eval(basis, u - 2, data.covariates(i, 0)) *
                 bspline_eval(basis, v - 2, data.covariates(i, 0));
        const double expected = acc / 40.0 + lambda / 40.0 * DtD(u, v);
        CHECK(g.with_lambda(u, v) == doctest::Approx(expected).epsilon(1e-10));
      }
  }
}

TEST_CASE("pilot derivative estimation") {
  Rng rng(22);
  SUBCASE("polynomial truth gives a near-zero high-order derivative") {
    GamData data = gaussian_data(2000, rng, [](double x) { return 1.0 + 0.5 * x - x * x; });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 8, 2, 1.0, 1e-6);
    const PilotDerivative pd = pilot_derivative(data, spec, 0);
    CHECK(pd.order == 4);
    double worst = 0.0;
    for (int g = 1; g < 60; ++g) worst = std::max(worst, std::fabs(pd(g / 60.0)));
    CHECK(worst < 0.5);
  }
  SUBCASE("sine truth recovers the sign pattern of the fourth derivative") {
    GamData data = gaussian_data(3000, rng, [](double x) { return std::sin(6.283185307 * x); });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 10, 2, 1.0, 1e-6);
    const PilotDerivative pd = pilot_derivative(data, spec, 0);
    CHECK(pd(0.25) > 0.0);   // fourth derivative of sin(2 pi x) is positive here
    CHECK(pd(0.75) < 0.0);
  }
  SUBCASE("derivative curve is consistent with finite differences of the pilot") {
    GamData data = gaussian_data(400, rng, [](double x) { return std::cos(6.283 * x); });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 2, 6, 2, 0.5, 1e-6);
    const GamFit pilot = fit_pilot(spec, data);
    auto [dspec1, dcoef1] = curve_derivative_coeffs(pilot.bases[0], pilot.block(0), 1);
    for (int g = 1; g < 20; ++g) {
      const double x = g / 20.0;
      const double h = 1e-5;
      const double fd = (curve_value(pilot.bases[0], pilot.block(0), x + h) -
                         curve_value(pilot.bases[0], pilot.block(0), x - h)) / (2 * h);
      CHECK(curve_value(dspec1, dcoef1, x) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("approximation bias formula") {
  BasisSpec spec(3, 10, 2);
  SUBCASE("zero derivative means zero bias") {
    PilotDerivative zero{BasisSpec(0, 10, 0), Eigen::VectorXd::Zero(10), 4};
    for (int g = 1; g < 20; ++g) CHECK(bias_a(zero, spec, g / 20.0) == 0.0);
  }
  SUBCASE("pinned value at an interval midpoint") {
    // unit fourth derivative, K=10, p=3, x at the midpoint of an interval
    const double expected = -bernoulli_poly(4, 0.5) / (1e4 * 24.0);
    CHECK(bias_a_value(1.0, spec, 0.05) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bernoulli_poly(4, 0.5) == doctest::Approx(7.0 / 240.0).epsilon(1e-12));
  }
  SUBCASE("doubling the knot count divides the bias by 2^(p+1)") {
    BasisSpec coarse(3, 10, 2), fine(3, 20, 2);
    // same within-interval position u = 0.5
    const double b_coarse = bias_a_value(1.0, coarse, 0.05);
    const double b_fine = bias_a_value(1.0, fine, 0.025);
    CHECK(b_coarse / b_fine == doctest::Approx(16.0).epsilon(1e-10));
  }
  SUBCASE("bias scales linearly in the derivative value") {
    const double one = bias_a_value(1.0, spec, 0.33);
    CHECK(bias_a_value(5.0, spec, 0.33) == doctest::Approx(5.0 * one).epsilon(1e-14));
    CHECK(bias_a_value(-2.0, spec, 0.33) == doctest::Approx(-2.0 * one).epsilon(1e-14));
  }
}

TEST_CASE("shrinkage bias") {
  Rng rng(23);
  GamData data = gaussian_data(60, rng, [](double x) { return std::sin(6.283 * x); });
  GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 5, 2, 1.4, 1e-8);
  GamFit fit = fit_rcps(spec, data);

  SUBCASE("zero smoothing gives zero bias") {
    const ComponentInference ci(fit, data, 0, 0.0);
    for (int g = 1; g < 10; ++g) CHECK(ci.bias_lambda(g / 10.0) == 0.0);
  }
  SUBCASE("coefficients in the penalty null space give zero bias") {
    GamFit flat = fit;
    for (int k = 0; k < flat.bases[0].size(); ++k)
      flat.coef[k] = 2.0 + 0.3 * k;  // linear sequence, annihilated by second differences
    const ComponentInference ci(flat, data, 0);
    for (int g = 1; g < 10; ++g)
      CHECK(ci.bias_lambda(g / 10.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("matches a dense-solve oracle") {
    const auto& basis = fit.bases[0];
    const Eigen::MatrixXd Z = design_matrix(basis, data.covariates.col(0));
    const Eigen::MatrixXd D = difference_matrix(2, basis.size());
    const Eigen::MatrixXd gamma_lam =
        Z.transpose() * Z / 60.0 + 1.4 / 60.0 * D.transpose() * D;
    for (int g = 1; g < 10; ++g) {
      const double x = g / 10.0;
      const double expected = -basis_vector(basis, x)
                                   .dot(gamma_lam.fullPivLu().solve(
                                       (1.4 / 60.0) * D.transpose() * D * fit.block(0)));
      CHECK(bias_lambda(fit, data, 0, x) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("sandwich variance") {
  Rng rng(24);
  SUBCASE("collapses at zero smoothing") {
    GamData data = gaussian_data(50, rng, [](double x) { return x; });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 4, 2, 0.9, 1e-8);
    GamFit fit = fit_rcps(spec, data);
    const ComponentInference ci(fit, data, 0, 0.0);
    const GammaHat g0 = gamma_hat(fit, data, 0, 0.0);
    const Eigen::LLT<Eigen::MatrixXd> llt(g0.without);
    for (int g = 1; g < 10; ++g) {
      const double x = g / 10.0;
      const Eigen::VectorXd Bx = basis_vector(fit.bases[0], x);
      const double direct = Bx.dot(llt.solve(Bx)) / 50.0;
      CHECK(ci.variance(x) == doctest::Approx(direct).epsilon(1e-12));
      CHECK(ci.variance(x) > 0.0);
    }
  }
  SUBCASE("equals the exact linear-smoother variance on a gaussian instance") {
    GamData data = gaussian_data(30, rng, [](double x) { return std::sin(4.0 * x); });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 4, 2, 0.6, 1e-10);
    GamFit fit = fit_rcps(spec, data);

    const auto& basis = fit.bases[0];
    const Eigen::MatrixXd Z = design_matrix(basis, data.covariates.col(0));
    const Eigen::MatrixXd D = difference_matrix(2, basis.size());
    Eigen::MatrixXd A = Z.transpose() * Z + 0.6 * D.transpose() * D;
    for (int g = 1; g < 10; ++g) {
      const double x = g / 10.0;
      // smoother row of the (gamma = 0) estimator; unit noise variance
      const Eigen::VectorXd a = Z * A.fullPivLu().solve(basis_vector(basis, x));
      CHECK(variance_hat(fit, data, 0, x) == doctest::Approx(a.squaredNorm()).epsilon(1e-8));
    }
  }
  SUBCASE("heavier smoothing never inflates the gaussian sandwich") {
    GamData data = gaussian_data(80, rng, [](double x) { return std::sin(6.283 * x); });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 6, 2, 0.5, 1e-8);
    GamFit fit = fit_rcps(spec, data);
    const double lambdas[] = {0.0, 0.1, 1.0, 10.0, 100.0};
    for (int g = 1; g < 12; ++g) {
      const double x = g / 12.0;
      double prev = 1e300;
      for (double lam : lambdas) {
        const double v = ComponentInference(fit, data, 0, lam).variance(x);
        CHECK(v <= prev * (1.0 + 1e-10));
        prev = v;
      }
    }
  }
  SUBCASE("psi normalization") {
    GamData data = gaussian_data(50, rng, [](double x) { return x; });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 4, 2, 0.9, 1e-8);
    GamFit fit = fit_rcps(spec, data);
    CHECK(psi_hat(fit, data, 0, 0.5) ==
          doctest::Approx(variance_hat(fit, data, 0, 0.5) * 50.0 / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("confidence bands") {
  Rng rng(25);
  GamData data = gaussian_data(150, rng, [](double x) { return std::sin(6.283 * x); });
  GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 6, 2, 0.8, 1e-6);
  GamFit fit = fit_rcps(spec, data);
  GamFit pilot = fit_pilot(spec, data);
  const Eigen::VectorXd grid = inference_grid(fit.bases[0], 25);

  SUBCASE("the 1% band uses the 2.576 normal percentile") {
    CHECK(normal_quantile(0.995) == doctest::Approx(2.5758293).epsilon(1e-6));
    const InferenceBand band = confidence_interval(fit, data, 0, grid, 0.01, &pilot);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double center = band.eta_hat[i] - band.bias_a[i] - band.bias_lambda[i];
      CHECK((band.upper[i] - center) / band.se[i] == doctest::Approx(2.5758293).epsilon(1e-9));
    }
  }
  SUBCASE("zero bias estimates center the band at the raw estimate") {
    GamFit zero_pilot = pilot;
    zero_pilot.coef.setZero();
    GamFit zero_lambda_fit = fit;
    zero_lambda_fit.penalty.lambdas[0] = 0.0;
    const InferenceBand band =
        confidence_interval(zero_lambda_fit, data, 0, grid, 0.05, &zero_pilot);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      CHECK(band.bias_a[i] == 0.0);
      CHECK(band.bias_lambda[i] == 0.0);
      CHECK((band.lower[i] + band.upper[i]) / 2.0 ==
            doctest::Approx(band.eta_hat[i]).epsilon(1e-12));
    }
  }
  SUBCASE("band fields are consistent and ordered") {
    const InferenceBand band = confidence_interval(fit, data, 0, grid, 0.05, &pilot);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      CHECK(band.lower[i] < band.upper[i]);
      CHECK(band.se[i] > 0.0);
      CHECK(band.lower_2se[i] == doctest::Approx(band.eta_hat[i] - 2 * band.se[i]));
      CHECK(band.upper_2se[i] == doctest::Approx(band.eta_hat[i] + 2 * band.se[i]));
    }
  }
  SUBCASE("the 1% band contains the 5% band") {
    const InferenceBand wide = confidence_interval(fit, data, 0, grid, 0.01, &pilot);
    const InferenceBand narrow = confidence_interval(fit, data, 0, grid, 0.05, &pilot);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      CHECK(wide.lower[i] <= narrow.lower[i]);
      CHECK(wide.upper[i] >= narrow.upper[i]);
    }
  }
  SUBCASE("alpha outside (0,1) is rejected") {
    CHECK_THROWS_AS(confidence_interval(fit, data, 0, grid, 1.5, &pilot), std::domain_error);
  }
}

TEST_CASE("partial residuals") {
  Rng rng(26);
  SUBCASE("gaussian case reduces to component plus raw residual") {
    GamData data = gaussian_data(50, rng, [](double x) { return std::sin(5.0 * x); });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 5, 2, 0.5, 1e-6);
    GamFit fit = fit_rcps(spec, data);
    const Eigen::VectorXd pr = partial_residuals(fit, data, 0);
    for (int i = 0; i < 50; ++i) {
      const double comp = curve_value(fit.bases[0], fit.block(0), data.covariates(i, 0));
      CHECK(pr[i] ==
            doctest::Approx(comp + data.response[i] - fit.eta[i]).epsilon(1e-12));
    }
  }
  SUBCASE("a perfect fit leaves only the component") {
    GamData data = gaussian_data(50, rng, [](double x) { return 0.5 * x; });
    GamSpec spec = make_spec(FamilyModel::gaussian(), 1, 3, 5, 2, 0.5, 1e-6);
    GamFit fit = fit_rcps(spec, data);
    GamData perfect = data;
    for (int i = 0; i < 50; ++i) perfect.response[i] = fit.family.mean(fit.eta[i]);
    const Eigen::VectorXd pr = partial_residuals(fit, perfect, 0);
    for (int i = 0; i < 50; ++i) {
      const double comp = curve_value(fit.bases[0], fit.block(0), data.covariates(i, 0));
      CHECK(pr[i] == doctest::Approx(comp).epsilon(1e-12));
    }
  }
  SUBCASE("bernoulli case matches the scalar oracle") {
    GamData data;
    data.covariates.resize(80, 1);
    data.response.resize(80);
    for (int i = 0; i < 80; ++i) {
      data.covariates(i, 0) = rng.uniform();
      const double eta = std::sin(6.283 * data.covariates(i, 0));
      data.response[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
    }
    GamSpec spec = make_spec(FamilyModel::bernoulli(), 1, 3, 5, 2, 1.0, 1e-6);
    GamFit fit = fit_rcps(spec, data);
    const Eigen::VectorXd pr = partial_residuals(fit, data, 0);
    for (int i = 0; i < 80; ++i) {
      const double mu = 1.0 / (1.0 + std::exp(-fit.eta[i]));
      const double w = mu * (1.0 - mu);
      const double comp = curve_value(fit.bases[0], fit.block(0), data.covariates(i, 0));
      CHECK(pr[i] == doctest::Approx(comp + (data.response[i] - mu) / w).epsilon(1e-10));
    }
  }
}

TEST_CASE("inference grid spans the interior") {
  BasisSpec spec(3, 10, 2);
  const Eigen::VectorXd g = inference_grid(spec, 7);
  CHECK(g[0] == doctest::Approx(0.1));
  CHECK(g[6] == doctest::Approx(0.9));
  for (int i = 1; i < 7; ++i) CHECK(g[i] > g[i - 1]);
}
