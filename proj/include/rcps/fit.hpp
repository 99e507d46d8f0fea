#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "rcps/basis.hpp"
#include "rcps/family.hpp"
#include "rcps/penalty.hpp"

namespace rcps {

struct GamData {
  Eigen::MatrixXd covariates;  // n x D, raw units
  Eigen::VectorXd response;    // length n
};

// Full model description: family, one basis per covariate (degree, knots and
// penalty order may differ across covariates), smoothing parameters and the
// ridge correction, plus iteration controls.
struct GamSpec {
  FamilyModel family = FamilyModel::gaussian();
  std::vector<BasisSpec> bases;
  PenaltyConfig penalty;
  int max_iter = 100;
  double tol = 1e-8;
  bool normalize = true;  // min-max normalize covariates; false = data already on [0,1]
};

struct GamFit {
  FamilyModel family = FamilyModel::gaussian();
  std::vector<BasisSpec> bases;
  std::vector<CovariateNormalizer> normalizers;
  PenaltyConfig penalty;
  bool normalize = true;  // whether covariates were min-max normalized

  Eigen::VectorXd coef;       // stacked coefficient blocks, uncentered
  std::vector<int> offsets;   // block start per covariate, plus total at the end
  Eigen::VectorXd centering;  // empirical mean of each component over the training design
  double intercept = 0.0;     // sum of centering offsets

  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  Eigen::VectorXd weights;  // diag of W-hat = c''(Z b-hat) at convergence
  Eigen::VectorXd eta;      // fitted linear predictor at the training rows
  double deviance = 0.0;
  double edf = 0.0;
  double gcv = 0.0;
  std::vector<double> objective_trace;  // accepted penalized log-likelihood values

  int n_covariates() const { return static_cast<int>(bases.size()); }
  int dim() const { return offsets.back(); }
  Eigen::VectorXd block(int j) const { return coef.segment(offsets[j], offsets[j + 1] - offsets[j]); }
};

std::vector<CovariateNormalizer> make_normalizers(const GamSpec& spec,
                                                  const Eigen::MatrixXd& covariates);

// [Z_1 ... Z_D] with per-covariate blocks; rejects non-finite covariates.
Eigen::MatrixXd assemble_design(const std::vector<BasisSpec>& bases,
                                const std::vector<CovariateNormalizer>& normalizers,
                                const Eigen::MatrixXd& covariates);

// Ridge-corrected penalized log-likelihood at coefficient vector b.
double penalized_loglik(const GamSpec& spec, const GamData& data,
                        const Eigen::Ref<const Eigen::VectorXd>& b);

// Analytic gradient and Hessian of the objective; -Hessian is positive
// definite whenever the ridge is positive.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> score_and_hessian(
    const GamSpec& spec, const GamData& data, const Eigen::Ref<const Eigen::VectorXd>& b);

// One full Fisher-scoring update from b (no step control).
Eigen::VectorXd fisher_step(const GamSpec& spec, const GamData& data,
                            const Eigen::Ref<const Eigen::VectorXd>& b);

// Maximize the ridge-corrected penalized log-likelihood by Fisher scoring
// with step halving; throws convergence_error when the budget is exhausted.
GamFit fit_rcps(const GamSpec& spec, const GamData& data,
                const Eigen::VectorXd* start = nullptr);

// Component prediction (centered), total linear predictor, and mean response
// at a raw covariate point. Out-of-range points extrapolate through the
// exterior knots and set *extrapolated.
double predict_component(const GamFit& fit, int j, double xj_raw, bool* extrapolated = nullptr);
double predict_total(const GamFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& x_raw,
                     bool* extrapolated = nullptr);
double predict_mean(const GamFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& x_raw,
                    bool* extrapolated = nullptr);

// Prebuilt design for repeated fits over the same covariates (Monte Carlo
// replicates redraw only the response, smoothing grids reuse the design).
class GamDesign {
 public:
  GamDesign(const GamSpec& spec, const Eigen::MatrixXd& covariates);

  GamFit fit(const Eigen::Ref<const Eigen::VectorXd>& y,
             const Eigen::VectorXd* start = nullptr) const;
  GamFit fit_lambda(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::VectorXd& lambdas,
                    const Eigen::VectorXd* start = nullptr) const;

  const GamSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& design() const { return Z_; }
  const std::vector<CovariateNormalizer>& normalizers() const { return normalizers_; }
  const std::vector<int>& offsets() const { return offsets_; }

 private:
  GamSpec spec_;
  std::vector<CovariateNormalizer> normalizers_;
  Eigen::MatrixXd Z_;
  std::vector<Eigen::MatrixXd> block_DtD_;
  std::vector<int> offsets_;
};

// Candidate grid for generalized cross-validation over (K, lambda_1..D).
struct GcvCandidates {
  int degree = 3;
  int order = 2;
  double ridge = 1e-6;
  std::vector<int> knot_counts;
  std::vector<std::vector<double>> lambda_grids;  // one grid per covariate
  int max_iter = 100;
  double tol = 1e-8;
  bool normalize = true;
};

// Minimizes GCV = n * deviance / (n - edf)^2 over the Cartesian candidate
// grid; ties prefer heavier smoothing, then fewer knots.
GamSpec gcv_select(const GamData& data, const FamilyModel& family, const GcvCandidates& cands);

}  // namespace rcps
