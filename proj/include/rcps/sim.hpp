#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcps/family.hpp"
#include "rcps/fit.hpp"
#include "rcps/rng.hpp"

namespace rcps {

// Monte Carlo study of the standardized component estimates at a fixed
// evaluation point, for the three-covariate design with correlation rho.
struct SimConfig {
  int n = 100;
  int reps = 500;
  double rho = 0.0;
  Eigen::Vector3d eval_point{0.5, 0.5, 0.5};
  FamilyModel family = FamilyModel::bernoulli();
  int knot_override = 0;  // 0: K = 2*ceil(n^{2/5})
  std::array<double, 3> lambda_scale{0.1, 0.01, 1.0};  // times sqrt(n/K)
  double gamma = 1e-4;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
};

// Correlated unit-cube design: x_i = N * M * z_i with M_{jk} = rho^{|j-k|}
// and N the diagonal of reciprocal row sums, z iid uniform.
Eigen::MatrixXd gen_design(int n, double rho, Rng& rng);

// The three component functions of the study (uncentered).
std::array<std::function<double(double)>, 3> sim_truth_functions();

// Mean of each component under the rho-design, estimated from `draws`
// fresh design draws; subtracting these centers the truth.
Eigen::VectorXd center_truth(const std::vector<std::function<double(double)>>& fns, double rho,
                             Rng& rng, long draws = 1000000);

// Everything fixed across replicates: the design, centered truth values,
// prebuilt main and pilot fit designs.
struct SimContext {
  SimConfig cfg;
  int K = 0;
  Eigen::Vector3d lambdas;
  Eigen::MatrixXd design;        // n x 3
  Eigen::Vector3d offsets;       // truth centering
  Eigen::VectorXd eta_true;      // centered total truth at design rows
  Eigen::Vector3d eta_eval;      // centered component truth at the eval point
  GamDesign main_design;
  GamDesign pilot_design;
};

SimContext prepare_sim(const SimConfig& cfg);

// One response draw + fit + standardized statistics; nullopt marks a
// replicate whose main or pilot fit failed to converge.
std::optional<Eigen::Vector3d> run_replicate(const SimContext& ctx, Rng& rng);

struct KdeCurve {
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
  Eigen::VectorXd reference;  // standard normal pdf on the grid
  double bandwidth = 0.0;
  bool used_sj = true;  // false when the Silverman fallback was taken
};

struct Kde2d {
  Eigen::VectorXd grid;       // shared axis grid
  Eigen::MatrixXd density;    // len(grid) x len(grid)
  Eigen::MatrixXd reference;  // product standard normal
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
};

// Sheather-Jones solve-the-equation bandwidth; throws numeric_error on
// degenerate samples, returns nullopt when the fixed point cannot be
// bracketed (callers fall back to Silverman's rule).
std::optional<double> sj_bandwidth(const Eigen::VectorXd& samples);
double silverman_bandwidth(const Eigen::VectorXd& samples);

KdeCurve kde(const Eigen::VectorXd& samples, int grid_points = 161, double lo = -4.0,
             double hi = 4.0);
Kde2d kde2d(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, int grid_points = 41,
            double lo = -3.5, double hi = 3.5);

// Supremum distance between the empirical CDF and the standard normal CDF.
double ks_distance(const Eigen::VectorXd& samples);

struct SimReport {
  SimConfig cfg;
  int K = 0;
  Eigen::Vector3d lambdas;
  Eigen::Vector3d offsets;
  int requested = 0;
  int converged = 0;
  int nonconverged = 0;
  Eigen::MatrixXd U;  // converged x 3, replicate order
  std::array<KdeCurve, 3> component_kde;
  std::array<double, 3> ks{};
  struct PairPanel {
    int a = 0, b = 0;
    double corr = 0.0;
    Kde2d kde;
  };
  std::array<PairPanel, 3> pairs;
};

// Full protocol: one design draw, truth centering, `reps` response
// replicates (parallelized deterministically), then density summaries.
// Aborts when more than 20% of replicates fail to converge.
SimReport run_monte_carlo(const SimConfig& cfg);

// Self-describing JSON document for the report; byte-stable for a fixed
// config, seed, and build.
std::string report_json(const SimReport& report, const std::string& tool_version);

}  // namespace rcps
