#include "rcps/fit.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <string>

#include "rcps/errors.hpp"

namespace rcps {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_dims(const GamSpec& spec, const GamData& data) {
  const auto D = static_cast<Eigen::Index>(spec.bases.size());
  if (D < 1) throw config_error("fit: at least one covariate basis is required");
  if (data.covariates.cols() != D)
    throw config_error("fit: covariate count does not match basis list");
  if (data.covariates.rows() != data.response.size())
    throw data_error("fit: response length does not match covariate rows");
  if (spec.penalty.lambdas.size() != D)
    throw config_error("fit: lambda count does not match covariate count");
  for (const auto& b : spec.bases)
    if (b.penalty_order < 1)
      throw config_error("fit: evaluation-only basis cannot be penalized");
}

std::vector<int> block_offsets(const std::vector<BasisSpec>& bases) {
  std::vector<int> off(bases.size() + 1, 0);
  for (std::size_t j = 0; j < bases.size(); ++j) off[j + 1] = off[j] + bases[j].size();
  return off;
}

std::vector<Eigen::MatrixXd> penalty_blocks(const std::vector<BasisSpec>& bases) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(bases.size());
  for (const auto& b : bases) {
    const Eigen::MatrixXd Dm = difference_matrix(b.penalty_order, b.size());
    out.push_back(Dm.transpose() * Dm);
  }
  return out;
}

Eigen::MatrixXd penalty_from_blocks(const std::vector<Eigen::MatrixXd>& DtD,
                                    const std::vector<int>& off, const Eigen::VectorXd& lambdas) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(off.back(), off.back());
  for (std::size_t j = 0; j < DtD.size(); ++j) {
    const int c = static_cast<int>(DtD[j].rows());
    Q.block(off[j], off[j], c, c) = lambdas[static_cast<Eigen::Index>(j)] * DtD[j];
  }
  return Q;
}

// penalized log-likelihood; -inf when the natural parameter leaves the
// family's domain or the cumulant overflows
double objective_value(const FamilyModel& family, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& eta, double h_sum, const Eigen::MatrixXd& Qpen,
                       double gamma, const Eigen::VectorXd& b) {
  const auto n = static_cast<double>(y.size());
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!family.theta_in_domain(eta[i])) return kNegInf;
    loglik += y[i] * eta[i] - family.cumulant(eta[i]);
  }
  if (!std::isfinite(loglik)) return kNegInf;
  const double penalty = 0.5 * (b.dot(Qpen * b) + gamma * b.squaredNorm());
  return (loglik + h_sum - penalty) / n;
}

struct FisherResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd eta;
  Eigen::VectorXd weights;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> trace;
};

// Fisher scoring with step halving on the prepared design. The caller owns
// dimension checks; this loop owns domain safety and convergence accounting.
FisherResult run_fisher(const FamilyModel& family, const Eigen::MatrixXd& Z,
                        const Eigen::MatrixXd& Qpen, double gamma, const Eigen::VectorXd& y,
                        int max_iter, double tol, const Eigen::VectorXd* start) {
  const auto n = Z.rows();
  const auto c = Z.cols();
  if (c >= n)
    throw config_error("fit: total coefficient count " + std::to_string(c) +
                       " must be smaller than the sample size " + std::to_string(n));
  if (!(gamma > 0.0)) throw config_error("fit: ridge parameter must be positive");

  double h_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) h_sum += family.h_term(y[i]);

  Eigen::VectorXd b;
  if (start) {
    b = *start;
    if (b.size() != c) throw config_error("fit: warm start has wrong length");
  } else {
    // one working-response least-squares step from the data initializes b
    Eigen::VectorXd theta0(n);
    for (Eigen::Index i = 0; i < n; ++i) theta0[i] = family.init_theta(y[i]);
    Eigen::MatrixXd A = Z.transpose() * Z + Qpen;
    A.diagonal().array() += gamma;
    b = A.llt().solve(Z.transpose() * theta0);
  }

  Eigen::VectorXd eta = Z * b;
  double obj = objective_value(family, y, eta, h_sum, Qpen, gamma, b);
  if (!std::isfinite(obj)) {
    // retry from a flat linear predictor at the mean initial parameter,
    // which lies inside the family domain
    double theta_bar = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) theta_bar += family.init_theta(y[i]);
    theta_bar /= static_cast<double>(n);
    Eigen::MatrixXd A = Z.transpose() * Z + Qpen;
    A.diagonal().array() += gamma;
    b = A.llt().solve(Z.transpose() * Eigen::VectorXd::Constant(n, theta_bar));
    eta = Z * b;
    obj = objective_value(family, y, eta, h_sum, Qpen, gamma, b);
    if (!std::isfinite(obj)) throw numeric_error("fit: could not find a valid starting point");
  }

  FisherResult res;
  res.trace.push_back(obj);

  Eigen::VectorXd mu(n), w(n);
  Eigen::MatrixXd A(c, c);
  bool stalled = false;
  for (int iter = 1; iter <= max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = family.mean(eta[i]);
      w[i] = family.variance(eta[i]);
      if (!std::isfinite(w[i]) || w[i] <= 0.0)
        throw numeric_error("fit: invalid working weight at row " + std::to_string(i));
    }
    const Eigen::VectorXd score_n = Z.transpose() * (y - mu) - Qpen * b - gamma * b;  // n * G
    res.gradient_norm = score_n.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
    if (res.gradient_norm < tol) {
      res.converged = true;
      break;
    }

    A.noalias() = Z.transpose() * w.asDiagonal() * Z;
    A += Qpen;
    A.diagonal().array() += gamma;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
      throw numeric_error("fit: Fisher information factorization failed (matrix not PD)");
    const Eigen::VectorXd delta = llt.solve(score_n);

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd b_try, eta_try;
    double obj_try = kNegInf;
    for (int halving = 0; halving <= 20; ++halving) {
      b_try = b + t * delta;
      eta_try = Z * b_try;
      obj_try = objective_value(family, y, eta_try, h_sum, Qpen, gamma, b_try);
      if (std::isfinite(obj_try) && obj_try >= obj) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    const double update_norm = (t * delta).lpNorm<Eigen::Infinity>();
    b.swap(b_try);
    eta.swap(eta_try);
    obj = obj_try;
    res.trace.push_back(obj);
    res.iterations = iter;
    if (update_norm < tol) {
      res.converged = true;
      break;
    }
  }

  // final weights and gradient at the accepted iterate
  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = family.mean(eta[i]);
    w[i] = family.variance(eta[i]);
  }
  const Eigen::VectorXd score_n = Z.transpose() * (y - mu) - Qpen * b - gamma * b;
  res.gradient_norm = score_n.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
  if (res.gradient_norm < tol) res.converged = true;
  if (!res.converged) {
    std::vector<double> last(b.data(), b.data() + b.size());
    throw convergence_error(std::string("fit: no convergence after ") +
                                std::to_string(res.iterations) + " iterations" +
                                (stalled ? " (step halving stalled)" : ""),
                            res.iterations, res.gradient_norm, std::move(last));
  }
  res.coef = std::move(b);
  res.eta = std::move(eta);
  res.weights = std::move(w);
  return res;
}

GamFit finish_fit(const GamSpec& spec, const std::vector<CovariateNormalizer>& normalizers,
                  const Eigen::MatrixXd& Z, const std::vector<int>& off,
                  const Eigen::MatrixXd& Qpen, const Eigen::VectorXd& y, FisherResult&& fr) {
  const auto n = Z.rows();
  GamFit fit;
  fit.family = spec.family;
  fit.bases = spec.bases;
  fit.normalizers = normalizers;
  fit.penalty = spec.penalty;
  fit.normalize = spec.normalize;
  fit.coef = std::move(fr.coef);
  fit.offsets = off;
  fit.iterations = fr.iterations;
  fit.gradient_norm = fr.gradient_norm;
  fit.converged = fr.converged;
  fit.weights = std::move(fr.weights);
  fit.eta = std::move(fr.eta);
  fit.objective_trace = std::move(fr.trace);

  const int D = static_cast<int>(spec.bases.size());
  fit.centering.resize(D);
  for (int j = 0; j < D; ++j) {
    const auto cj = off[j + 1] - off[j];
    fit.centering[j] =
        (Z.middleCols(off[j], cj) * fit.coef.segment(off[j], cj)).mean();
  }
  fit.intercept = fit.centering.sum();

  double dev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    dev += 2.0 * (spec.family.saturated(y[i]) -
                  (y[i] * fit.eta[i] - spec.family.cumulant(fit.eta[i])));
  fit.deviance = dev;

  Eigen::MatrixXd ZtWZ = Z.transpose() * fit.weights.asDiagonal() * Z;
  Eigen::MatrixXd A = ZtWZ + Qpen;
  A.diagonal().array() += spec.penalty.ridge;
  fit.edf = A.llt().solve(ZtWZ).trace();
  const double denom = static_cast<double>(n) - fit.edf;
  fit.gcv = static_cast<double>(n) * fit.deviance / (denom * denom);
  return fit;
}

}  // namespace

std::vector<CovariateNormalizer> make_normalizers(const GamSpec& spec,
                                                  const Eigen::MatrixXd& covariates) {
  std::vector<CovariateNormalizer> out;
  out.reserve(spec.bases.size());
  for (Eigen::Index j = 0; j < covariates.cols(); ++j)
    out.push_back(spec.normalize ? CovariateNormalizer::from_data(covariates.col(j))
                                 : CovariateNormalizer::unit());
  return out;
}

Eigen::MatrixXd assemble_design(const std::vector<BasisSpec>& bases,
                                const std::vector<CovariateNormalizer>& normalizers,
                                const Eigen::MatrixXd& covariates) {
  if (covariates.rows() == 0) throw std::domain_error("assemble_design: empty sample");
  if (bases.size() != normalizers.size() ||
      static_cast<Eigen::Index>(bases.size()) != covariates.cols())
    throw config_error("assemble_design: basis/normalizer/covariate count mismatch");
  const auto off = block_offsets(bases);
  Eigen::MatrixXd Z(covariates.rows(), off.back());
  for (std::size_t j = 0; j < bases.size(); ++j) {
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      const double raw = covariates(i, static_cast<Eigen::Index>(j));
      if (!std::isfinite(raw))
        throw data_error("assemble_design: non-finite covariate at row " + std::to_string(i) +
                         ", column " + std::to_string(j));
      double u = normalizers[j].to_unit(raw);
      if (u < 0.0 && u > -1e-12) u = 0.0;
      if (u > 1.0 && u < 1.0 + 1e-12) u = 1.0;
      if (u < 0.0 || u > 1.0)
        throw data_error("assemble_design: covariate outside the unit interval at row " +
                         std::to_string(i) + ", column " + std::to_string(j));
      Z.block(i, off[j], 1, bases[j].size()) = basis_vector(bases[j], u).transpose();
    }
  }
  return Z;
}

double penalized_loglik(const GamSpec& spec, const GamData& data,
                        const Eigen::Ref<const Eigen::VectorXd>& b) {
  validate_dims(spec, data);
  const auto normalizers = make_normalizers(spec, data.covariates);
  const Eigen::MatrixXd Z = assemble_design(spec.bases, normalizers, data.covariates);
  if (b.size() != Z.cols()) throw config_error("penalized_loglik: coefficient length mismatch");
  const auto off = block_offsets(spec.bases);
  const Eigen::MatrixXd Qpen =
      penalty_from_blocks(penalty_blocks(spec.bases), off, spec.penalty.lambdas);
  double h_sum = 0.0;
  for (Eigen::Index i = 0; i < data.response.size(); ++i)
    h_sum += spec.family.h_term(data.response[i]);
  const Eigen::VectorXd eta = Z * b;
  const double val =
      objective_value(spec.family, data.response, eta, h_sum, Qpen, spec.penalty.ridge, b);
  if (!std::isfinite(val))
    throw numeric_error("penalized_loglik: natural parameter outside the family domain");
  return val;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> score_and_hessian(
    const GamSpec& spec, const GamData& data, const Eigen::Ref<const Eigen::VectorXd>& b) {
  validate_dims(spec, data);
  const auto normalizers = make_normalizers(spec, data.covariates);
  const Eigen::MatrixXd Z = assemble_design(spec.bases, normalizers, data.covariates);
  if (b.size() != Z.cols()) throw config_error("score_and_hessian: coefficient length mismatch");
  const auto off = block_offsets(spec.bases);
  const Eigen::MatrixXd Qpen =
      penalty_from_blocks(penalty_blocks(spec.bases), off, spec.penalty.lambdas);
  const auto n = static_cast<double>(Z.rows());
  const Eigen::VectorXd eta = Z * b;
  Eigen::VectorXd mu(Z.rows()), w(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    mu[i] = spec.family.mean(eta[i]);
    w[i] = spec.family.variance(eta[i]);
  }
  Eigen::VectorXd G =
      (Z.transpose() * (data.response - mu) - Qpen * b - spec.penalty.ridge * b) / n;
  Eigen::MatrixXd H = -(Z.transpose() * w.asDiagonal() * Z + Qpen) / n;
  H.diagonal().array() -= spec.penalty.ridge / n;
  if (!G.allFinite() || !H.allFinite())
    throw numeric_error("score_and_hessian: non-finite entries");
  return {std::move(G), std::move(H)};
}

Eigen::VectorXd fisher_step(const GamSpec& spec, const GamData& data,
                            const Eigen::Ref<const Eigen::VectorXd>& b) {
  validate_dims(spec, data);
  const auto normalizers = make_normalizers(spec, data.covariates);
  const Eigen::MatrixXd Z = assemble_design(spec.bases, normalizers, data.covariates);
  if (b.size() != Z.cols()) throw config_error("fisher_step: coefficient length mismatch");
  const auto off = block_offsets(spec.bases);
  const Eigen::MatrixXd Qpen =
      penalty_from_blocks(penalty_blocks(spec.bases), off, spec.penalty.lambdas);
  const Eigen::VectorXd eta = Z * b;
  Eigen::VectorXd mu(Z.rows()), w(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    mu[i] = spec.family.mean(eta[i]);
    w[i] = spec.family.variance(eta[i]);
    if (!std::isfinite(w[i]) || w[i] <= 0.0)
      throw numeric_error("fisher_step: invalid working weight at row " + std::to_string(i));
  }
  Eigen::MatrixXd A = Z.transpose() * w.asDiagonal() * Z + Qpen;
  A.diagonal().array() += spec.penalty.ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw numeric_error("fisher_step: factorization failed; system not positive definite");
  const Eigen::VectorXd rhs = Z.transpose() * (data.response - mu) - Qpen * b -
                              spec.penalty.ridge * b;  // n * gradient
  return b + llt.solve(rhs);
}

GamFit fit_rcps(const GamSpec& spec, const GamData& data, const Eigen::VectorXd* start) {
  validate_dims(spec, data);
  const auto normalizers = make_normalizers(spec, data.covariates);
  const Eigen::MatrixXd Z = assemble_design(spec.bases, normalizers, data.covariates);
  const auto off = block_offsets(spec.bases);
  const Eigen::MatrixXd Qpen =
      penalty_from_blocks(penalty_blocks(spec.bases), off, spec.penalty.lambdas);
  FisherResult fr = run_fisher(spec.family, Z, Qpen, spec.penalty.ridge, data.response,
                               spec.max_iter, spec.tol, start);
  return finish_fit(spec, normalizers, Z, off, Qpen, data.response, std::move(fr));
}

double predict_component(const GamFit& fit, int j, double xj_raw, bool* extrapolated) {
  if (j < 0 || j >= fit.n_covariates()) throw std::domain_error("predict: covariate index");
  const double u = fit.normalizers[static_cast<std::size_t>(j)].to_unit(xj_raw);
  if (extrapolated && (u < 0.0 || u > 1.0)) *extrapolated = true;
  const Eigen::VectorXd Bx = basis_vector_extrapolating(fit.bases[static_cast<std::size_t>(j)], u);
  return Bx.dot(fit.block(j)) - fit.centering[j];
}

double predict_total(const GamFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& x_raw,
                     bool* extrapolated) {
  if (x_raw.size() != fit.n_covariates())
    throw std::domain_error("predict: covariate point has wrong dimension");
  double total = fit.intercept;
  for (int j = 0; j < fit.n_covariates(); ++j)
    total += predict_component(fit, j, x_raw[j], extrapolated);
  return total;
}

double predict_mean(const GamFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& x_raw,
                    bool* extrapolated) {
  return fit.family.mean(predict_total(fit, x_raw, extrapolated));
}

GamDesign::GamDesign(const GamSpec& spec, const Eigen::MatrixXd& covariates) : spec_(spec) {
  if (spec.bases.empty()) throw config_error("GamDesign: empty basis list");
  if (covariates.cols() != static_cast<Eigen::Index>(spec.bases.size()))
    throw config_error("GamDesign: covariate count does not match basis list");
  normalizers_ = make_normalizers(spec, covariates);
  Z_ = assemble_design(spec.bases, normalizers_, covariates);
  block_DtD_ = penalty_blocks(spec.bases);
  offsets_ = block_offsets(spec.bases);
}

GamFit GamDesign::fit(const Eigen::Ref<const Eigen::VectorXd>& y,
                      const Eigen::VectorXd* start) const {
  return fit_lambda(y, spec_.penalty.lambdas, start);
}

GamFit GamDesign::fit_lambda(const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::VectorXd& lambdas, const Eigen::VectorXd* start) const {
  if (y.size() != Z_.rows()) throw data_error("GamDesign: response length mismatch");
  GamSpec spec = spec_;
  spec.penalty.lambdas = lambdas;
  const Eigen::MatrixXd Qpen = penalty_from_blocks(block_DtD_, offsets_, lambdas);
  FisherResult fr =
      run_fisher(spec.family, Z_, Qpen, spec.penalty.ridge, y, spec.max_iter, spec.tol, start);
  return finish_fit(spec, normalizers_, Z_, offsets_, Qpen, y, std::move(fr));
}

GamSpec gcv_select(const GamData& data, const FamilyModel& family, const GcvCandidates& cands) {
  if (cands.knot_counts.empty()) throw config_error("gcv_select: no knot candidates");
  const auto D = static_cast<std::size_t>(data.covariates.cols());
  if (cands.lambda_grids.size() != D)
    throw config_error("gcv_select: need one lambda grid per covariate");
  for (const auto& g : cands.lambda_grids)
    if (g.empty()) throw config_error("gcv_select: empty lambda grid");

  bool have_best = false;
  double best_gcv = std::numeric_limits<double>::infinity();
  double best_lambda_sum = 0.0;
  int best_K = 0;
  GamSpec best_spec;
  int attempts = 0, failures = 0;

  for (int K : cands.knot_counts) {
    GamSpec spec;
    spec.family = family;
    for (std::size_t j = 0; j < D; ++j)
      spec.bases.emplace_back(cands.degree, K, cands.order);
    spec.penalty.order = cands.order;
    spec.penalty.ridge = cands.ridge;
    spec.penalty.lambdas.resize(static_cast<Eigen::Index>(D));
    spec.max_iter = cands.max_iter;
    spec.tol = cands.tol;
    spec.normalize = cands.normalize;

    int total = 0;
    for (const auto& b : spec.bases) total += b.size();
    if (total >= data.response.size()) continue;  // dimension rule excludes this K

    std::vector<std::size_t> idx(D, 0);
    for (;;) {
      for (std::size_t j = 0; j < D; ++j)
        spec.penalty.lambdas[static_cast<Eigen::Index>(j)] = cands.lambda_grids[j][idx[j]];
      ++attempts;
      try {
        const GamFit fit = fit_rcps(spec, data);
        const double lambda_sum = spec.penalty.lambdas.sum();
        const bool better =
            !have_best || fit.gcv < best_gcv - 1e-12 ||
            (std::fabs(fit.gcv - best_gcv) <= 1e-12 &&
             (lambda_sum > best_lambda_sum ||
              (lambda_sum == best_lambda_sum && K < best_K)));
        if (better) {
          have_best = true;
          best_gcv = fit.gcv;
          best_lambda_sum = lambda_sum;
          best_K = K;
          best_spec = spec;
        }
      } catch (const convergence_error&) {
        ++failures;
      }
      // odometer over the per-covariate grids
      std::size_t j = 0;
      while (j < D && ++idx[j] == cands.lambda_grids[j].size()) {
        idx[j] = 0;
        ++j;
      }
      if (j == D) break;
    }
  }
  if (!have_best) {
    if (attempts == 0)
      throw config_error("gcv_select: every candidate violates the dimension rule");
    throw convergence_error("gcv_select: no candidate converged", 0, 0.0);
  }
  return best_spec;
}

}  // namespace rcps
