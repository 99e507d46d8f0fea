#include "rcps/basis.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <vector>

#include "rcps/errors.hpp"

namespace rcps {

BasisSpec::BasisSpec(int p, int K, int m) : degree(p), knot_count(K), penalty_order(m) {
  if (p < 0 || p > 60) throw std::domain_error("BasisSpec: degree must be in [0, 60]");
  if (K < 1) throw std::domain_error("BasisSpec: knot_count must be >= 1");
  if (m != 0 && (m < 1 || m >= K + p))
    throw std::domain_error("BasisSpec: penalty order must satisfy 1 <= m < K + p");
}

double BasisSpec::knot(int k) const {
  return static_cast<double>(k) / knot_count;
}

int BasisSpec::interval_index(double x) const {
  if (x == 0.0) return 1;  // right limit keeps the partition of unity at 0
  int l = static_cast<int>(std::ceil(x * knot_count));
  if (l < 1) l = 1;
  if (l > knot_count) l = knot_count;
  while (l > 1 && x <= knot(l - 1)) --l;
  while (l < knot_count && x > knot(l)) ++l;
  return l;
}

namespace {

// Values of the p+1 basis functions B_{l-p}..B_l that can be nonzero on the
// interval (kappa_{l-1}, kappa_l], by the triangular recurrence over degrees.
void nonzero_basis(const BasisSpec& spec, int l, double x, double* out) {
  const int p = spec.degree;
  out[0] = 1.0;
  for (int d = 1; d <= p; ++d) {
    // entering: out[r] = B_{l-d+1+r}^{[d-1]}(x) for r = 0..d-1
    const double scale = static_cast<double>(spec.knot_count) / d;
    for (int j = d; j >= 0; --j) {
      const double lower = (j > 0) ? out[j - 1] : 0.0;
      const double upper = (j < d) ? out[j] : 0.0;
      const double left = (x - spec.knot(l - d + j - 1)) * scale;
      const double right = (spec.knot(l + j) - x) * scale;
      out[j] = left * lower + right * upper;
    }
  }
}

int clamped_interval(const BasisSpec& spec, double x) {
  // interval index over the extended knot range, for extrapolating callers
  if (x == 0.0) return 1;
  int l = static_cast<int>(std::ceil(x * spec.knot_count));
  const int lo = -spec.degree + 1;
  const int hi = spec.knot_count + spec.degree;
  if (l < lo) return lo - 1;  // beyond all support
  if (l > hi) return hi + 1;
  while (l > lo && x <= spec.knot(l - 1)) --l;
  while (l < hi && x > spec.knot(l)) ++l;
  return l;
}

}  // namespace

double bspline_eval(const BasisSpec& spec, int k, double x) {
  if (k < -spec.degree + 1 || k > spec.knot_count)
    throw std::domain_error("bspline_eval: basis index " + std::to_string(k) + " out of range");
  if (x < 0.0 || x > 1.0) throw std::domain_error("bspline_eval: x outside [0,1]");
  const int l = spec.interval_index(x);
  const int j = k - (l - spec.degree);
  if (j < 0 || j > spec.degree) return 0.0;
  double buf[64];
  nonzero_basis(spec, l, x, buf);
  return buf[j];
}

Eigen::VectorXd basis_vector(const BasisSpec& spec, double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("basis_vector: x outside [0,1]");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(spec.size());
  const int l = spec.interval_index(x);
  double buf[64];
  nonzero_basis(spec, l, x, buf);
  for (int j = 0; j <= spec.degree; ++j) {
    const int k = l - spec.degree + j;           // basis index
    const int pos = k + spec.degree - 1;         // storage position
    if (pos >= 0 && pos < spec.size()) v[pos] = buf[j];
  }
  return v;
}

Eigen::VectorXd basis_vector_extrapolating(const BasisSpec& spec, double x) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(spec.size());
  const int l = clamped_interval(spec, x);
  if (l < -spec.degree + 1 || l > spec.knot_count + spec.degree) return v;
  double buf[64];
  nonzero_basis(spec, l, x, buf);
  for (int j = 0; j <= spec.degree; ++j) {
    const int pos = l - spec.degree + j + spec.degree - 1;
    if (pos >= 0 && pos < spec.size()) v[pos] = buf[j];
  }
  return v;
}

Eigen::MatrixXd design_matrix(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& xs) {
  if (xs.size() == 0) throw std::domain_error("design_matrix: empty sample");
  Eigen::MatrixXd Z(xs.size(), spec.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) Z.row(i) = basis_vector(spec, xs[i]).transpose();
  return Z;
}

double curve_value(const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& b, double x) {
  if (b.size() != spec.size()) throw std::domain_error("curve_value: coefficient length mismatch");
  return basis_vector(spec, x).dot(b);
}

double bernoulli_poly(int r, double x) {
  if (r < 0) throw std::domain_error("bernoulli_poly: order must be >= 0");
  // coefficients built by the derivative + zero-mean recurrence
  std::vector<double> c{1.0};
  for (int d = 1; d <= r; ++d) {
    std::vector<double> a(d + 1);
    for (int i = 1; i <= d; ++i) a[i] = d * c[i - 1] / i;
    double mean = 0.0;
    for (int i = 1; i <= d; ++i) mean += a[i] / (i + 1);
    a[0] = -mean;
    c = std::move(a);
  }
  double value = 0.0;
  for (int i = r; i >= 0; --i) value = value * x + c[i];
  return value;
}

std::pair<BasisSpec, Eigen::VectorXd> curve_derivative_coeffs(
    const BasisSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& b, int m) {
  if (m < 1 || m > spec.degree)
    throw std::domain_error("curve_derivative_coeffs: need 1 <= m <= degree");
  if (b.size() != spec.size())
    throw std::domain_error("curve_derivative_coeffs: coefficient length mismatch");
  Eigen::VectorXd d = b;
  for (int step = 0; step < m; ++step) {
    Eigen::VectorXd next(d.size() - 1);
    for (Eigen::Index i = 0; i + 1 < d.size(); ++i) next[i] = d[i + 1] - d[i];
    d = std::move(next);
  }
  d *= std::pow(static_cast<double>(spec.knot_count), m);
  const int new_degree = spec.degree - m;
  const int new_order = (spec.knot_count + new_degree >= 2) ? 1 : 0;
  return {BasisSpec(new_degree, spec.knot_count, new_order), d};
}

Eigen::VectorXd truncated_power_vector(int p, int K, double x) {
  if (p < 0 || K < 1) throw std::domain_error("truncated_power_vector: invalid (p, K)");
  Eigen::VectorXd s(K + p);
  s[0] = 1.0;
  for (int i = 1; i <= p; ++i) s[i] = s[i - 1] * x;
  for (int k = 1; k <= K - 1; ++k) {
    const double t = x - static_cast<double>(k) / K;
    s[p + k] = (t > 0.0) ? (p == 0 ? 1.0 : std::pow(t, p)) : 0.0;
  }
  return s;
}

Eigen::MatrixXd change_of_basis(const BasisSpec& spec, double* cond_out) {
  const int c = spec.size();
  Eigen::MatrixXd S(c, c), B(c, c);
  for (int i = 0; i < c; ++i) {
    const double x = (i + 0.5) / c;
    S.row(i) = truncated_power_vector(spec.degree, spec.knot_count, x).transpose();
    B.row(i) = basis_vector(spec, x).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) / svd.singularValues()(c - 1);
  if (cond_out) *cond_out = cond;
  if (!(cond < 1e12))
    throw numeric_error("change_of_basis: collocation system ill-conditioned, cond = " +
                        std::to_string(cond));
  return svd.solve(B);
}

CovariateNormalizer::CovariateNormalizer(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(hi > lo)) throw std::domain_error("CovariateNormalizer: need hi > lo");
}

CovariateNormalizer CovariateNormalizer::from_data(const Eigen::Ref<const Eigen::VectorXd>& xs) {
  if (xs.size() == 0) throw data_error("normalizer: empty covariate column");
  const double lo = xs.minCoeff();
  const double hi = xs.maxCoeff();
  if (!(hi > lo)) throw data_error("normalizer: covariate column is constant");
  return CovariateNormalizer(lo, hi);
}

}  // namespace rcps
