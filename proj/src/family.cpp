#include "rcps/family.hpp"

#include <cmath>
#include <stdexcept>

#include "rcps/errors.hpp"

namespace rcps {

namespace {
constexpr double kLogRoot2Pi = 0.91893853320467274178;

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log1pexp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

bool is_count(double y) { return y >= 0.0 && std::floor(y) == y; }
}  // namespace

FamilyModel FamilyModel::gamma(double shape) {
  if (!(shape > 0.0)) throw std::domain_error("gamma family: shape must be positive");
  return FamilyModel(FamilyKind::gamma, shape);
}

FamilyModel FamilyModel::parse(const std::string& name, double gamma_shape) {
  if (name == "gaussian" || name == "normal") return gaussian();
  if (name == "bernoulli" || name == "binomial") return bernoulli();
  if (name == "poisson") return poisson();
  if (name == "gamma") return gamma(gamma_shape);
  throw config_error("unknown family '" + name + "'");
}

const char* FamilyModel::name() const {
  switch (kind_) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::bernoulli: return "bernoulli";
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::gamma: return "gamma";
  }
  return "?";
}

bool FamilyModel::theta_in_domain(double theta) const {
  if (!std::isfinite(theta)) return false;
  if (kind_ == FamilyKind::gamma) return theta < 0.0;
  return true;
}

void FamilyModel::check_theta(double theta) const {
  if (!theta_in_domain(theta))
    throw std::domain_error(std::string(name()) + " family: natural parameter outside domain");
}

void FamilyModel::check_support(double y) const {
  switch (kind_) {
    case FamilyKind::gaussian:
      if (!std::isfinite(y)) throw std::domain_error("gaussian family: y must be finite");
      return;
    case FamilyKind::bernoulli:
      if (y != 0.0 && y != 1.0) throw std::domain_error("bernoulli family: y must be 0 or 1");
      return;
    case FamilyKind::poisson:
      if (!is_count(y)) throw std::domain_error("poisson family: y must be a nonnegative integer");
      return;
    case FamilyKind::gamma:
      if (!(y > 0.0)) throw std::domain_error("gamma family: y must be positive");
      return;
  }
}

double FamilyModel::cumulant(double theta) const {
  check_theta(theta);
  switch (kind_) {
    case FamilyKind::gaussian: return 0.5 * theta * theta;
    case FamilyKind::bernoulli: return log1pexp(theta);
    case FamilyKind::poisson: return std::exp(theta);
    case FamilyKind::gamma: return -shape_ * std::log(-theta);
  }
  return 0.0;
}

double FamilyModel::mean(double theta) const {
  check_theta(theta);
  switch (kind_) {
    case FamilyKind::gaussian: return theta;
    case FamilyKind::bernoulli: return logistic(theta);
    case FamilyKind::poisson: return std::exp(theta);
    case FamilyKind::gamma: return -shape_ / theta;
  }
  return 0.0;
}

double FamilyModel::variance(double theta) const {
  check_theta(theta);
  switch (kind_) {
    case FamilyKind::gaussian: return 1.0;
    case FamilyKind::bernoulli: {
      const double mu = logistic(theta);
      return mu * (1.0 - mu);
    }
    case FamilyKind::poisson: return std::exp(theta);
    case FamilyKind::gamma: return shape_ / (theta * theta);
  }
  return 0.0;
}

double FamilyModel::dvariance(double theta) const {
  check_theta(theta);
  switch (kind_) {
    case FamilyKind::gaussian: return 0.0;
    case FamilyKind::bernoulli: {
      const double mu = logistic(theta);
      return mu * (1.0 - mu) * (1.0 - 2.0 * mu);
    }
    case FamilyKind::poisson: return std::exp(theta);
    case FamilyKind::gamma: return -2.0 * shape_ / (theta * theta * theta);
  }
  return 0.0;
}

double FamilyModel::h_term(double y) const {
  check_support(y);
  switch (kind_) {
    case FamilyKind::gaussian: return -0.5 * y * y - kLogRoot2Pi;
    case FamilyKind::bernoulli: return 0.0;
    case FamilyKind::poisson: return -std::lgamma(y + 1.0);
    case FamilyKind::gamma: return (shape_ - 1.0) * std::log(y) - std::lgamma(shape_);
  }
  return 0.0;
}

double FamilyModel::log_density(double y, double theta) const {
  check_support(y);
  check_theta(theta);
  return y * theta - cumulant(theta) + h_term(y);
}

double FamilyModel::saturated(double y) const {
  check_support(y);
  switch (kind_) {
    case FamilyKind::gaussian: return 0.5 * y * y;
    case FamilyKind::bernoulli: return 0.0;
    case FamilyKind::poisson: return (y > 0.0) ? y * std::log(y) - y : 0.0;
    case FamilyKind::gamma: return -shape_ + shape_ * std::log(shape_ / y);
  }
  return 0.0;
}

double FamilyModel::init_theta(double y) const {
  switch (kind_) {
    case FamilyKind::gaussian: return y;
    case FamilyKind::bernoulli: {
      const double mu = (y + 0.5) / 2.0;  // pulls 0/1 to 0.25/0.75
      return std::log(mu / (1.0 - mu));
    }
    case FamilyKind::poisson: return std::log(y + 0.5);
    case FamilyKind::gamma: return -shape_ / std::max(y, 1e-8);
  }
  return 0.0;
}

double FamilyModel::sample(double theta, Rng& rng) const {
  check_theta(theta);
  switch (kind_) {
    case FamilyKind::gaussian: return theta + rng.normal();
    case FamilyKind::bernoulli: return rng.bernoulli(logistic(theta)) ? 1.0 : 0.0;
    case FamilyKind::poisson: return static_cast<double>(rng.poisson(std::exp(theta)));
    case FamilyKind::gamma: return rng.gamma(shape_, -theta);
  }
  return 0.0;
}

}  // namespace rcps
