#pragma once

#include <string>

#include "rcps/rng.hpp"

namespace rcps {

enum class FamilyKind { gaussian, bernoulli, poisson, gamma };

// Exponential family with canonical link and unit dispersion. The density is
// exp(y*theta - c(theta) + h(y)); mean = c'(theta), variance = c''(theta).
// Gamma is exposed with a fixed known shape so the canonical form keeps unit
// dispersion.
class FamilyModel {
 public:
  static FamilyModel gaussian() { return FamilyModel(FamilyKind::gaussian, 0.0); }
  static FamilyModel bernoulli() { return FamilyModel(FamilyKind::bernoulli, 0.0); }
  static FamilyModel poisson() { return FamilyModel(FamilyKind::poisson, 0.0); }
  static FamilyModel gamma(double shape);
  static FamilyModel parse(const std::string& name, double gamma_shape = 1.0);

  FamilyKind kind() const { return kind_; }
  double shape() const { return shape_; }
  const char* name() const;

  bool theta_in_domain(double theta) const;
  void check_theta(double theta) const;    // throws domain_error
  void check_support(double y) const;      // throws domain_error

  double cumulant(double theta) const;     // c
  double mean(double theta) const;         // c'
  double variance(double theta) const;     // c''
  double dvariance(double theta) const;    // c'''

  double h_term(double y) const;
  double log_density(double y, double theta) const;

  // sup over theta of y*theta - c(theta); the saturated term of the deviance
  double saturated(double y) const;

  // natural-parameter starting value used to initialize iterative fits
  double init_theta(double y) const;

  double sample(double theta, Rng& rng) const;

 private:
  FamilyModel(FamilyKind kind, double shape) : kind_(kind), shape_(shape) {}
  FamilyKind kind_;
  double shape_;
};

}  // namespace rcps
