#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rcps {

// Bad input data: unreadable CSV cell, non-finite covariate, empty table.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model configuration: dimension rules, unknown family, bad flags.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: singular factorization, invalid weights, overflow.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iteration budget exhausted; carries the last iterate and its gradient norm.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& msg, int iterations, double gradient_norm,
                    std::vector<double> last_iterate = {})
      : std::runtime_error(msg),
        iterations_(iterations),
        gradient_norm_(gradient_norm),
        last_iterate_(std::move(last_iterate)) {}

  int iterations() const { return iterations_; }
  double gradient_norm() const { return gradient_norm_; }
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  int iterations_;
  double gradient_norm_;
  std::vector<double> last_iterate_;
};

}  // namespace rcps
