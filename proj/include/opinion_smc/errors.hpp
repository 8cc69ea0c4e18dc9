#pragma once

#include <stdexcept>
#include <string>

namespace opinion_smc {

/// Invalid argument to a library operation.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Gaussian with zero variance was asked for a log-density.
class DegenerateDensityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Every weight in an ensemble is zero.
class DegenerateEnsembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization failed or produced non-finite output.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The filter lost every particle at `step`.
class FilterFailure : public std::runtime_error {
 public:
  FilterFailure(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// No particle reached a clustered state within the step cap.
class PredictionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cluster rank was requested that no sample possesses.
class MissingRankError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opinion_smc
