#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "frailtycc/solver.hpp"

namespace frailtycc {

struct BootstrapConfig {
  int n_replicates = 100;
  std::uint64_t seed = 1;
  double ci_level = 0.95;
  std::vector<double> lambda_query_times;
  /// One weight per family instead of one per matched set.
  bool per_family = false;
  /// Every weight equal to 1 (each replicate reproduces the base fit).
  bool unit_weights = false;
  double max_failure_fraction = 0.2;
  Exec exec = Exec::Parallel;

  void validate() const;
};

struct BootstrapResult {
  std::vector<std::string> names;       // beta1..betap, theta, Lambda0(t)..., Lambda0(s0)
  Eigen::VectorXd estimate;             // base fit
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  Eigen::MatrixXd replicate_estimates;  // B rows; failed replicates hold NaN
  std::vector<int> failures;
};

/// Exp(1) draws divided by their mean. The stream is a function of
/// (seed, replicate) only.
std::vector<double> draw_weights(std::uint64_t seed, std::uint64_t replicate, std::size_t count);

/// Divides positive raw draws by their mean.
std::vector<double> standardize_weights(std::vector<double> raw);

/// Statistics reported per replicate: beta, theta, Lambda at the query times,
/// and Lambda(s0) when the fit is left-restricted.
Eigen::VectorXd fit_statistics(const FitResult& fit, const std::vector<double>& query_times, bool left_restricted);
std::vector<std::string> statistic_names(std::size_t p, const std::vector<double>& query_times, bool left_restricted);

/// Sample quantile, linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

BootstrapResult bootstrap_fit(const Dataset& dataset, const FitResult& base, const FitOptions& options,
                              const BootstrapConfig& config);

}  // namespace frailtycc
