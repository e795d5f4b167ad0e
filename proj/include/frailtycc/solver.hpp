#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>
#include <vector>

#include "frailtycc/errors.hpp"
#include "frailtycc/likelihood.hpp"

namespace frailtycc {

struct FitOptions {
  /// Starting beta; empty means conditional logistic regression on the probands.
  std::optional<Eigen::VectorXd> beta_init;
  double theta_init = 1.0;
  double tol_gamma = 1e-6;
  double tol_hazard = 1e-6;
  double tol_score = 1e-5;
  int max_outer = 100;
  /// Step halvings tried by the line search.
  int max_newton = 20;
  double theta_min = 1e-4;
  double theta_max = 50.0;
  /// Proband times restricted to [s0, s1].
  std::optional<double> left_restricted;
  FrailtyLaw law = FrailtyLaw::gamma(1.0);
  /// Kernel clip bound; empty means 10 x the largest first-stage cumulative
  /// hazard at the starting value. Infinity disables clipping.
  std::optional<double> lambda_max;
  bool truncate_first_stage = false;
  Exec exec = Exec::Parallel;

  void validate() const;
};

struct TraceEntry {
  Eigen::VectorXd gamma;
  double score_norm = 0.0;
  double hazard_change = 0.0;
  double step_scale = 1.0;
};

struct FitResult {
  Eigen::VectorXd beta_hat;
  double theta_hat = 0.0;
  StepCumHazard hazard;
  std::vector<double> grid_jumps;  // on the table's event grid
  double lambda0_s0 = 0.0;
  ScoreVector score;
  double final_score_norm = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  bool theta_at_boundary = false;
  double lambda_max = std::numeric_limits<double>::infinity();
  std::vector<TraceEntry> trace;

  Parameters parameters() const { return {beta_hat, theta_hat}; }
};

/// Raised when the outer loop stops without converging; carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FitResult partial) : Error(what), partial_(std::move(partial)) {}
  const FitResult& partial() const noexcept { return partial_; }

 private:
  FitResult partial_;
};

/// Alternates hazard estimation at the current gamma and damped Newton steps on
/// the profile score until gamma, the hazard and the score have all settled.
FitResult fit(const Dataset& dataset, const FitOptions& options = {});
FitResult fit(const FamilyTable& table, const FitOptions& options = {});

/// Two-stage (or three-stage when left_restricted is set) hazard at a fixed gamma.
StepCumHazard profile_hazard(const Dataset& dataset, const Parameters& gamma, const FitOptions& options = {});

/// Maximizer of the proband conditional likelihood with unit frailty.
Eigen::VectorXd conditional_logistic_beta(const FamilyTable& table);

/// The default clip bound for a starting value.
double default_lambda_max(const FamilyTable& table, const Parameters& gamma, const FitOptions& options);

}  // namespace frailtycc
