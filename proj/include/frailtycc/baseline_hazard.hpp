#pragma once

#include <Eigen/Core>
#include <vector>

#include "frailtycc/data_model.hpp"
#include "frailtycc/family_table.hpp"
#include "frailtycc/frailty_kernel.hpp"
#include "frailtycc/parallel.hpp"

namespace frailtycc {

/// Right-continuous step function
///   Lambda(t) = origin_offset + sum_{tau_g <= t} jump_sizes[g].
struct StepCumHazard {
  std::vector<double> jump_times;  // strictly increasing
  std::vector<double> jump_sizes;  // positive
  double origin_offset = 0.0;

  double operator()(double t) const;
  /// Jump size at exactly t, 0 if t is not a jump time.
  double jump_at(double t) const;
};

double evaluate(const StepCumHazard& hazard, double t);

struct HazardContext {
  Parameters gamma;
  FrailtyLaw law = FrailtyLaw::gamma(1.0);
  KernelClipConfig clip;
};

/// exp(beta' Z) for one subject.
double risk_weight(const Subject& subject, const Eigen::VectorXd& beta);

/// Weighted Breslow-type first stage: only families whose proband was observed
/// strictly before tau_g contribute at tau_g, and the posterior frailty mean
/// uses the estimate accumulated through tau_{g-1}.
StepCumHazard first_stage(const Dataset& dataset, const HazardContext& ctx);

/// Second stage: every family contributes; proband exposure uses
/// `lambda_tilde(T_0)` while T_0 >= tau_g and the second-stage estimate after.
StepCumHazard second_stage(const Dataset& dataset, const HazardContext& ctx, const StepCumHazard& lambda_tilde);

struct LeftRestrictedHazard {
  StepCumHazard hazard;
  double lambda0_s0 = 0.0;
  int newton_iterations = 0;
};

/// Three-stage estimator for proband times restricted to [s0, s1]: solve for
/// Lambda0(s0) by Newton-Raphson, then run the two stages with proband
/// exposures Lambda0(s0) + sum_{tau_g in [s0, T_0]} jumps.
LeftRestrictedHazard three_stage_left_restricted(const Dataset& dataset, const HazardContext& ctx, double s0);

// ---------------------------------------------------------------------------
// Table-level engine shared by the solver and the bootstrap.

/// Left-restriction state: proband exposures are offset + sum of jumps in [s0, T_0].
/// The default (0, 0) is the unrestricted design.
struct LeftRestriction {
  double s0 = 0.0;
  double offset = 0.0;
};

struct StageOptions {
  Exec exec = Exec::Parallel;
  /// Replace Lambda~ by min(Lambda~, lambda_max) where the second stage reads it.
  bool truncate_first_stage = false;
  int newton_max_iter = 100;
  double newton_tol = 1e-10;
  double newton_fd_step = 1e-6;
};

/// Jumps of the first stage on the table's event grid (size G, zeros allowed).
std::vector<double> first_stage_jumps(const FamilyTable& table, const HazardContext& ctx,
                                      const LeftRestriction& lr = {}, const StageOptions& opt = {});

/// Jumps of the second stage on the event grid. `proband_tilde[i]` is the
/// first-stage Lambda~(T_i0) of family i. Only the first `g_limit` jumps are
/// computed when g_limit < G.
std::vector<double> second_stage_jumps(const FamilyTable& table, const HazardContext& ctx,
                                       const std::vector<double>& proband_tilde, const LeftRestriction& lr = {},
                                       const StageOptions& opt = {}, std::size_t g_limit = SIZE_MAX);

/// Lambda~(T_i0) for every family from first-stage grid jumps.
std::vector<double> proband_exposure_base(const FamilyTable& table, const std::vector<double>& jumps,
                                          const LeftRestriction& lr);

/// Both stages for fixed gamma; returns the second-stage grid jumps.
std::vector<double> two_stage_jumps(const FamilyTable& table, const HazardContext& ctx,
                                    const LeftRestriction& lr = {}, const StageOptions& opt = {});

/// Left side of the Lambda0(s0) estimating equation:
///   sum_{tau_g <= s0} dLambda^(tau_g; L) - L.
double left_restricted_root_function(const FamilyTable& table, const HazardContext& ctx, double s0, double level,
                                     const StageOptions& opt = {});

struct GridHazard {
  std::vector<double> jumps;  // aligned with table.event_times
  double lambda0_s0 = 0.0;
  int newton_iterations = 0;
};

/// Three-stage estimator on the table. s0 <= 0 reproduces two_stage_jumps bit for bit.
GridHazard three_stage_jumps(const FamilyTable& table, const HazardContext& ctx, double s0,
                             const StageOptions& opt = {});

/// Converts grid jumps to a step function, dropping zero jumps.
StepCumHazard to_step_hazard(const FamilyTable& table, const std::vector<double>& jumps, double offset = 0.0);

/// Clip configuration for a given beta: nu = exp(max |beta'Z|) capped at 1e6.
KernelClipConfig clip_for(const FamilyTable& table, const RiskScores& scores, double lambda_max);

}  // namespace frailtycc
