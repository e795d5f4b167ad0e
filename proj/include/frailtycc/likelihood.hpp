#pragma once

#include <Eigen/Core>
#include <vector>

#include "frailtycc/baseline_hazard.hpp"
#include "frailtycc/data_model.hpp"
#include "frailtycc/family_table.hpp"
#include "frailtycc/frailty_kernel.hpp"

namespace frailtycc {

/// (U_1..U_p, U_{p+1}): beta components then theta.
using ScoreVector = Eigen::VectorXd;

/// A parameter value with a frozen baseline hazard. The law's own theta is
/// ignored; gamma.theta is used.
struct EvalPoint {
  Parameters gamma;
  StepCumHazard hazard;
  FrailtyLaw law = FrailtyLaw::gamma(1.0);
};

/// Conditional log-likelihood of which proband in each matched set is the case.
double proband_loglik(const Dataset& dataset, const EvalPoint& point);
ScoreVector proband_score(const Dataset& dataset, const EvalPoint& point);

/// Log-likelihood of the relatives given their proband, with lambda0(T_ij)
/// read as the hazard's jump at T_ij.
double relatives_loglik(const Dataset& dataset, const EvalPoint& point);
ScoreVector relatives_score(const Dataset& dataset, const EvalPoint& point);

/// n^{-1} (proband_score + relatives_score), n = number of matched sets.
ScoreVector total_score(const Dataset& dataset, const EvalPoint& point);

/// How the hazard is re-estimated for a given gamma.
struct ProfileSpec {
  FrailtyLaw law = FrailtyLaw::gamma(1.0);
  /// Bound used to clip the psi kernel; infinity disables clipping.
  double lambda_max = std::numeric_limits<double>::infinity();
  /// Left-restriction bound; 0 means the plain two-stage estimator.
  double s0 = 0.0;
  StageOptions stage;
};

struct JacobianResult {
  Eigen::MatrixXd matrix;
  bool singular = false;
};

/// Central-difference Jacobian of gamma -> U(gamma, Lambda^(., gamma)) with the
/// hazard re-estimated at every perturbed gamma (step 1e-5 max(1, |gamma_s|)).
JacobianResult score_jacobian(const Dataset& dataset, const EvalPoint& point, const ProfileSpec& spec = {});

// ---------------------------------------------------------------------------
// Table-level evaluation used by the solver and the bootstrap.

/// Lambda at each proband and relative time plus the jump at each relative time.
struct SubjectHazard {
  std::vector<double> proband_cum;
  std::vector<double> relative_cum;
  std::vector<double> relative_jump;
};

SubjectHazard subject_hazard(const FamilyTable& table, const std::vector<double>& grid_jumps);
SubjectHazard subject_hazard(const FamilyTable& table, const StepCumHazard& hazard);

/// Weighted sums over sets (proband part) and families (relatives part).
struct LikelihoodParts {
  double proband_loglik = 0.0;
  double relatives_loglik = 0.0;
  ScoreVector proband_score;
  ScoreVector relatives_score;
};

LikelihoodParts evaluate_likelihood(const FamilyTable& table, const Parameters& gamma, const FrailtyLaw& law,
                                    const SubjectHazard& hazard, Exec exec = Exec::Parallel);

/// The hazard and score along the profile gamma -> Lambda^(., gamma).
struct ProfilePoint {
  GridHazard hazard;
  ScoreVector score;  // already divided by n
};

HazardContext hazard_context(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec);
ProfilePoint profile_point(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec);

/// Same Jacobian as score_jacobian, on a table.
JacobianResult profile_jacobian(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec,
                                double rel_step = 1e-5);

/// Splits gamma into Parameters and back.
Parameters unpack(const Eigen::VectorXd& gamma);
Eigen::VectorXd pack(const Parameters& gamma);

}  // namespace frailtycc
