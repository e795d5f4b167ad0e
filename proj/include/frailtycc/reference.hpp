#pragma once

#include <Eigen/Core>
#include <vector>

#include "frailtycc/baseline_hazard.hpp"
#include "frailtycc/data_model.hpp"

// Straightforward single-threaded versions of the estimators, written directly
// against the Dataset in its own order with the kernel's free functions. They
// are slow (quadratic in the number of subjects per grid point) and exist to
// check the table-based kernels and to benchmark them.
namespace frailtycc::reference {

/// Per-family weights in dataset order [case_0, control_0, case_1, ...];
/// empty means all ones.
using FamilyWeights = std::vector<double>;

StepCumHazard first_stage(const Dataset& data, const HazardContext& ctx, const LeftRestriction& lr = {},
                          const FamilyWeights& weights = {});

/// `tilde` supplies Lambda~(T_0) per family (dataset order).
StepCumHazard second_stage(const Dataset& data, const HazardContext& ctx, const std::vector<double>& tilde,
                           const LeftRestriction& lr = {}, const FamilyWeights& weights = {});

StepCumHazard two_stage(const Dataset& data, const HazardContext& ctx, const LeftRestriction& lr = {},
                        const FamilyWeights& weights = {});

/// Returns the final hazard and Lambda0(s0) (bisection on the root function).
LeftRestrictedHazard three_stage(const Dataset& data, const HazardContext& ctx, double s0);

/// Lambda~(T_0) for every family from a first-stage step function.
std::vector<double> proband_tilde(const Dataset& data, const StepCumHazard& first, const LeftRestriction& lr);

/// Naive Breslow estimate on relatives alone with unit frailty.
StepCumHazard breslow(const Dataset& data, const Eigen::VectorXd& beta);

double proband_loglik(const Dataset& data, const Parameters& gamma, const FrailtyLaw& law,
                      const StepCumHazard& hazard, const FamilyWeights& weights = {});
Eigen::VectorXd proband_score(const Dataset& data, const Parameters& gamma, const FrailtyLaw& law,
                              const StepCumHazard& hazard, const FamilyWeights& weights = {});
double relatives_loglik(const Dataset& data, const Parameters& gamma, const FrailtyLaw& law,
                        const StepCumHazard& hazard, const FamilyWeights& weights = {});
Eigen::VectorXd relatives_score(const Dataset& data, const Parameters& gamma, const FrailtyLaw& law,
                                const StepCumHazard& hazard, const FamilyWeights& weights = {});

}  // namespace frailtycc::reference
