#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frailtycc/bootstrap.hpp"
#include "frailtycc/data_model.hpp"
#include "frailtycc/solver.hpp"

namespace frailtycc {

/// Data-generating design: gamma frailty with mean 1 and variance theta,
/// baseline Lambda0(t) = baseline_scale * t, covariates U(covariate_low,
/// covariate_high) per coordinate, censoring U(0, censor_max).
struct SimDesign {
  int n_sets = 500;
  int relatives_per_family = 1;
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.6931471805599453);
  double theta = 2.0;
  double covariate_low = 0.0;
  double covariate_high = 1.0;
  double censor_max = 1.0;
  std::optional<double> s0;
  std::uint64_t seed = 1;
  std::vector<double> query_times{0.2, 0.4, 0.6, 0.8};
  double baseline_scale = 1.0;

  void validate() const;
  double true_lambda(double t) const { return baseline_scale * t; }

  static SimDesign from_json_text(const std::string& text);
  static SimDesign load(const std::string& path);
  std::string to_json_text() const;
};

enum class ProbandRole { Case, Control, Any };

using SimRng = std::mt19937_64;

/// Generator for replicate `replicate` of a design seeded with `seed`.
SimRng replicate_rng(std::uint64_t seed, std::uint64_t replicate);

/// Gamma frailty with mean 1 and variance design.theta.
double draw_frailty(const SimDesign& design, SimRng& rng);

/// One family drawn from the prospective model. Case families are redrawn
/// until the proband's onset is observed; control probands are observed alive
/// at `match_time` and redrawn until their onset falls after it.
FamilyRecord generate_family(const SimDesign& design, SimRng& rng, ProbandRole role,
                             std::optional<double> match_time = std::nullopt);

/// n_sets case families each matched to a control family at the case's onset time.
Dataset generate_dataset(const SimDesign& design, SimRng& rng);
Dataset generate_dataset(const SimDesign& design, std::uint64_t replicate = 0);

struct SummaryRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  bool sd_defined = true;
  double coverage = std::numeric_limits<double>::quiet_NaN();  // percent
  int count = 0;
};

struct ReplicationSummary {
  std::vector<SummaryRow> rows;
  std::vector<std::string> names;
  Eigen::MatrixXd estimates;  // n_reps rows; failed replicates hold NaN
  Eigen::MatrixXd covered;    // 1/0 per replicate and estimand; NaN without bootstrap
  std::vector<int> failures;
  std::vector<std::string> failure_messages;
  int n_reps = 0;
};

ReplicationSummary run_replications(const SimDesign& design, int n_reps, const FitOptions& fit_options,
                                    const std::optional<BootstrapConfig>& bootstrap = std::nullopt);

}  // namespace frailtycc
