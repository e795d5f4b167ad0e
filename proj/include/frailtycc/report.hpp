#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frailtycc/bootstrap.hpp"
#include "frailtycc/simulation.hpp"
#include "frailtycc/solver.hpp"

namespace frailtycc {

/// %.17g; "nan" and "inf" spelled out.
std::string format_number(double v);

std::string fit_json(const FitResult& fit, const std::vector<double>& query_times,
                     std::optional<double> left_restricted);
/// tau_g,delta_lambda,lambda_cum
std::string hazard_csv(const StepCumHazard& hazard);

/// Fields of a fit JSON needed to restart from it.
struct SavedFit {
  Eigen::VectorXd beta;
  double theta = 1.0;
  std::optional<double> lambda_max;
  std::optional<double> left_restricted;
  bool converged = false;
};
SavedFit parse_fit_json(const std::string& text);

/// {name: {est, se, ci_low, ci_high}}
std::string bootstrap_json(const BootstrapResult& result);
std::string bootstrap_replicates_csv(const BootstrapResult& result);

/// Aligned text table: estimand, true value, mean, SD, coverage.
std::string summary_table(const ReplicationSummary& summary);
std::string summary_csv(const ReplicationSummary& summary);
std::string replicates_csv(const ReplicationSummary& summary);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace frailtycc
