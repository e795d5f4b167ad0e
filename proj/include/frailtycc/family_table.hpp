#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "frailtycc/data_model.hpp"

namespace frailtycc {

/// Regression coefficients and frailty parameter, gamma = (beta, theta).
struct Parameters {
  Eigen::VectorXd beta;
  double theta = 1.0;
};

/// exp(beta' Z) for every proband and relative, in table order.
struct RiskScores {
  std::vector<double> proband;
  std::vector<double> relative;
  double max_abs_linear_predictor = 0.0;
};

/// Flattened, canonically ordered view of a Dataset used by the estimators.
///
/// Matched sets are sorted by their contents so every sum the estimators form
/// runs in an order that does not depend on how the input was arranged. Set
/// r occupies families 2r (case) and 2r+1 (control). The relatives' distinct
/// failure times form the event grid tau_1 < ... < tau_G; each subject stores
/// grid_index = #{g : tau_g <= T}, so Lambda(T) is cum[grid_index] for any
/// step function living on the grid.
class FamilyTable {
 public:
  explicit FamilyTable(const Dataset& dataset);

  std::size_t n_sets() const noexcept { return n_sets_; }
  std::size_t n_families() const noexcept { return 2 * n_sets_; }
  std::size_t n_relatives() const noexcept { return rel_time.size(); }
  std::size_t p() const noexcept { return p_; }
  std::size_t m_max() const noexcept { return m_max_; }
  std::size_t n_events() const noexcept { return event_times.size(); }

  /// Dataset index of the set stored at canonical position r.
  std::size_t original_set(std::size_t r) const { return set_origin_[r]; }

  /// Weights per matched set, in dataset order; both families of a set share it.
  void set_set_weights(std::span<const double> weights);
  /// Weights per family in dataset order: [case_0, control_0, case_1, ...].
  void set_family_weights(std::span<const double> weights);
  void reset_weights();

  RiskScores risk_scores(const Eigen::VectorXd& beta) const;

  /// Number of grid points strictly below t.
  std::size_t grid_count_below(double t) const;
  /// Number of grid points at or below t.
  std::size_t grid_count_at_or_below(double t) const;

  // Family-level columns (size n_families).
  std::vector<double> proband_time;
  std::vector<int> proband_event;
  std::vector<double> proband_z;           // row-major n_families x p
  std::vector<std::size_t> proband_grid;   // #{tau_g <= T_i0}
  std::vector<std::size_t> rel_begin;      // relatives of family i: [rel_begin[i], rel_begin[i+1])
  std::vector<double> family_weight;
  std::vector<std::size_t> last_grid;      // max relative grid index in the family

  // Relative-level columns (size n_relatives).
  std::vector<double> rel_time;
  std::vector<int> rel_event;
  std::vector<double> rel_z;               // row-major n_relatives x p
  std::vector<std::size_t> rel_grid;
  std::vector<std::size_t> rel_family;

  // Event grid (size G).
  std::vector<double> event_times;
  std::vector<int> event_count;            // d_g
  std::vector<std::size_t> failing_begin;  // relatives failing at tau_g: failing[failing_begin[g]..]
  std::vector<std::size_t> failing;

  /// Families ordered by last_grid descending: at grid step g (1-based) the
  /// families with someone still at risk are exactly the prefix with last_grid >= g.
  std::vector<std::size_t> by_exit;

 private:
  std::size_t n_sets_ = 0;
  std::size_t p_ = 0;
  std::size_t m_max_ = 0;
  std::vector<std::size_t> set_origin_;
};

}  // namespace frailtycc
