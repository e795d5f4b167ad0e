#include "frailtycc/baseline_hazard.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "frailtycc/errors.hpp"

namespace frailtycc {

double StepCumHazard::operator()(double t) const {
  const auto end = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  const auto n = static_cast<std::size_t>(end - jump_times.begin());
  double sum = origin_offset;
  for (std::size_t g = 0; g < n; ++g) sum += jump_sizes[g];
  return sum;
}

double StepCumHazard::jump_at(double t) const {
  const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.end() || *it != t) return 0.0;
  return jump_sizes[static_cast<std::size_t>(it - jump_times.begin())];
}

double evaluate(const StepCumHazard& hazard, double t) {
  if (!(t >= 0.0)) throw DomainError("hazard evaluated at negative time");
  return hazard(t);
}

double risk_weight(const Subject& subject, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != subject.covariates.size()) {
    throw DomainError("beta and covariates differ in dimension");
  }
  double lp = 0.0;
  for (std::size_t l = 0; l < subject.covariates.size(); ++l) lp += beta[l] * subject.covariates[l];
  const double e = std::exp(lp);
  if (!std::isfinite(e)) throw NumericalError("risk weight exp(beta'Z) overflowed");
  return e;
}

KernelClipConfig clip_for(const FamilyTable& table, const RiskScores& scores, double lambda_max) {
  KernelClipConfig clip;
  clip.lambda_max = lambda_max;
  clip.nu = std::min(std::exp(scores.max_abs_linear_predictor), 1e6);
  clip.m_max = static_cast<int>(std::max<std::size_t>(table.m_max(), 1));
  return clip;
}

namespace {

constexpr std::size_t kParallelThreshold = 512;

// psi-bar with the gamma closed form inlined; identical arithmetic to
// FrailtyLaw::psi_star so both paths agree bit for bit.
struct PsiBar {
  const FrailtyLaw& law;
  double h_max;
  bool closed_form;
  double theta;

  double operator()(int r, double h) const {
    const double hc = std::min(h, h_max);
    if (closed_form) return (1.0 + r * theta) / (1.0 + theta * hc);
    return law.psi_star(r, hc);
  }
};

void check_preconditions(const FamilyTable& table, const FrailtyLaw& law, const KernelClipConfig& clip,
                         const RiskScores& scores) {
  if (table.n_events() == 0) throw NumericalError("no relative failures: the baseline hazard has no jumps");
  if (law.moment_order() != FrailtyLaw::kUnboundedMoments &&
      static_cast<std::size_t>(law.moment_order()) < table.m_max() + 2) {
    throw DomainError("frailty law '" + law.name() + "' lacks finite moments up to order m+2");
  }
  if (!clip.valid()) throw DomainError("invalid kernel clip configuration");
  if (std::isfinite(clip.lambda_max) && std::exp(scores.max_abs_linear_predictor) > clip.nu * (1.0 + 1e-12)) {
    throw DomainError("covariate effect bound violated: exp(|beta'Z|) exceeds nu = " + std::to_string(clip.nu));
  }
}

bool use_parallel(const StageOptions& opt, std::size_t active) {
  return opt.exec == Exec::Parallel && active >= kParallelThreshold && !in_parallel_region() && max_threads() > 1;
}

// Posterior-mean denominator terms of one family at grid step g (1-based).
struct FamilyState {
  double at_risk = 0.0;  // sum of exp(beta'Z) over relatives with T >= tau_g
  double exposure = 0.0; // H_i.(tau_{g-1})
  int events = 0;        // N_i.(tau_{g-1})
  int failing = 0;       // dN_i.(tau_g)
};

inline FamilyState family_state(const FamilyTable& table, const RiskScores& scores, std::size_t i, std::size_t g,
                                const std::vector<double>& cum, double rel_offset) {
  FamilyState s;
  for (std::size_t j = table.rel_begin[i]; j < table.rel_begin[i + 1]; ++j) {
    const std::size_t idx = table.rel_grid[j];
    const double e = scores.relative[j];
    if (idx >= g) s.at_risk += e;
    if (table.rel_event[j] == 1) {
      if (idx <= g - 1) {
        ++s.events;
      } else if (idx == g) {
        ++s.failing;
      }
    }
    s.exposure += (rel_offset + cum[std::min(idx, g - 1)]) * e;
  }
  return s;
}

inline double proband_level(const FamilyTable& table, std::size_t i, const std::vector<double>& cum,
                            std::size_t s0_index, const LeftRestriction& lr) {
  return std::max(0.0, lr.offset + cum[table.proband_grid[i]] - cum[std::min(s0_index, table.proband_grid[i])]);
}

// Sums the per-family (numerator, denominator) pairs over the active prefix
// of table.by_exit, serially or with OpenMP, in the same fixed order.
template <class Term>
void reduce_active(std::size_t active, bool parallel, std::vector<double>& num_buf, std::vector<double>& den_buf,
                   double& num, double& den, Term&& term) {
  num = den = 0.0;
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < active; ++k) term(k, num_buf[k], den_buf[k]);
    for (std::size_t k = 0; k < active; ++k) {
      num += num_buf[k];
      den += den_buf[k];
    }
  } else {
    for (std::size_t k = 0; k < active; ++k) {
      double a, b;
      term(k, a, b);
      num += a;
      den += b;
    }
  }
}

std::string time_label(double t) {
  std::ostringstream os;
  os.precision(10);
  os << t;
  return os.str();
}

}  // namespace

std::vector<double> first_stage_jumps(const FamilyTable& table, const HazardContext& ctx, const LeftRestriction& lr,
                                      const StageOptions& opt) {
  const RiskScores scores = table.risk_scores(ctx.gamma.beta);
  const FrailtyLaw law = ctx.law.with_theta(ctx.gamma.theta);
  check_preconditions(table, law, ctx.clip, scores);
  const PsiBar psi{law, ctx.clip.h_max(), law.kind() == FrailtyKind::GammaMeanOne, law.theta()};

  const std::size_t G = table.n_events(), F = table.n_families();
  const std::size_t s0_index = table.grid_count_below(lr.s0);
  std::vector<double> jumps(G, 0.0), cum(G + 1, 0.0);
  std::vector<double> num_buf(F), den_buf(F);
  std::size_t active = F;
  bool any = false;

  for (std::size_t g = 1; g <= G; ++g) {
    while (active > 0 && table.last_grid[table.by_exit[active - 1]] < g) --active;
    auto term = [&](std::size_t k, double& num, double& den) {
      const std::size_t i = table.by_exit[k];
      num = den = 0.0;
      if (table.proband_grid[i] > g - 1) return;  // requires T_i0 < tau_g
      const FamilyState s = family_state(table, scores, i, g, cum, lr.offset);
      if (s.at_risk == 0.0) return;
      const double h0 = proband_level(table, i, cum, s0_index, lr) * scores.proband[i];
      const double w = table.family_weight[i];
      num = w * s.failing;
      den = w * psi(s.events + table.proband_event[i], s.exposure + h0) * s.at_risk;
    };
    double num, den;
    reduce_active(active, use_parallel(opt, active), num_buf, den_buf, num, den, term);
    if (num > 0.0) {
      if (!(den > 0.0)) throw NumericalError("first stage: zero at-risk denominator at tau = " + time_label(table.event_times[g - 1]));
      jumps[g - 1] = num / den;
      any = true;
    }
    cum[g] = cum[g - 1] + jumps[g - 1];
  }
  if (!any) {
    throw NumericalError("first stage: no relative failure follows a proband observation time, every weighting indicator is 0");
  }
  return jumps;
}

std::vector<double> proband_exposure_base(const FamilyTable& table, const std::vector<double>& jumps,
                                          const LeftRestriction& lr) {
  std::vector<double> cum(jumps.size() + 1, 0.0);
  for (std::size_t g = 0; g < jumps.size(); ++g) cum[g + 1] = cum[g] + jumps[g];
  const std::size_t s0_index = table.grid_count_below(lr.s0);
  std::vector<double> out(table.n_families());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = proband_level(table, i, cum, s0_index, lr);
  return out;
}

std::vector<double> second_stage_jumps(const FamilyTable& table, const HazardContext& ctx,
                                       const std::vector<double>& proband_tilde, const LeftRestriction& lr,
                                       const StageOptions& opt, std::size_t g_limit) {
  const RiskScores scores = table.risk_scores(ctx.gamma.beta);
  const FrailtyLaw law = ctx.law.with_theta(ctx.gamma.theta);
  check_preconditions(table, law, ctx.clip, scores);
  if (proband_tilde.size() != table.n_families()) throw DomainError("need one first-stage value per family");
  const PsiBar psi{law, ctx.clip.h_max(), law.kind() == FrailtyKind::GammaMeanOne, law.theta()};

  const std::size_t G = std::min(table.n_events(), g_limit), F = table.n_families();
  const std::size_t s0_index = table.grid_count_below(lr.s0);
  std::vector<double> jumps(table.n_events(), 0.0), cum(table.n_events() + 1, 0.0);
  std::vector<double> num_buf(F), den_buf(F);
  std::size_t active = F;

  for (std::size_t g = 1; g <= G; ++g) {
    while (active > 0 && table.last_grid[table.by_exit[active - 1]] < g) --active;
    double num = 0.0;
    for (std::size_t f = table.failing_begin[g - 1]; f < table.failing_begin[g]; ++f) {
      num += table.family_weight[table.rel_family[table.failing[f]]];
    }
    auto term = [&](std::size_t k, double& unused, double& den) {
      const std::size_t i = table.by_exit[k];
      unused = den = 0.0;
      const FamilyState s = family_state(table, scores, i, g, cum, 0.0);
      if (s.at_risk == 0.0) return;
      const double level =
          table.proband_grid[i] <= g - 1 ? proband_level(table, i, cum, s0_index, lr) : proband_tilde[i];
      den = table.family_weight[i] * psi(s.events + table.proband_event[i], s.exposure + level * scores.proband[i]) *
            s.at_risk;
    };
    double ignored, den;
    reduce_active(active, use_parallel(opt, active), num_buf, den_buf, ignored, den, term);
    if (!(den > 0.0)) throw NumericalError("second stage: zero at-risk denominator at tau = " + time_label(table.event_times[g - 1]));
    jumps[g - 1] = num / den;
    cum[g] = cum[g - 1] + jumps[g - 1];
  }
  return jumps;
}

namespace {

std::vector<double> tilde_levels(const FamilyTable& table, const HazardContext& ctx, const LeftRestriction& lr,
                                 const StageOptions& opt) {
  const auto j1 = first_stage_jumps(table, ctx, lr, opt);
  auto tilde = proband_exposure_base(table, j1, lr);
  if (opt.truncate_first_stage && std::isfinite(ctx.clip.lambda_max)) {
    for (double& v : tilde) v = std::min(v, ctx.clip.lambda_max);
  }
  return tilde;
}

}  // namespace

std::vector<double> two_stage_jumps(const FamilyTable& table, const HazardContext& ctx, const LeftRestriction& lr,
                                    const StageOptions& opt) {
  return second_stage_jumps(table, ctx, tilde_levels(table, ctx, lr, opt), lr, opt);
}

double left_restricted_root_function(const FamilyTable& table, const HazardContext& ctx, double s0, double level,
                                     const StageOptions& opt) {
  const LeftRestriction lr{s0, level};
  const std::size_t g_limit = table.grid_count_at_or_below(s0);
  if (g_limit == 0) return -level;
  const auto j2 = second_stage_jumps(table, ctx, tilde_levels(table, ctx, lr, opt), lr, opt, g_limit);
  double sum = 0.0;
  for (std::size_t g = 0; g < g_limit; ++g) sum += j2[g];
  return sum - level;
}

GridHazard three_stage_jumps(const FamilyTable& table, const HazardContext& ctx, double s0, const StageOptions& opt) {
  if (!(s0 > 0.0)) return {two_stage_jumps(table, ctx, {}, opt), 0.0, 0};

  const std::size_t g_limit = table.grid_count_at_or_below(s0);
  double level = 0.0;
  int iterations = 0;
  if (g_limit > 0) {
    // Start from the Breslow estimate on relatives with unit frailty.
    const RiskScores scores = table.risk_scores(ctx.gamma.beta);
    for (std::size_t g = 1; g <= g_limit; ++g) {
      double num = 0.0, den = 0.0;
      for (std::size_t f = table.failing_begin[g - 1]; f < table.failing_begin[g]; ++f) {
        num += table.family_weight[table.rel_family[table.failing[f]]];
      }
      for (std::size_t j = 0; j < table.n_relatives(); ++j) {
        if (table.rel_grid[j] >= g) den += table.family_weight[table.rel_family[j]] * scores.relative[j];
      }
      level += num / den;
    }

    auto root = [&](double L) { return left_restricted_root_function(table, ctx, s0, L, opt); };
    std::ostringstream trace;
    bool converged = false;
    for (iterations = 1; iterations <= opt.newton_max_iter; ++iterations) {
      const double value = root(level);
      const double h = opt.newton_fd_step;
      const double slope = level - h >= 0.0 ? (root(level + h) - root(level - h)) / (2.0 * h)
                                            : (root(level + h) - value) / h;
      trace << " [" << iterations << ": L=" << level << " R=" << value << " R'=" << slope << "]";
      if (!std::isfinite(value) || !std::isfinite(slope) || slope == 0.0) break;
      double next = level - value / slope;
      if (next < 0.0) next = 0.5 * level;
      const double change = std::abs(next - level);
      level = next;
      if (change < opt.newton_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericalError("Newton iteration for Lambda0(s0) failed to converge:" + trace.str());
  }

  const LeftRestriction lr{s0, level};
  return {two_stage_jumps(table, ctx, lr, opt), level, iterations};
}

StepCumHazard to_step_hazard(const FamilyTable& table, const std::vector<double>& jumps, double offset) {
  StepCumHazard h;
  h.origin_offset = offset;
  for (std::size_t g = 0; g < jumps.size(); ++g) {
    if (jumps[g] > 0.0) {
      h.jump_times.push_back(table.event_times[g]);
      h.jump_sizes.push_back(jumps[g]);
    }
  }
  return h;
}

StepCumHazard first_stage(const Dataset& dataset, const HazardContext& ctx) {
  const FamilyTable table(dataset);
  return to_step_hazard(table, first_stage_jumps(table, ctx));
}

StepCumHazard second_stage(const Dataset& dataset, const HazardContext& ctx, const StepCumHazard& lambda_tilde) {
  const FamilyTable table(dataset);
  std::vector<double> tilde(table.n_families());
  for (std::size_t i = 0; i < tilde.size(); ++i) tilde[i] = lambda_tilde(table.proband_time[i]);
  return to_step_hazard(table, second_stage_jumps(table, ctx, tilde));
}

LeftRestrictedHazard three_stage_left_restricted(const Dataset& dataset, const HazardContext& ctx, double s0) {
  if (s0 < 0.0) throw DomainError("s0 must be >= 0");
  const FamilyTable table(dataset);
  const GridHazard gh = three_stage_jumps(table, ctx, s0);
  return {to_step_hazard(table, gh.jumps), gh.lambda0_s0, gh.newton_iterations};
}

}  // namespace frailtycc
