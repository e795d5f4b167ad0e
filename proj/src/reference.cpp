#include "frailtycc/reference.hpp"

#include <algorithm>
#include <cmath>

#include "frailtycc/errors.hpp"

namespace frailtycc::reference {
namespace {

double weight_of(const FamilyWeights& w, std::size_t family) { return w.empty() ? 1.0 : w.at(family); }

double lp(const Subject& s, const Eigen::VectorXd& beta) {
  double v = 0.0;
  for (std::size_t l = 0; l < s.covariates.size(); ++l) v += beta[l] * s.covariates[l];
  return v;
}

std::vector<double> failure_times(const Dataset& data) {
  std::vector<double> t;
  for (const auto& set : data.matched_sets) {
    for (const FamilyRecord* f : {&set.case_family, &set.control_family}) {
      for (const auto& r : f->relatives) {
        if (r.event == 1) t.push_back(r.time);
      }
    }
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// sum of jumps[h] over h < limit with lo <= times[h] <= hi
double partial_sum(const std::vector<double>& times, const std::vector<double>& jumps, std::size_t limit, double lo,
                   double hi) {
  double s = 0.0;
  for (std::size_t h = 0; h < limit; ++h) {
    if (times[h] >= lo && times[h] <= hi) s += jumps[h];
  }
  return s;
}

StepCumHazard as_step(const std::vector<double>& times, const std::vector<double>& jumps) {
  StepCumHazard out;
  for (std::size_t g = 0; g < times.size(); ++g) {
    if (jumps[g] > 0.0) {
      out.jump_times.push_back(times[g]);
      out.jump_sizes.push_back(jumps[g]);
    }
  }
  return out;
}

template <class F>
void for_each_family(const Dataset& data, F&& f) {
  std::size_t k = 0;
  for (const auto& set : data.matched_sets) {
    f(set.case_family, k++);
    f(set.control_family, k++);
  }
}

}  // namespace

StepCumHazard first_stage(const Dataset& data, const HazardContext& ctx, const LeftRestriction& lr,
                          const FamilyWeights& weights) {
  const FrailtyLaw law = ctx.law.with_theta(ctx.gamma.theta);
  const auto times = failure_times(data);
  std::vector<double> jumps(times.size(), 0.0);
  for (std::size_t g = 0; g < times.size(); ++g) {
    const double tg = times[g];
    double num = 0.0, den = 0.0;
    for_each_family(data, [&](const FamilyRecord& fam, std::size_t k) {
      if (!(fam.proband.time < tg)) return;
      const double w = weight_of(weights, k);
      int n_before = 0;
      double exposure = 0.0, at_risk = 0.0;
      for (const auto& r : fam.relatives) {
        const double e = std::exp(lp(r, ctx.gamma.beta));
        if (r.event == 1 && r.time < tg) ++n_before;
        if (r.event == 1 && r.time == tg) num += w;
        if (r.time >= tg) at_risk += e;
        exposure += (lr.offset + partial_sum(times, jumps, g, 0.0, r.time)) * e;
      }
      const double level = std::max(0.0, lr.offset + partial_sum(times, jumps, g, lr.s0, fam.proband.time));
      const double h0 = level * std::exp(lp(fam.proband, ctx.gamma.beta));
      den += w * psi_bar(law, n_before + fam.proband.event, exposure + h0, ctx.clip) * at_risk;
    });
    if (num > 0.0) jumps[g] = num / den;
  }
  return as_step(times, jumps);
}

std::vector<double> proband_tilde(const Dataset& data, const StepCumHazard& first, const LeftRestriction& lr) {
  std::vector<double> out;
  for_each_family(data, [&](const FamilyRecord& fam, std::size_t) {
    double s = lr.offset;
    for (std::size_t h = 0; h < first.jump_times.size(); ++h) {
      if (first.jump_times[h] >= lr.s0 && first.jump_times[h] <= fam.proband.time) s += first.jump_sizes[h];
    }
    out.push_back(std::max(0.0, s));
  });
  return out;
}

StepCumHazard second_stage(const Dataset& data, const HazardContext& ctx, const std::vector<double>& tilde,
                           const LeftRestriction& lr, const FamilyWeights& weights) {
  const FrailtyLaw law = ctx.law.with_theta(ctx.gamma.theta);
  const auto times = failure_times(data);
  std::vector<double> jumps(times.size(), 0.0);
  for (std::size_t g = 0; g < times.size(); ++g) {
    const double tg = times[g];
    double num = 0.0, den = 0.0;
    for_each_family(data, [&](const FamilyRecord& fam, std::size_t k) {
      const double w = weight_of(weights, k);
      int n_before = 0;
      double exposure = 0.0, at_risk = 0.0;
      for (const auto& r : fam.relatives) {
        const double e = std::exp(lp(r, ctx.gamma.beta));
        if (r.event == 1 && r.time < tg) ++n_before;
        if (r.event == 1 && r.time == tg) num += w;
        if (r.time >= tg) at_risk += e;
        exposure += partial_sum(times, jumps, g, 0.0, r.time) * e;
      }
      const double level = fam.proband.time < tg
                               ? std::max(0.0, lr.offset + partial_sum(times, jumps, g, lr.s0, fam.proband.time))
                               : tilde.at(k);
      const double h0 = level * std::exp(lp(fam.proband, ctx.gamma.beta));
      den += w * psi_bar(law, n_before + fam.proband.event, exposure + h0, ctx.clip) * at_risk;
    });
    jumps[g] = num / den;
  }
  return as_step(times, jumps);
}

StepCumHazard two_stage(const Dataset& data, const HazardContext& ctx, const LeftRestriction& lr,
                        const FamilyWeights& weights) {
  const StepCumHazard first = first_stage(data, ctx, lr, weights);
  return second_stage(data, ctx, proband_tilde(data, first, lr), lr, weights);
}

LeftRestrictedHazard three_stage(const Dataset& data, const HazardContext& ctx, double s0) {
  if (!(s0 > 0.0)) return {two_stage(data, ctx), 0.0, 0};
  auto root = [&](double level) {
    const LeftRestriction lr{s0, level};
    return two_stage(data, ctx, lr)(s0) - level;
  };
  double lo = 0.0, hi = 1.0;
  while (root(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw NumericalError("reference three-stage: no sign change");
  }
  int it = 0;
  while (hi - lo > 1e-14 * std::max(1.0, hi) && it < 200) {
    const double mid = 0.5 * (lo + hi);
    (root(mid) > 0.0 ? lo : hi) = mid;
    ++it;
  }
  const double level = 0.5 * (lo + hi);
  return {two_stage(data, ctx, {s0, level}), level, it};
}

StepCumHazard breslow(const Dataset& data, const Eigen::VectorXd& beta) {
  const auto times = failure_times(data);
  std::vector<double> jumps(times.size(), 0.0);
  for (std::size_t g = 0; g < times.size(); ++g) {
    double d = 0.0, den = 0.0;
    for_each_family(data, [&](const FamilyRecord& fam, std::size_t) {
      for (const auto& r : fam.relatives) {
        if (r.event == 1 && r.time == times[g]) d += 1.0;
        if (r.time >= times[g]) den += std::exp(lp(r, beta));
      }
    });
    jumps[g] = d / den;
  }
  return as_step(times, jumps);
}

double proband_loglik(const Dataset& data, const Parameters& gamma, const FrailtyLaw& base,
                      const StepCumHazard& hazard, const FamilyWeights& weights) {
  const FrailtyLaw law = base.with_theta(gamma.theta);
  double total = 0.0;
  for (std::size_t r = 0; r < data.matched_sets.size(); ++r) {
    const auto& set = data.matched_sets[r];
    auto term = [&](const Subject& s) {
      const double e = std::exp(lp(s, gamma.beta));
      return e * xi_ratio(law, 1, 0, hazard(s.time) * e);
    };
    const double a = term(set.case_family.proband), b = term(set.control_family.proband);
    total += weight_of(weights, 2 * r) * std::log(a / (a + b));
  }
  return total;
}

Eigen::VectorXd proband_score(const Dataset& data, const Parameters& gamma, const FrailtyLaw& base,
                              const StepCumHazard& hazard, const FamilyWeights& weights) {
  const FrailtyLaw law = base.with_theta(gamma.theta);
  const std::size_t p = data.p;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  for (std::size_t r = 0; r < data.matched_sets.size(); ++r) {
    const auto& set = data.matched_sets[r];
    const Subject* subj[2] = {&set.case_family.proband, &set.control_family.proband};
    double a[2];
    Eigen::VectorXd da[2];  // derivative of e^{beta'Z} xi10(H)
    for (int c = 0; c < 2; ++c) {
      const Subject& s = *subj[c];
      const double e = std::exp(lp(s, gamma.beta));
      const double h = hazard(s.time) * e;
      const double xi = xi_ratio(law, 1, 0, h);
      a[c] = e * xi;
      da[c].resize(static_cast<Eigen::Index>(p + 1));
      for (std::size_t l = 0; l < p; ++l) {
        da[c][l] = s.covariates[l] * e * xi + e * xi10_dbeta(law, h, s.covariates[l]);
      }
      da[c][p] = e * xi_dtheta(law, 1, 0, h);
    }
    u += weight_of(weights, 2 * r) * (da[0] / a[0] - (da[0] + da[1]) / (a[0] + a[1]));
  }
  return u;
}

namespace {

struct FamilyTotals {
  int events = 0;
  double exposure = 0.0;  // relatives only
  double h0 = 0.0;
};

FamilyTotals totals(const FamilyRecord& fam, const Parameters& gamma, const StepCumHazard& hazard) {
  FamilyTotals t;
  for (const auto& r : fam.relatives) {
    t.events += r.event;
    t.exposure += hazard(r.time) * std::exp(lp(r, gamma.beta));
  }
  t.h0 = hazard(fam.proband.time) * std::exp(lp(fam.proband, gamma.beta));
  return t;
}

}  // namespace

double relatives_loglik(const Dataset& data, const Parameters& gamma, const FrailtyLaw& base,
                        const StepCumHazard& hazard, const FamilyWeights& weights) {
  const FrailtyLaw law = base.with_theta(gamma.theta);
  double total = 0.0;
  for_each_family(data, [&](const FamilyRecord& fam, std::size_t k) {
    double part = 0.0;
    for (const auto& r : fam.relatives) {
      if (r.event == 1) {
        const double jump = hazard.jump_at(r.time);
        if (!(jump > 0.0)) throw NumericalError("relative failure without a hazard jump");
        part += std::log(jump) + lp(r, gamma.beta);
      }
    }
    const FamilyTotals t = totals(fam, gamma, hazard);
    const int d0 = fam.proband.event;
    part += std::log(mu_k(law, t.events + d0, t.exposure + t.h0) / mu_k(law, d0, t.h0));
    total += weight_of(weights, k) * part;
  });
  return total;
}

Eigen::VectorXd relatives_score(const Dataset& data, const Parameters& gamma, const FrailtyLaw& base,
                                const StepCumHazard& hazard, const FamilyWeights& weights) {
  const FrailtyLaw law = base.with_theta(gamma.theta);
  const std::size_t p = data.p;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  for_each_family(data, [&](const FamilyRecord& fam, std::size_t k) {
    const FamilyTotals t = totals(fam, gamma, hazard);
    const int d0 = fam.proband.event;
    const int top = t.events + d0;
    const double h_all = t.exposure + t.h0;
    const double post_all = mu_k(law, top + 1, h_all) / mu_k(law, top, h_all);
    const double post_0 = mu_k(law, d0 + 1, t.h0) / mu_k(law, d0, t.h0);
    Eigen::VectorXd part = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
    for (std::size_t l = 0; l < p; ++l) {
      double s = 0.0, hz = 0.0;
      for (const auto& r : fam.relatives) {
        s += r.event * r.covariates[l];
        hz += hazard(r.time) * std::exp(lp(r, gamma.beta)) * r.covariates[l];
      }
      const double h0z = t.h0 * fam.proband.covariates[l];
      part[l] = s - post_all * (hz + h0z) + post_0 * h0z;
    }
    part[p] = mu_k_dtheta(law, top, h_all) / mu_k(law, top, h_all) - mu_k_dtheta(law, d0, t.h0) / mu_k(law, d0, t.h0);
    u += weight_of(weights, k) * part;
  });
  return u;
}

}  // namespace frailtycc::reference
