#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "frailtycc/baseline_hazard.hpp"
#include "frailtycc/data_model.hpp"

namespace testutil {

using namespace frailtycc;

inline Subject subj(double t, int e, std::vector<double> z) { return Subject{t, e, std::move(z)}; }

// Small random matched case-control dataset. Times are drawn from a coarse
// lattice when `ties` is set so several subjects share a time.
inline Dataset random_dataset(std::uint64_t seed, int n_sets, int p, int max_rel, bool ties = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto time = [&] {
    const double t = 0.05 + 0.9 * u(rng);
    return ties ? std::round(t * 10.0) / 10.0 : t;
  };
  auto covs = [&] {
    std::vector<double> z(static_cast<std::size_t>(p));
    for (double& v : z) v = u(rng) * 2.0 - 0.5;
    return z;
  };
  auto relatives = [&] {
    std::vector<Subject> rel;
    const int m = 1 + static_cast<int>(u(rng) * max_rel);
    for (int j = 0; j < std::min(m, max_rel); ++j) rel.push_back(subj(time(), u(rng) < 0.6 ? 1 : 0, covs()));
    return rel;
  };
  Dataset d;
  d.p = static_cast<std::size_t>(p);
  for (int r = 0; r < n_sets; ++r) {
    MatchedSet s;
    const double t0 = time();
    s.case_family.proband = subj(t0, 1, covs());
    s.case_family.relatives = relatives();
    s.control_family.proband = subj(t0, 0, covs());
    s.control_family.relatives = relatives();
    d.matched_sets.push_back(s);
  }
  // guarantee at least one relative failure after the earliest proband time
  d.matched_sets[0].case_family.relatives[0] = subj(0.97, 1, covs());
  d.tau = d.max_time();
  return d;
}

// Lambda(t) = t at every subject time; jumps at every distinct time.
inline StepCumHazard identity_at_subject_times(const Dataset& d) {
  std::set<double> times;
  for (const auto& s : d.matched_sets) {
    for (const FamilyRecord* f : {&s.case_family, &s.control_family}) {
      times.insert(f->proband.time);
      for (const auto& r : f->relatives) times.insert(r.time);
    }
  }
  StepCumHazard h;
  double prev = 0.0;
  for (double t : times) {
    if (t <= 0.0) continue;
    h.jump_times.push_back(t);
    h.jump_sizes.push_back(t - prev);
    prev = t;
  }
  return h;
}

// Arbitrary positive jumps at the relatives' failure times.
inline StepCumHazard wiggly_hazard(const Dataset& d, std::uint64_t seed) {
  std::set<double> times;
  for (const auto& s : d.matched_sets) {
    for (const FamilyRecord* f : {&s.case_family, &s.control_family}) {
      for (const auto& r : f->relatives) {
        if (r.event == 1) times.insert(r.time);
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.02, 0.3);
  StepCumHazard h;
  for (double t : times) {
    h.jump_times.push_back(t);
    h.jump_sizes.push_back(u(rng));
  }
  return h;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testutil
