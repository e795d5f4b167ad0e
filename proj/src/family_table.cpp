#include "frailtycc/family_table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frailtycc/errors.hpp"

namespace frailtycc {
namespace {

void append_subject(std::vector<double>& key, const Subject& s) {
  key.push_back(s.time);
  key.push_back(s.event);
  key.insert(key.end(), s.covariates.begin(), s.covariates.end());
}

std::vector<double> set_key(const MatchedSet& set) {
  std::vector<double> key;
  for (const FamilyRecord* f : {&set.case_family, &set.control_family}) {
    append_subject(key, f->proband);
    key.push_back(static_cast<double>(f->relatives.size()));
    for (const auto& r : f->relatives) append_subject(key, r);
  }
  return key;
}

}  // namespace

FamilyTable::FamilyTable(const Dataset& dataset) : n_sets_(dataset.n_sets()), p_(dataset.p) {
  if (n_sets_ == 0) throw DataError("dataset has no matched sets");

  std::vector<std::vector<double>> keys(n_sets_);
  for (std::size_t r = 0; r < n_sets_; ++r) keys[r] = set_key(dataset.matched_sets[r]);
  set_origin_.resize(n_sets_);
  std::iota(set_origin_.begin(), set_origin_.end(), 0);
  std::stable_sort(set_origin_.begin(), set_origin_.end(),
                   [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  const std::size_t F = n_families();
  rel_begin.assign(1, 0);
  for (std::size_t r = 0; r < n_sets_; ++r) {
    const MatchedSet& set = dataset.matched_sets[set_origin_[r]];
    for (const FamilyRecord* f : {&set.case_family, &set.control_family}) {
      if (f->proband.covariates.size() != p_) throw DataError("covariate vector length differs from p");
      proband_time.push_back(f->proband.time);
      proband_event.push_back(f->proband.event);
      proband_z.insert(proband_z.end(), f->proband.covariates.begin(), f->proband.covariates.end());
      for (const auto& rel : f->relatives) {
        if (rel.covariates.size() != p_) throw DataError("covariate vector length differs from p");
        rel_time.push_back(rel.time);
        rel_event.push_back(rel.event);
        rel_z.insert(rel_z.end(), rel.covariates.begin(), rel.covariates.end());
      }
      m_max_ = std::max(m_max_, f->relatives.size());
      rel_begin.push_back(rel_time.size());
    }
  }
  family_weight.assign(F, 1.0);
  rel_family.resize(rel_time.size());
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t j = rel_begin[i]; j < rel_begin[i + 1]; ++j) rel_family[j] = i;
  }

  for (std::size_t j = 0; j < rel_time.size(); ++j) {
    if (rel_event[j] == 1) event_times.push_back(rel_time[j]);
  }
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
  const std::size_t G = event_times.size();

  rel_grid.resize(rel_time.size());
  for (std::size_t j = 0; j < rel_time.size(); ++j) rel_grid[j] = grid_count_at_or_below(rel_time[j]);
  proband_grid.resize(F);
  for (std::size_t i = 0; i < F; ++i) proband_grid[i] = grid_count_at_or_below(proband_time[i]);

  event_count.assign(G, 0);
  std::vector<std::vector<std::size_t>> fail_lists(G);
  for (std::size_t j = 0; j < rel_time.size(); ++j) {
    if (rel_event[j] == 1) {
      ++event_count[rel_grid[j] - 1];
      fail_lists[rel_grid[j] - 1].push_back(j);
    }
  }
  failing_begin.assign(1, 0);
  for (std::size_t g = 0; g < G; ++g) {
    failing.insert(failing.end(), fail_lists[g].begin(), fail_lists[g].end());
    failing_begin.push_back(failing.size());
  }

  last_grid.assign(F, 0);
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t j = rel_begin[i]; j < rel_begin[i + 1]; ++j) last_grid[i] = std::max(last_grid[i], rel_grid[j]);
  }
  by_exit.resize(F);
  std::iota(by_exit.begin(), by_exit.end(), 0);
  std::stable_sort(by_exit.begin(), by_exit.end(),
                   [this](std::size_t a, std::size_t b) { return last_grid[a] > last_grid[b]; });
}

void FamilyTable::set_set_weights(std::span<const double> weights) {
  if (weights.size() != n_sets_) throw DomainError("expected one weight per matched set");
  for (std::size_t r = 0; r < n_sets_; ++r) {
    family_weight[2 * r] = family_weight[2 * r + 1] = weights[set_origin_[r]];
  }
}

void FamilyTable::set_family_weights(std::span<const double> weights) {
  if (weights.size() != n_families()) throw DomainError("expected one weight per family");
  for (std::size_t r = 0; r < n_sets_; ++r) {
    family_weight[2 * r] = weights[2 * set_origin_[r]];
    family_weight[2 * r + 1] = weights[2 * set_origin_[r] + 1];
  }
}

void FamilyTable::reset_weights() { std::fill(family_weight.begin(), family_weight.end(), 1.0); }

RiskScores FamilyTable::risk_scores(const Eigen::VectorXd& beta) const {
  if (static_cast<std::size_t>(beta.size()) != p_) throw DomainError("beta has the wrong dimension");
  RiskScores out;
  auto score = [&](const std::vector<double>& z, std::size_t row) {
    double lp = 0.0;
    for (std::size_t l = 0; l < p_; ++l) lp += beta[l] * z[row * p_ + l];
    out.max_abs_linear_predictor = std::max(out.max_abs_linear_predictor, std::abs(lp));
    const double e = std::exp(lp);
    if (!std::isfinite(e)) throw NumericalError("risk weight exp(beta'Z) overflowed");
    return e;
  };
  out.proband.resize(n_families());
  for (std::size_t i = 0; i < n_families(); ++i) out.proband[i] = score(proband_z, i);
  out.relative.resize(n_relatives());
  for (std::size_t j = 0; j < n_relatives(); ++j) out.relative[j] = score(rel_z, j);
  return out;
}

std::size_t FamilyTable::grid_count_below(double t) const {
  return static_cast<std::size_t>(std::lower_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
}

std::size_t FamilyTable::grid_count_at_or_below(double t) const {
  return static_cast<std::size_t>(std::upper_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
}

}  // namespace frailtycc
