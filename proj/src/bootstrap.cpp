#include "frailtycc/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace frailtycc {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string time_name(double t) {
  std::ostringstream os;
  os << "Lambda0(" << t << ")";
  return os.str();
}

}  // namespace

void BootstrapConfig::validate() const {
  if (n_replicates < 2) throw DomainError("bootstrap needs at least 2 replicates");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw DomainError("ci_level must lie in (0, 1)");
  for (double t : lambda_query_times) {
    if (!(t >= 0.0)) throw DomainError("query times must be >= 0");
  }
}

std::vector<double> standardize_weights(std::vector<double> raw) {
  double sum = 0.0;
  for (double w : raw) sum += w;
  const double mean = sum / static_cast<double>(raw.size());
  for (double& w : raw) w /= mean;
  return raw;
}

std::vector<double> draw_weights(std::uint64_t seed, std::uint64_t replicate, std::size_t count) {
  if (count == 0) throw DomainError("weight count must be >= 1");
  std::mt19937_64 gen(splitmix64(splitmix64(seed) ^ replicate));
  std::vector<double> raw(count);
  for (double& w : raw) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
    w = -std::log1p(-u);
    if (w == 0.0) w = std::numeric_limits<double>::min();
  }
  return standardize_weights(std::move(raw));
}

std::vector<std::string> statistic_names(std::size_t p, const std::vector<double>& query_times,
                                         bool left_restricted) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < p; ++l) names.push_back("beta" + std::to_string(l + 1));
  names.push_back("theta");
  for (double t : query_times) names.push_back(time_name(t));
  if (left_restricted) names.push_back("Lambda0(s0)");
  return names;
}

Eigen::VectorXd fit_statistics(const FitResult& fit, const std::vector<double>& query_times, bool left_restricted) {
  const Eigen::Index p = fit.beta_hat.size();
  Eigen::VectorXd out(p + 1 + static_cast<Eigen::Index>(query_times.size()) + (left_restricted ? 1 : 0));
  out.head(p) = fit.beta_hat;
  out[p] = fit.theta_hat;
  for (std::size_t k = 0; k < query_times.size(); ++k) out[p + 1 + static_cast<Eigen::Index>(k)] = fit.hazard(query_times[k]);
  if (left_restricted) out[out.size() - 1] = fit.lambda0_s0;
  return out;
}

double quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BootstrapResult bootstrap_fit(const Dataset& dataset, const FitResult& base, const FitOptions& options,
                              const BootstrapConfig& config) {
  config.validate();
  if (!base.converged) throw DomainError("bootstrap requires a converged base fit");
  const bool lr = options.left_restricted && *options.left_restricted > 0.0;

  FitOptions opt = options;
  opt.beta_init = base.beta_hat;
  opt.theta_init = std::clamp(base.theta_hat, opt.theta_min * 1.01, opt.theta_max * 0.99);
  opt.lambda_max = base.lambda_max;

  const FamilyTable table(dataset);
  const std::size_t units = config.per_family ? table.n_families() : table.n_sets();
  const auto B = static_cast<std::size_t>(config.n_replicates);

  BootstrapResult res;
  res.names = statistic_names(table.p(), config.lambda_query_times, lr);
  res.estimate = fit_statistics(base, config.lambda_query_times, lr);
  const Eigen::Index k = res.estimate.size();
  res.replicate_estimates = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(B), k,
                                                      std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(B, 0);

  auto run = [&](std::size_t b) {
    FamilyTable local = table;
    const std::vector<double> w =
        config.unit_weights ? std::vector<double>(units, 1.0) : draw_weights(config.seed, b, units);
    if (config.per_family) {
      local.set_family_weights(w);
    } else {
      local.set_set_weights(w);
    }
    try {
      const FitResult r = fit(local, opt);
      res.replicate_estimates.row(static_cast<Eigen::Index>(b)) =
          fit_statistics(r, config.lambda_query_times, lr).transpose();
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;
    }
  };

  if (config.exec == Exec::Parallel && max_threads() > 1 && !in_parallel_region()) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = 0; b < B; ++b) run(b);
  } else {
    for (std::size_t b = 0; b < B; ++b) run(b);
  }

  for (std::size_t b = 0; b < B; ++b) {
    if (!ok[b]) res.failures.push_back(static_cast<int>(b));
  }
  if (static_cast<double>(res.failures.size()) > config.max_failure_fraction * static_cast<double>(B)) {
    throw NumericalError("bootstrap: " + std::to_string(res.failures.size()) + " of " + std::to_string(B) +
                         " replicates failed");
  }
  if (B - res.failures.size() < 2) throw NumericalError("bootstrap: fewer than 2 replicates converged");

  res.se.resize(k);
  res.ci_low.resize(k);
  res.ci_high.resize(k);
  const double alpha = 1.0 - config.ci_level;
  for (Eigen::Index c = 0; c < k; ++c) {
    std::vector<double> col;
    for (std::size_t b = 0; b < B; ++b) {
      if (ok[b]) col.push_back(res.replicate_estimates(static_cast<Eigen::Index>(b), c));
    }
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    res.se[c] = std::sqrt(ss / static_cast<double>(col.size() - 1));
    res.ci_low[c] = quantile(col, alpha / 2.0);
    res.ci_high[c] = quantile(col, 1.0 - alpha / 2.0);
  }
  return res;
}

}  // namespace frailtycc
