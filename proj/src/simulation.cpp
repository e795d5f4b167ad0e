#include "frailtycc/simulation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "frailtycc/errors.hpp"
#include "json.hpp"

namespace frailtycc {
namespace {

using nlohmann::json;

constexpr long kDrawBudget = 10'000'000;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(SimRng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double exponential(SimRng& rng, double rate) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return -std::log1p(-u) / rate;
}

struct Draw {
  double frailty;
  std::vector<double> z;
  double onset;
};

Draw draw_subject(const SimDesign& d, SimRng& rng, double frailty) {
  Draw s;
  s.frailty = frailty;
  s.z.resize(static_cast<std::size_t>(d.beta.size()));
  double lp = 0.0;
  for (std::size_t l = 0; l < s.z.size(); ++l) {
    s.z[l] = uniform(rng, d.covariate_low, d.covariate_high);
    lp += d.beta[static_cast<Eigen::Index>(l)] * s.z[l];
  }
  s.onset = exponential(rng, frailty * std::exp(lp) * d.baseline_scale);
  return s;
}

Subject observe(const Draw& s, double censor) {
  Subject out;
  out.covariates = s.z;
  if (s.onset <= censor) {
    out.time = s.onset;
    out.event = 1;
  } else {
    out.time = censor;
    out.event = 0;
  }
  return out;
}

}  // namespace

void SimDesign::validate() const {
  if (n_sets < 1) throw DomainError("design: n_sets must be >= 1");
  if (relatives_per_family < 1) throw DomainError("design: relatives_per_family must be >= 1");
  if (!(theta > 0.0)) throw DomainError("design: theta must be > 0");
  if (!(censor_max > 0.0)) throw DomainError("design: censor_max must be > 0");
  if (!(covariate_low <= covariate_high)) throw DomainError("design: covariate_low must not exceed covariate_high");
  if (!(baseline_scale > 0.0)) throw DomainError("design: baseline_scale must be > 0");
  if (s0 && !(*s0 >= 0.0 && *s0 < censor_max)) throw DomainError("design: s0 must lie in [0, censor_max)");
  if (!beta.allFinite()) throw DomainError("design: beta must be finite");
  for (double t : query_times) {
    if (!(t >= 0.0)) throw DomainError("design: query times must be >= 0");
  }
}

SimDesign SimDesign::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  if (!j.is_object()) throw DataError("design: expected a JSON object");
  static const std::set<std::string> known{"n_sets",     "relatives_per_family", "beta",   "theta",
                                           "covariate_low", "covariate_high",   "censor_max", "s0",
                                           "seed",       "query_times",          "baseline_scale"};
  SimDesign d;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.count(it.key())) throw DataError("design: unknown key '" + it.key() + "'");
    }
    if (j.contains("n_sets")) d.n_sets = j["n_sets"].get<int>();
    if (j.contains("relatives_per_family")) d.relatives_per_family = j["relatives_per_family"].get<int>();
    if (j.contains("beta")) {
      const json& b = j["beta"];
      std::vector<double> v = b.is_array() ? b.get<std::vector<double>>() : std::vector<double>{b.get<double>()};
      d.beta = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (j.contains("theta")) d.theta = j["theta"].get<double>();
    if (j.contains("covariate_low")) d.covariate_low = j["covariate_low"].get<double>();
    if (j.contains("covariate_high")) d.covariate_high = j["covariate_high"].get<double>();
    if (j.contains("censor_max")) d.censor_max = j["censor_max"].get<double>();
    if (j.contains("s0") && !j["s0"].is_null()) d.s0 = j["s0"].get<double>();
    if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("query_times")) d.query_times = j["query_times"].get<std::vector<double>>();
    if (j.contains("baseline_scale")) d.baseline_scale = j["baseline_scale"].get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  d.validate();
  return d;
}

SimDesign SimDesign::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open design file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string SimDesign::to_json_text() const {
  json j;
  j["n_sets"] = n_sets;
  j["relatives_per_family"] = relatives_per_family;
  j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  j["theta"] = theta;
  j["covariate_low"] = covariate_low;
  j["covariate_high"] = covariate_high;
  j["censor_max"] = censor_max;
  j["s0"] = s0 ? json(*s0) : json(nullptr);
  j["seed"] = seed;
  j["query_times"] = query_times;
  j["baseline_scale"] = baseline_scale;
  return j.dump(2);
}

double draw_frailty(const SimDesign& d, SimRng& rng) {
  std::gamma_distribution<double> g(1.0 / d.theta, d.theta);
  return g(rng);
}

SimRng replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  return SimRng(mix(mix(seed) + 0x632be59bd9b4e019ULL * (replicate + 1)));
}

FamilyRecord generate_family(const SimDesign& d, SimRng& rng, ProbandRole role, std::optional<double> match_time) {
  for (long draws = 0; draws < kDrawBudget; ++draws) {
    const double w = draw_frailty(d, rng);
    const Draw p = draw_subject(d, rng, w);
    FamilyRecord fam;
    if (role == ProbandRole::Control && match_time) {
      if (!(p.onset > *match_time)) continue;
      fam.proband.covariates = p.z;
      fam.proband.time = *match_time;
      fam.proband.event = 0;
    } else {
      fam.proband = observe(p, uniform(rng, 0.0, d.censor_max));
      if (role == ProbandRole::Case && fam.proband.event != 1) continue;
    }
    if (d.s0 && role != ProbandRole::Any && !(fam.proband.time > *d.s0)) continue;
    for (int k = 0; k < d.relatives_per_family; ++k) {
      fam.relatives.push_back(observe(draw_subject(d, rng, w), uniform(rng, 0.0, d.censor_max)));
    }
    return fam;
  }
  throw NumericalError("simulation: rejection budget of 1e7 draws exceeded");
}

Dataset generate_dataset(const SimDesign& d, SimRng& rng) {
  d.validate();
  Dataset data;
  data.p = static_cast<std::size_t>(d.beta.size());
  data.tau = d.censor_max;
  data.s0 = d.s0;
  data.matched_sets.reserve(static_cast<std::size_t>(d.n_sets));
  for (int r = 0; r < d.n_sets; ++r) {
    MatchedSet set;
    set.case_family = generate_family(d, rng, ProbandRole::Case);
    set.control_family = generate_family(d, rng, ProbandRole::Control, set.case_family.proband.time);
    data.matched_sets.push_back(std::move(set));
  }
  return data;
}

Dataset generate_dataset(const SimDesign& design, std::uint64_t replicate) {
  SimRng rng = replicate_rng(design.seed, replicate);
  return generate_dataset(design, rng);
}

ReplicationSummary run_replications(const SimDesign& design, int n_reps, const FitOptions& fit_options,
                                    const std::optional<BootstrapConfig>& bootstrap) {
  design.validate();
  if (n_reps < 1) throw DomainError("n_reps must be >= 1");
  FitOptions opt = fit_options;
  if (design.s0 && *design.s0 > 0.0) opt.left_restricted = design.s0;
  const bool lr = opt.left_restricted && *opt.left_restricted > 0.0;

  ReplicationSummary out;
  out.n_reps = n_reps;
  out.names = statistic_names(static_cast<std::size_t>(design.beta.size()), design.query_times, lr);
  const auto k = static_cast<Eigen::Index>(out.names.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.estimates = Eigen::MatrixXd::Constant(n_reps, k, nan);
  out.covered = Eigen::MatrixXd::Constant(n_reps, k, nan);
  std::vector<std::string> messages(static_cast<std::size_t>(n_reps));

  Eigen::VectorXd truth(k);
  const Eigen::Index p = design.beta.size();
  truth.head(p) = design.beta;
  truth[p] = design.theta;
  for (std::size_t q = 0; q < design.query_times.size(); ++q) {
    truth[p + 1 + static_cast<Eigen::Index>(q)] = design.true_lambda(design.query_times[q]);
  }
  if (lr) truth[k - 1] = design.true_lambda(*opt.left_restricted);

  auto run = [&](int r) {
    try {
      const Dataset data = generate_dataset(design, static_cast<std::uint64_t>(r));
      const FitResult f = fit(data, opt);
      out.estimates.row(r) = fit_statistics(f, design.query_times, lr).transpose();
      if (bootstrap) {
        BootstrapConfig bc = *bootstrap;
        bc.seed = mix(design.seed ^ mix(static_cast<std::uint64_t>(r) + 0x5bd1e995ULL));
        bc.lambda_query_times = design.query_times;
        const BootstrapResult b = bootstrap_fit(data, f, opt, bc);
        for (Eigen::Index c = 0; c < k; ++c) {
          out.covered(r, c) = (b.ci_low[c] <= truth[c] && truth[c] <= b.ci_high[c]) ? 1.0 : 0.0;
        }
      }
    } catch (const Error& e) {
      out.estimates.row(r).setConstant(nan);
      out.covered.row(r).setConstant(nan);
      messages[static_cast<std::size_t>(r)] = e.what();
    }
  };

  if (opt.exec == Exec::Parallel && max_threads() > 1 && !in_parallel_region()) {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < n_reps; ++r) run(r);
  } else {
    for (int r = 0; r < n_reps; ++r) run(r);
  }

  for (int r = 0; r < n_reps; ++r) {
    if (!messages[static_cast<std::size_t>(r)].empty()) {
      out.failures.push_back(r);
      out.failure_messages.push_back(messages[static_cast<std::size_t>(r)]);
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    SummaryRow row;
    row.name = out.names[static_cast<std::size_t>(c)];
    row.truth = truth[c];
    double sum = 0.0, cov = 0.0;
    int covn = 0;
    for (int r = 0; r < n_reps; ++r) {
      if (std::isnan(out.estimates(r, c))) continue;
      sum += out.estimates(r, c);
      ++row.count;
      if (!std::isnan(out.covered(r, c))) {
        cov += out.covered(r, c);
        ++covn;
      }
    }
    row.mean = row.count > 0 ? sum / row.count : nan;
    double ss = 0.0;
    for (int r = 0; r < n_reps; ++r) {
      if (!std::isnan(out.estimates(r, c))) ss += (out.estimates(r, c) - row.mean) * (out.estimates(r, c) - row.mean);
    }
    row.sd_defined = row.count > 1;
    row.sd = row.sd_defined ? std::sqrt(ss / (row.count - 1)) : 0.0;
    if (covn > 0) row.coverage = 100.0 * cov / covn;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace frailtycc
