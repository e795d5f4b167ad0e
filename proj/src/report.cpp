#include "frailtycc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "frailtycc/errors.hpp"
#include "json.hpp"

namespace frailtycc {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

ordered number(double v) { return std::isfinite(v) ? ordered(v) : ordered(nullptr); }

ordered vec(const Eigen::VectorXd& v) {
  ordered a = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fit_json(const FitResult& fit, const std::vector<double>& query_times,
                     std::optional<double> left_restricted) {
  ordered j;
  j["converged"] = fit.converged;
  j["beta"] = vec(fit.beta_hat);
  j["theta"] = number(fit.theta_hat);
  j["theta_at_boundary"] = fit.theta_at_boundary;
  j["left_restricted"] = left_restricted ? ordered(*left_restricted) : ordered(nullptr);
  if (left_restricted) j["lambda0_s0"] = number(fit.lambda0_s0);
  ordered q = ordered::array();
  for (double t : query_times) q.push_back({{"t", t}, {"lambda0", number(fit.hazard(t))}});
  j["lambda0_at"] = q;
  j["score"] = vec(fit.score);
  j["score_norm"] = number(fit.final_score_norm);
  j["outer_iterations"] = fit.outer_iterations;
  j["lambda_max"] = number(fit.lambda_max);
  j["n_jumps"] = fit.hazard.jump_times.size();
  ordered tr = ordered::array();
  for (const auto& e : fit.trace) {
    tr.push_back({{"gamma", vec(e.gamma)},
                  {"score_norm", number(e.score_norm)},
                  {"hazard_change", number(e.hazard_change)},
                  {"step", number(e.step_scale)}});
  }
  j["trace"] = tr;
  return j.dump(2) + "\n";
}

std::string hazard_csv(const StepCumHazard& hazard) {
  std::string out = "tau_g,delta_lambda,lambda_cum\n";
  double cum = hazard.origin_offset;
  for (std::size_t g = 0; g < hazard.jump_times.size(); ++g) {
    cum += hazard.jump_sizes[g];
    out += format_number(hazard.jump_times[g]) + "," + format_number(hazard.jump_sizes[g]) + "," +
           format_number(cum) + "\n";
  }
  return out;
}

SavedFit parse_fit_json(const std::string& text) {
  SavedFit s;
  try {
    const json j = json::parse(text);
    const auto beta = j.at("beta").get<std::vector<double>>();
    s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    s.theta = j.at("theta").get<double>();
    s.converged = j.value("converged", false);
    if (j.contains("lambda_max")) {
      s.lambda_max = j["lambda_max"].is_null() ? std::numeric_limits<double>::infinity()
                                               : j["lambda_max"].get<double>();
    }
    if (j.contains("left_restricted") && !j["left_restricted"].is_null()) {
      s.left_restricted = j["left_restricted"].get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("fit file: ") + e.what());
  }
  return s;
}

std::string bootstrap_json(const BootstrapResult& r) {
  ordered j = ordered::object();
  for (std::size_t c = 0; c < r.names.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    j[r.names[c]] = {{"est", number(r.estimate[i])},
                     {"se", number(r.se[i])},
                     {"ci_low", number(r.ci_low[i])},
                     {"ci_high", number(r.ci_high[i])}};
  }
  return j.dump(2) + "\n";
}

std::string bootstrap_replicates_csv(const BootstrapResult& r) {
  std::string out = "replicate";
  for (const auto& n : r.names) out += "," + n;
  out += "\n";
  for (Eigen::Index b = 0; b < r.replicate_estimates.rows(); ++b) {
    out += std::to_string(b);
    for (Eigen::Index c = 0; c < r.replicate_estimates.cols(); ++c) out += "," + format_number(r.replicate_estimates(b, c));
    out += "\n";
  }
  return out;
}

std::string summary_table(const ReplicationSummary& s) {
  std::size_t w0 = 9;
  for (const auto& row : s.rows) w0 = std::max(w0, row.name.size());
  std::ostringstream os;
  os << pad("estimand", w0) << pad("true", 10) << pad("mean", 10) << pad("sd", 10) << pad("cov(%)", 9)
     << pad("n", 6) << "\n";
  for (const auto& row : s.rows) {
    os << pad(row.name, w0) << pad(fixed(row.truth, 3), 10) << pad(fixed(row.mean, 3), 10)
       << pad(row.sd_defined ? fixed(row.sd, 3) : "0*", 10) << pad(fixed(row.coverage, 1), 9)
       << pad(std::to_string(row.count), 6) << "\n";
  }
  os << "replicates: " << s.n_reps << ", failed: " << s.failures.size() << "\n";
  bool flagged = false;
  for (const auto& row : s.rows) flagged = flagged || !row.sd_defined;
  if (flagged) os << "* sd undefined for a single replicate\n";
  return os.str();
}

std::string summary_csv(const ReplicationSummary& s) {
  std::string out = "estimand,truth,mean,sd,sd_defined,coverage,n\n";
  for (const auto& row : s.rows) {
    out += row.name + "," + format_number(row.truth) + "," + format_number(row.mean) + "," + format_number(row.sd) +
           "," + (row.sd_defined ? "1" : "0") + "," + format_number(row.coverage) + "," + std::to_string(row.count) +
           "\n";
  }
  return out;
}

std::string replicates_csv(const ReplicationSummary& s) {
  std::string out = "replicate";
  for (const auto& n : s.names) out += "," + n;
  for (const auto& n : s.names) out += ",covered_" + n;
  out += "\n";
  for (Eigen::Index r = 0; r < s.estimates.rows(); ++r) {
    out += std::to_string(r);
    for (Eigen::Index c = 0; c < s.estimates.cols(); ++c) out += "," + format_number(s.estimates(r, c));
    for (Eigen::Index c = 0; c < s.covered.cols(); ++c) out += "," + format_number(s.covered(r, c));
    out += "\n";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace frailtycc
