// frailtycc: fit, simulate, bootstrap and validate from the command line.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "frailtycc/bootstrap.hpp"
#include "frailtycc/data_model.hpp"
#include "frailtycc/parallel.hpp"
#include "frailtycc/report.hpp"
#include "frailtycc/simulation.hpp"
#include "frailtycc/solver.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace frailtycc;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

struct Args {
  std::string command;
  std::string data, out, design, fit_file, config, emit_dataset;
  std::optional<double> left_restricted, theta_init, lambda_max;
  std::vector<double> beta_init, query;
  int reps = -1, bootstrap_b = 0, B = -1, threads = -1, max_outer = 100;
  std::optional<std::uint64_t> seed;
  bool per_family = false;
  double ci_level = 0.95, tol = 1e-6;
};

struct App {
  std::unique_ptr<CLI::App> app;
  std::map<std::string, CLI::App*> subs;
};

App make_app(Args& a) {
  App out;
  out.app = std::make_unique<CLI::App>("Shared frailty models for matched case-control family data", "frailtycc");
  auto& app = *out.app;
  app.require_subcommand(1);
  auto common = [&](CLI::App* s) {
    s->add_option("--config", a.config, "JSON file whose keys mirror the long flags");
    s->add_option("--threads", a.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  };

  auto* fit = app.add_subcommand("fit", "fit the model to a dataset");
  fit->add_option("--data", a.data, "dataset (.csv or .json)")->required();
  fit->add_option("--out", a.out, "output directory")->required();
  fit->add_option("--left-restricted", a.left_restricted, "lower bound s0 of proband times");
  fit->add_option("--theta-init", a.theta_init, "starting theta");
  fit->add_option("--beta-init", a.beta_init, "starting beta, comma separated")->delimiter(',');
  fit->add_option("--query", a.query, "times at which to report Lambda0")->delimiter(',');
  fit->add_option("--lambda-max", a.lambda_max, "kernel clip bound (inf disables)");
  fit->add_option("--tol", a.tol, "tolerance on gamma and the hazard");
  fit->add_option("--max-outer", a.max_outer, "outer iteration limit");
  common(fit);

  auto* sim = app.add_subcommand("simulate", "run a replication study");
  sim->add_option("--design", a.design, "design JSON")->required();
  sim->add_option("--reps", a.reps, "number of replicates")->required();
  sim->add_option("--out", a.out, "output directory")->required();
  sim->add_option("--bootstrap", a.bootstrap_b, "bootstrap replicates per dataset (0 = none)");
  sim->add_option("--seed", a.seed, "overrides the design seed");
  sim->add_option("--emit-dataset", a.emit_dataset, "also write the first replicate's dataset here");
  common(sim);

  auto* boot = app.add_subcommand("bootstrap", "weighted bootstrap around a fit");
  boot->add_option("--data", a.data, "dataset (.csv or .json)")->required();
  boot->add_option("--fit", a.fit_file, "fit.json written by `fit`")->required();
  boot->add_option("--B", a.B, "number of replicates (>= 2)")->required();
  boot->add_option("--out", a.out, "output directory")->required();
  boot->add_option("--seed", a.seed, "random seed");
  boot->add_flag("--per-family", a.per_family, "one weight per family instead of per matched set");
  boot->add_option("--query", a.query, "times at which to report Lambda0")->delimiter(',');
  boot->add_option("--ci-level", a.ci_level, "confidence level");
  common(boot);

  auto* val = app.add_subcommand("validate", "check a dataset against the model's assumptions");
  val->add_option("--data", a.data, "dataset (.csv or .json)")->required();

  out.subs = {{"fit", fit}, {"simulate", sim}, {"bootstrap", boot}, {"validate", val}};
  return out;
}

std::string json_to_arg(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ",") + json_to_arg(e);
    return s;
  }
  return v.dump();
}

// Parses argv, then appends the config file's settings for every flag not
// given on the command line and parses again.
int parse(int argc, char** argv, Args& args, App& app) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::reverse(raw.begin(), raw.end());
  try {
    app.app->parse(std::vector<std::string>(raw));
  } catch (const CLI::CallForHelp& e) {
    return app.app->exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.app->exit(e);
  } catch (const CLI::RequiredError& e) {
    if (args.config.empty()) {
      app.app->exit(e);
      return kInputError;
    }
  } catch (const CLI::ParseError& e) {
    app.app->exit(e);
    return kInputError;
  }
  for (const auto& [name, sub] : app.subs) {
    if (sub->parsed()) args.command = name;
  }
  if (args.config.empty()) return -1;

  CLI::App* sub = app.subs.at(args.command);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_file(args.config));
  } catch (const std::exception& e) {
    std::cerr << "error: config file: " << e.what() << "\n";
    return kInputError;
  }
  if (!cfg.is_object()) {
    std::cerr << "error: config file must hold a JSON object\n";
    return kInputError;
  }
  std::vector<std::string> extended(argv + 1, argv + argc);
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    std::string key = it.key();
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      std::cerr << "error: config key '" << it.key() << "' is not an option of " << args.command << "\n";
      return kInputError;
    }
    if (opt->count() > 0 || key == "config") continue;
    if (opt->get_type_size() == 0) {
      if (it.value().get<bool>()) extended.push_back(flag);
    } else {
      extended.push_back(flag);
      extended.push_back(json_to_arg(it.value()));
    }
  }
  Args fresh;
  App again = make_app(fresh);
  std::reverse(extended.begin(), extended.end());
  try {
    again.app->parse(extended);
  } catch (const CLI::ParseError& e) {
    again.app->exit(e);
    return kInputError;
  }
  fresh.command = args.command;
  args = fresh;
  app = std::move(again);
  return -1;
}

void apply_threads(const Args& a) {
  int n = a.threads;
  if (n < 0) {
    if (const char* env = std::getenv("FRAILTYCC_THREADS")) n = std::atoi(env);
  }
  if (n > 0) set_threads(n);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

std::vector<double> default_query(const Dataset& data) {
  const double top = data.max_time();
  return {0.2 * top, 0.4 * top, 0.6 * top, 0.8 * top};
}

int check_dataset(const Dataset& data) {
  const auto problems = validate(data);
  for (const auto& v : problems) std::cerr << "invalid: " << v.describe() << "\n";
  return problems.empty() ? kOk : kInputError;
}

int cmd_fit(const Args& a) {
  const Dataset data = load_dataset(a.data);
  if (check_dataset(data) != kOk) return kInputError;

  FitOptions opt;
  opt.left_restricted = a.left_restricted ? a.left_restricted : data.s0;
  if (opt.left_restricted) {
    std::size_t below = 0;
    for (const auto& s : data.matched_sets) {
      below += (s.case_family.proband.time < *opt.left_restricted) + (s.control_family.proband.time < *opt.left_restricted);
    }
    if (below > 0) {
      std::cerr << "warning: " << below << " proband times lie below s0 = " << *opt.left_restricted
                << "; proceeding\n";
    }
  }
  if (a.theta_init) opt.theta_init = *a.theta_init;
  if (!a.beta_init.empty()) {
    opt.beta_init = Eigen::Map<const Eigen::VectorXd>(a.beta_init.data(), static_cast<Eigen::Index>(a.beta_init.size()));
  }
  opt.lambda_max = a.lambda_max;
  opt.tol_gamma = opt.tol_hazard = a.tol;
  opt.max_outer = a.max_outer;
  const std::vector<double> query = a.query.empty() ? default_query(data) : a.query;

  ensure_dir(a.out);
  FitResult result;
  int code = kOk;
  try {
    result = fit(data, opt);
  } catch (const ConvergenceError& e) {
    std::cerr << "warning: " << e.what() << "\n";
    result = e.partial();
    code = kNotConverged;
  }
  write_file((fs::path(a.out) / "fit.json").string(), fit_json(result, query, opt.left_restricted));
  write_file((fs::path(a.out) / "hazard.csv").string(), hazard_csv(result.hazard));
  std::cout << "beta =";
  for (Eigen::Index l = 0; l < result.beta_hat.size(); ++l) std::cout << " " << format_number(result.beta_hat[l]);
  std::cout << "\ntheta = " << format_number(result.theta_hat) << "\n";
  for (double t : query) std::cout << "Lambda0(" << t << ") = " << format_number(result.hazard(t)) << "\n";
  std::cout << (result.converged ? "converged" : "NOT converged") << " after " << result.outer_iterations
            << " iterations, |U| = " << format_number(result.final_score_norm) << "\n";
  return code;
}

int cmd_simulate(const Args& a) {
  if (a.reps < 1) {
    std::cerr << "usage error: --reps must be >= 1\n";
    return kInputError;
  }
  if (a.bootstrap_b == 1 || a.bootstrap_b < 0) {
    std::cerr << "usage error: --bootstrap needs 0 or at least 2 replicates\n";
    return kInputError;
  }
  SimDesign design = SimDesign::load(a.design);
  if (a.seed) design.seed = *a.seed;
  ensure_dir(a.out);
  if (!a.emit_dataset.empty()) save_dataset(generate_dataset(design, 0), a.emit_dataset);

  std::optional<BootstrapConfig> bc;
  if (a.bootstrap_b >= 2) {
    bc = BootstrapConfig{};
    bc->n_replicates = a.bootstrap_b;
  }
  const ReplicationSummary s = run_replications(design, a.reps, FitOptions{}, bc);
  const std::string table = summary_table(s);
  write_file((fs::path(a.out) / "summary.txt").string(), table);
  write_file((fs::path(a.out) / "summary.csv").string(), summary_csv(s));
  write_file((fs::path(a.out) / "replicates.csv").string(), replicates_csv(s));
  std::cout << table;
  for (std::size_t k = 0; k < s.failures.size(); ++k) {
    std::cerr << "replicate " << s.failures[k] << " failed: " << s.failure_messages[k] << "\n";
  }
  return kOk;
}

int cmd_bootstrap(const Args& a) {
  if (a.B < 2) {
    std::cerr << "usage error: --B must be >= 2\n";
    return kInputError;
  }
  const Dataset data = load_dataset(a.data);
  if (check_dataset(data) != kOk) return kInputError;
  const SavedFit saved = parse_fit_json(read_file(a.fit_file));
  if (static_cast<std::size_t>(saved.beta.size()) != data.p) {
    std::cerr << "error: fit file and dataset disagree on the number of covariates\n";
    return kInputError;
  }

  FitOptions opt;
  opt.beta_init = saved.beta;
  opt.theta_init = std::clamp(saved.theta, opt.theta_min * 1.01, opt.theta_max * 0.99);
  opt.lambda_max = saved.lambda_max;
  opt.left_restricted = saved.left_restricted;
  const FitResult base = fit(data, opt);

  BootstrapConfig bc;
  bc.n_replicates = a.B;
  bc.seed = a.seed.value_or(1);
  bc.per_family = a.per_family;
  bc.ci_level = a.ci_level;
  bc.lambda_query_times = a.query.empty() ? default_query(data) : a.query;
  const BootstrapResult r = bootstrap_fit(data, base, opt, bc);

  ensure_dir(a.out);
  write_file((fs::path(a.out) / "bootstrap.json").string(), bootstrap_json(r));
  write_file((fs::path(a.out) / "replicates.csv").string(), bootstrap_replicates_csv(r));
  for (std::size_t c = 0; c < r.names.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    std::cout << r.names[c] << ": est " << format_number(r.estimate[i]) << ", se " << format_number(r.se[i])
              << ", ci [" << format_number(r.ci_low[i]) << ", " << format_number(r.ci_high[i]) << "]\n";
  }
  if (!r.failures.empty()) std::cerr << "warning: " << r.failures.size() << " replicates failed\n";
  return kOk;
}

int cmd_validate(const Args& a) {
  const Dataset data = load_dataset(a.data);
  const int code = check_dataset(data);
  if (code == kOk) {
    std::cout << "valid: " << data.n_sets() << " matched sets, p = " << data.p << ", max relatives "
              << data.max_relatives() << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Args args;
  App app = make_app(args);
  if (const int code = parse(argc, argv, args, app); code >= 0) return code;
  apply_threads(args);
  try {
    if (args.command == "fit") return cmd_fit(args);
    if (args.command == "simulate") return cmd_simulate(args);
    if (args.command == "bootstrap") return cmd_bootstrap(args);
    return cmd_validate(args);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
