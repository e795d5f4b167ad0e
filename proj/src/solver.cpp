#include "frailtycc/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace frailtycc {

void FitOptions::validate() const {
  if (!(tol_gamma > 0.0 && tol_hazard > 0.0 && tol_score > 0.0)) throw DomainError("tolerances must be positive");
  if (max_outer < 1 || max_newton < 0) throw DomainError("iteration limits must be positive");
  if (!(theta_min > 0.0 && theta_min < theta_max)) throw DomainError("theta bounds must satisfy 0 < min < max");
  if (!(theta_init > theta_min && theta_init < theta_max)) throw DomainError("theta_init must lie inside the theta bounds");
  if (left_restricted && !(*left_restricted >= 0.0)) throw DomainError("s0 must be >= 0");
  if (lambda_max && !(*lambda_max > 0.0)) throw DomainError("lambda_max must be positive");
}

Eigen::VectorXd conditional_logistic_beta(const FamilyTable& table) {
  const std::size_t p = table.p(), n = table.n_sets();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (p == 0) return beta;
  auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    double ll = 0.0;
    if (grad) grad->setZero(static_cast<Eigen::Index>(p));
    if (hess) hess->setZero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < n; ++r) {
      const double w = table.family_weight[2 * r];
      Eigen::Map<const Eigen::VectorXd> zc(&table.proband_z[2 * r * p], static_cast<Eigen::Index>(p));
      Eigen::Map<const Eigen::VectorXd> zk(&table.proband_z[(2 * r + 1) * p], static_cast<Eigen::Index>(p));
      const Eigen::VectorXd d = zc - zk;
      const double x = b.dot(d);
      // log of 1 / (1 + exp(-x))
      ll -= w * (x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)));
      const double pk = 1.0 / (1.0 + std::exp(x));
      if (grad) *grad += w * pk * d;
      if (hess) *hess -= w * pk * (1.0 - pk) * d * d.transpose();
    }
    return ll;
  };
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double ll = objective(beta, &grad, &hess);
  for (int it = 0; it < 50 && grad.lpNorm<Eigen::Infinity>() > 1e-10 * std::max<double>(1.0, n); ++it) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      const Eigen::VectorXd cand = beta + t * step;
      const double cand_ll = objective(cand, nullptr, nullptr);
      if (cand_ll >= ll) {
        beta = cand;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ll = objective(beta, &grad, &hess);
  }
  if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > 10.0) beta.setZero();
  return beta;
}

double default_lambda_max(const FamilyTable& table, const Parameters& gamma, const FitOptions& options) {
  HazardContext ctx;
  ctx.gamma = gamma;
  ctx.law = options.law;
  StageOptions so;
  so.exec = options.exec;
  LeftRestriction lr;
  if (options.left_restricted) lr.s0 = *options.left_restricted;
  double total = 0.0;
  for (double j : first_stage_jumps(table, ctx, lr, so)) total += j;
  return total > 0.0 ? 10.0 * total : std::numeric_limits<double>::infinity();
}

namespace {

ProfileSpec spec_from(const FitOptions& o, double lambda_max) {
  ProfileSpec spec;
  spec.law = o.law;
  spec.lambda_max = lambda_max;
  spec.s0 = o.left_restricted.value_or(0.0);
  spec.stage.exec = o.exec;
  spec.stage.truncate_first_stage = o.truncate_first_stage;
  return spec;
}

double sup_change(const std::vector<double>& a, const std::vector<double>& b) {
  double ca = 0.0, cb = 0.0, sup = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    ca += a[g];
    cb += b[g];
    sup = std::max(sup, std::abs(ca - cb));
  }
  return sup;
}

double active_norm(const ScoreVector& u, bool theta_free) {
  const Eigen::Index q = u.size();
  double m = 0.0;
  for (Eigen::Index l = 0; l < q; ++l) {
    if (l == q - 1 && !theta_free) continue;
    m = std::max(m, std::abs(u[l]));
  }
  return m;
}

FitResult make_result(const FamilyTable& table, const Eigen::VectorXd& gamma, const ProfilePoint& pt, double lmax) {
  FitResult r;
  const Parameters par = unpack(gamma);
  r.beta_hat = par.beta;
  r.theta_hat = par.theta;
  r.grid_jumps = pt.hazard.jumps;
  r.hazard = to_step_hazard(table, pt.hazard.jumps);
  r.lambda0_s0 = pt.hazard.lambda0_s0;
  r.score = pt.score;
  r.final_score_norm = pt.score.lpNorm<Eigen::Infinity>();
  r.lambda_max = lmax;
  return r;
}

}  // namespace

FitResult fit(const FamilyTable& table, const FitOptions& options) {
  options.validate();
  const std::size_t p = table.p();
  Parameters start;
  start.beta = options.beta_init ? *options.beta_init : conditional_logistic_beta(table);
  if (static_cast<std::size_t>(start.beta.size()) != p) throw DomainError("beta_init has the wrong dimension");
  start.theta = options.theta_init;

  const double lmax = options.lambda_max ? *options.lambda_max : default_lambda_max(table, start, options);
  const ProfileSpec spec = spec_from(options, lmax);
  const Eigen::Index q = static_cast<Eigen::Index>(p + 1);

  Eigen::VectorXd gamma = pack(start);
  ProfilePoint cur = profile_point(table, start, spec);
  std::vector<TraceEntry> trace;
  trace.push_back({gamma, cur.score.lpNorm<Eigen::Infinity>(), 0.0, 0.0});
  bool at_bound = false;

  auto finish = [&](int iterations, bool converged) {
    FitResult r = make_result(table, gamma, cur, lmax);
    r.outer_iterations = iterations;
    r.converged = converged;
    r.theta_at_boundary = at_bound;
    r.trace = trace;
    return r;
  };
  auto fail = [&](int iterations, const std::string& why) {
    std::ostringstream os;
    os << "fit did not converge: " << why << " (iterations " << iterations << ", |U| = "
       << cur.score.lpNorm<Eigen::Infinity>() << ")";
    throw ConvergenceError(os.str(), finish(iterations, false));
  };

  for (int it = 1; it <= options.max_outer; ++it) {
    const JacobianResult jac = profile_jacobian(table, unpack(gamma), spec);
    if (jac.singular) throw NumericalError("score Jacobian is singular at iteration " + std::to_string(it));

    // Newton direction, holding theta on its bound when the step would leave the box.
    const double theta = gamma[q - 1];
    Eigen::VectorXd step = jac.matrix.fullPivLu().solve(-cur.score);
    bool theta_free = true;
    const bool on_low = theta <= options.theta_min && step[q - 1] < 0.0;
    const bool on_high = theta >= options.theta_max && step[q - 1] > 0.0;
    if ((on_low || on_high) && q > 1) {
      theta_free = false;
      step.setZero();
      step.head(q - 1) = jac.matrix.topLeftCorner(q - 1, q - 1).fullPivLu().solve(-cur.score.head(q - 1));
    } else if (on_low || on_high) {
      step.setZero();
      theta_free = false;
    }
    if (!step.allFinite()) throw NumericalError("Newton step is not finite at iteration " + std::to_string(it));

    const double norm0 = active_norm(cur.score, theta_free);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd next;
    ProfilePoint trial;
    for (int h = 0; h <= options.max_newton; ++h, t *= 0.5) {
      next = gamma + t * step;
      next[q - 1] = std::clamp(next[q - 1], options.theta_min, options.theta_max);
      try {
        trial = profile_point(table, unpack(next), spec);
      } catch (const NumericalError&) {
        continue;
      }
      const bool bound = next[q - 1] <= options.theta_min || next[q - 1] >= options.theta_max;
      if (active_norm(trial.score, theta_free && !bound) <= norm0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (norm0 <= options.tol_score) return finish(it - 1, true);
      fail(it, "line search found no decrease of the score norm");
    }

    const double dgamma = (next - gamma).lpNorm<Eigen::Infinity>();
    const double dhaz = sup_change(trial.hazard.jumps, cur.hazard.jumps);
    gamma = next;
    cur = std::move(trial);
    at_bound = gamma[q - 1] <= options.theta_min || gamma[q - 1] >= options.theta_max;
    const double norm = active_norm(cur.score, !at_bound);
    trace.push_back({gamma, cur.score.lpNorm<Eigen::Infinity>(), dhaz, t});
    if (dgamma < options.tol_gamma && dhaz < options.tol_hazard && norm < options.tol_score) {
      return finish(it, true);
    }
  }
  fail(options.max_outer, "iteration limit reached");
  return {};
}

FitResult fit(const Dataset& dataset, const FitOptions& options) {
  const FamilyTable table(dataset);
  return fit(table, options);
}

StepCumHazard profile_hazard(const Dataset& dataset, const Parameters& gamma, const FitOptions& options) {
  const FamilyTable table(dataset);
  const double lmax = options.lambda_max ? *options.lambda_max : default_lambda_max(table, gamma, options);
  const ProfileSpec spec = spec_from(options, lmax);
  const GridHazard gh = three_stage_jumps(table, hazard_context(table, gamma, spec), spec.s0, spec.stage);
  return to_step_hazard(table, gh.jumps);
}

}  // namespace frailtycc
