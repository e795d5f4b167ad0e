#include "frailtycc/likelihood.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "frailtycc/errors.hpp"

namespace frailtycc {

Parameters unpack(const Eigen::VectorXd& gamma) {
  Parameters out;
  out.beta = gamma.head(gamma.size() - 1);
  out.theta = gamma[gamma.size() - 1];
  return out;
}

Eigen::VectorXd pack(const Parameters& gamma) {
  Eigen::VectorXd out(gamma.beta.size() + 1);
  out << gamma.beta, gamma.theta;
  return out;
}

SubjectHazard subject_hazard(const FamilyTable& table, const std::vector<double>& grid_jumps) {
  if (grid_jumps.size() != table.n_events()) throw DomainError("grid jumps do not match the event grid");
  std::vector<double> cum(grid_jumps.size() + 1, 0.0);
  for (std::size_t g = 0; g < grid_jumps.size(); ++g) cum[g + 1] = cum[g] + grid_jumps[g];
  SubjectHazard h;
  h.proband_cum.resize(table.n_families());
  for (std::size_t i = 0; i < table.n_families(); ++i) h.proband_cum[i] = cum[table.proband_grid[i]];
  h.relative_cum.resize(table.n_relatives());
  h.relative_jump.resize(table.n_relatives());
  for (std::size_t j = 0; j < table.n_relatives(); ++j) {
    const std::size_t g = table.rel_grid[j];
    h.relative_cum[j] = cum[g];
    h.relative_jump[j] = g > 0 && table.event_times[g - 1] == table.rel_time[j] ? grid_jumps[g - 1] : 0.0;
  }
  return h;
}

SubjectHazard subject_hazard(const FamilyTable& table, const StepCumHazard& hazard) {
  SubjectHazard h;
  h.proband_cum.resize(table.n_families());
  for (std::size_t i = 0; i < table.n_families(); ++i) h.proband_cum[i] = hazard(table.proband_time[i]);
  h.relative_cum.resize(table.n_relatives());
  h.relative_jump.resize(table.n_relatives());
  for (std::size_t j = 0; j < table.n_relatives(); ++j) {
    h.relative_cum[j] = hazard(table.rel_time[j]);
    h.relative_jump[j] = hazard.jump_at(table.rel_time[j]);
  }
  return h;
}

namespace {

// log xi10(h), d/dh-free pieces used by the proband term.
struct ProbandPiece {
  double log_a;  // beta'Z + log xi10(H)
  double g;      // 1 - H (psi*(1,H) - psi*(0,H))
  double t;      // d/dtheta log xi10(H)
};

ProbandPiece proband_piece(const FrailtyLaw& law, double lin, double cum) {
  const double h = cum * std::exp(lin);
  ProbandPiece out;
  out.log_a = lin + law.log_mu(1, h) - law.log_mu(0, h);
  out.g = 1.0 - h * (law.psi_star(1, h) - law.psi_star(0, h));
  out.t = law.dlog_mu_dtheta(1, h) - law.dlog_mu_dtheta(0, h);
  return out;
}

double linear(const std::vector<double>& z, std::size_t row, const Eigen::VectorXd& beta) {
  const std::size_t p = static_cast<std::size_t>(beta.size());
  double v = 0.0;
  for (std::size_t l = 0; l < p; ++l) v += beta[l] * z[row * p + l];
  return v;
}

}  // namespace

LikelihoodParts evaluate_likelihood(const FamilyTable& table, const Parameters& gamma, const FrailtyLaw& base,
                                    const SubjectHazard& hz, Exec exec) {
  const FrailtyLaw law = base.with_theta(gamma.theta);
  const std::size_t p = table.p(), q = p + 1, n = table.n_sets(), F = table.n_families();
  if (static_cast<std::size_t>(gamma.beta.size()) != p) throw DomainError("beta has the wrong dimension");

  std::vector<double> set_ll(n), set_u(n * q), fam_ll(F), fam_u(F * q);
  std::vector<std::string> errors(std::max(n, F));

  auto proband_set = [&](std::size_t r) {
    const std::size_t c = 2 * r, k = 2 * r + 1;
    try {
      const ProbandPiece pc = proband_piece(law, linear(table.proband_z, c, gamma.beta), hz.proband_cum[c]);
      const ProbandPiece pk = proband_piece(law, linear(table.proband_z, k, gamma.beta), hz.proband_cum[k]);
      const double m = std::max(pc.log_a, pk.log_a);
      const double log_den = m + std::log(std::exp(pc.log_a - m) + std::exp(pk.log_a - m));
      const double pr_c = std::exp(pc.log_a - log_den), pr_k = std::exp(pk.log_a - log_den);
      const double w = table.family_weight[c];
      set_ll[r] = w * (pc.log_a - log_den);
      for (std::size_t l = 0; l < p; ++l) {
        const double zc = table.proband_z[c * p + l] * pc.g, zk = table.proband_z[k * p + l] * pk.g;
        set_u[r * q + l] = w * (zc - (pr_c * zc + pr_k * zk));
      }
      set_u[r * q + p] = w * (pc.t - (pr_c * pc.t + pr_k * pk.t));
      bool finite = std::isfinite(set_ll[r]);
      for (std::size_t l = 0; l < q; ++l) finite = finite && std::isfinite(set_u[r * q + l]);
      if (!finite) errors[r] = "non-finite proband likelihood term in matched set " + std::to_string(table.original_set(r) + 1);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  };

  auto relatives_family = [&](std::size_t i) {
    try {
      const double w = table.family_weight[i];
      int events = 0;
      double ll = 0.0, h_rel = 0.0;
      double* u = &fam_u[i * q];
      std::fill(u, u + q, 0.0);
      for (std::size_t j = table.rel_begin[i]; j < table.rel_begin[i + 1]; ++j) {
        const double lin = linear(table.rel_z, j, gamma.beta);
        const double h = hz.relative_cum[j] * std::exp(lin);
        h_rel += h;
        if (table.rel_event[j] == 1) {
          if (!(hz.relative_jump[j] > 0.0)) {
            throw NumericalError("relative failure at t = " + std::to_string(table.rel_time[j]) +
                                 " has no hazard jump");
          }
          ++events;
          ll += std::log(hz.relative_jump[j]) + lin;
        }
      }
      const int d0 = table.proband_event[i];
      const double h0 = hz.proband_cum[i] * std::exp(linear(table.proband_z, i, gamma.beta));
      const int top = events + d0;
      ll += law.log_mu(top, h_rel + h0) - law.log_mu(d0, h0);
      const double post_all = law.psi_star(top, h_rel + h0), post_0 = law.psi_star(d0, h0);
      for (std::size_t j = table.rel_begin[i]; j < table.rel_begin[i + 1]; ++j) {
        const double h = hz.relative_cum[j] * std::exp(linear(table.rel_z, j, gamma.beta));
        for (std::size_t l = 0; l < p; ++l) {
          const double z = table.rel_z[j * p + l];
          u[l] += table.rel_event[j] * z - post_all * h * z;
        }
      }
      for (std::size_t l = 0; l < p; ++l) {
        const double z0 = table.proband_z[i * p + l];
        u[l] += (post_0 - post_all) * h0 * z0;
      }
      u[p] = law.dlog_mu_dtheta(top, h_rel + h0) - law.dlog_mu_dtheta(d0, h0);
      for (std::size_t l = 0; l < q; ++l) u[l] *= w;
      fam_ll[i] = w * ll;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  const bool par = exec == Exec::Parallel && !in_parallel_region() && max_threads() > 1 && n >= 64;
  if (par) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < n; ++r) proband_set(r);
  } else {
    for (std::size_t r = 0; r < n; ++r) proband_set(r);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }
  if (par) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < F; ++i) relatives_family(i);
  } else {
    for (std::size_t i = 0; i < F; ++i) relatives_family(i);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }

  LikelihoodParts out;
  out.proband_score = ScoreVector::Zero(static_cast<Eigen::Index>(q));
  out.relatives_score = ScoreVector::Zero(static_cast<Eigen::Index>(q));
  for (std::size_t r = 0; r < n; ++r) {
    out.proband_loglik += set_ll[r];
    for (std::size_t l = 0; l < q; ++l) out.proband_score[l] += set_u[r * q + l];
  }
  for (std::size_t i = 0; i < F; ++i) {
    out.relatives_loglik += fam_ll[i];
    for (std::size_t l = 0; l < q; ++l) out.relatives_score[l] += fam_u[i * q + l];
  }
  return out;
}

namespace {

LikelihoodParts dataset_parts(const Dataset& dataset, const EvalPoint& point) {
  const FamilyTable table(dataset);
  return evaluate_likelihood(table, point.gamma, point.law, subject_hazard(table, point.hazard));
}

}  // namespace

double proband_loglik(const Dataset& dataset, const EvalPoint& point) {
  return dataset_parts(dataset, point).proband_loglik;
}

ScoreVector proband_score(const Dataset& dataset, const EvalPoint& point) {
  return dataset_parts(dataset, point).proband_score;
}

double relatives_loglik(const Dataset& dataset, const EvalPoint& point) {
  return dataset_parts(dataset, point).relatives_loglik;
}

ScoreVector relatives_score(const Dataset& dataset, const EvalPoint& point) {
  return dataset_parts(dataset, point).relatives_score;
}

ScoreVector total_score(const Dataset& dataset, const EvalPoint& point) {
  const LikelihoodParts parts = dataset_parts(dataset, point);
  return (parts.proband_score + parts.relatives_score) / static_cast<double>(dataset.n_sets());
}

HazardContext hazard_context(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec) {
  HazardContext ctx;
  ctx.gamma = gamma;
  ctx.law = spec.law;
  ctx.clip = clip_for(table, table.risk_scores(gamma.beta), spec.lambda_max);
  return ctx;
}

ProfilePoint profile_point(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec) {
  ProfilePoint out;
  out.hazard = three_stage_jumps(table, hazard_context(table, gamma, spec), spec.s0, spec.stage);
  const LikelihoodParts parts =
      evaluate_likelihood(table, gamma, spec.law, subject_hazard(table, out.hazard.jumps), spec.stage.exec);
  out.score = (parts.proband_score + parts.relatives_score) / static_cast<double>(table.n_sets());
  return out;
}

JacobianResult profile_jacobian(const FamilyTable& table, const Parameters& gamma, const ProfileSpec& spec,
                                double rel_step) {
  const Eigen::VectorXd g0 = pack(gamma);
  const Eigen::Index q = g0.size();
  JacobianResult out;
  out.matrix.resize(q, q);
  for (Eigen::Index s = 0; s < q; ++s) {
    const double h = rel_step * std::max(1.0, std::abs(g0[s]));
    Eigen::VectorXd up = g0, down = g0;
    up[s] += h;
    down[s] -= h;
    const ScoreVector fu = profile_point(table, unpack(up), spec).score;
    const ScoreVector fd = profile_point(table, unpack(down), spec).score;
    out.matrix.col(s) = (fu - fd) / (2.0 * h);
  }
  if (!out.matrix.allFinite()) {
    out.singular = true;
    return out;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  const auto& sv = svd.singularValues();
  out.singular = !(sv[0] > 0.0) || sv[q - 1] / sv[0] < 1e-12;
  return out;
}

JacobianResult score_jacobian(const Dataset& dataset, const EvalPoint& point, const ProfileSpec& spec) {
  const FamilyTable table(dataset);
  ProfileSpec s = spec;
  s.law = point.law;
  return profile_jacobian(table, point.gamma, s);
}

}  // namespace frailtycc
