#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "frailtycc/errors.hpp"
#include "frailtycc/likelihood.hpp"
#include "frailtycc/reference.hpp"
#include "frailtycc/simulation.hpp"
#include "helpers.hpp"

using namespace frailtycc;
using testutil::subj;

namespace {

EvalPoint point(Eigen::VectorXd beta, double theta, StepCumHazard h, FrailtyLaw law = FrailtyLaw::gamma(1.0)) {
  EvalPoint pt;
  pt.gamma.beta = std::move(beta);
  pt.gamma.theta = theta;
  pt.hazard = std::move(h);
  pt.law = std::move(law);
  return pt;
}

EvalPoint shifted(EvalPoint pt, Eigen::Index s, double h) {
  if (s < pt.gamma.beta.size()) {
    pt.gamma.beta[s] += h;
  } else {
    pt.gamma.theta += h;
  }
  return pt;
}

StepCumHazard linear_hazard() {
  StepCumHazard h;
  h.jump_times = {0.5};
  h.jump_sizes = {0.5};
  return h;
}

}  // namespace

TEST_CASE("symmetric pairs contribute log one half") {
  Dataset d;
  d.p = 1;
  for (int r = 0; r < 3; ++r) {
    MatchedSet s;
    s.case_family = {subj(0.5, 1, {0.7}), {subj(0.3, 1, {0.0})}};
    s.control_family = {subj(0.5, 0, {0.7}), {subj(0.9, 0, {1.0})}};
    d.matched_sets.push_back(s);
  }
  d.tau = 1.0;
  const EvalPoint pt = point(Eigen::VectorXd::Constant(1, 0.4), 1.5, testutil::identity_at_subject_times(d));
  CHECK(proband_loglik(d, pt) == doctest::Approx(3 * std::log(0.5)).epsilon(1e-14));
  CHECK(std::abs(proband_score(d, pt)[0]) < 1e-15);
}

TEST_CASE("single set gamma example") {
  Dataset d;
  d.p = 1;
  MatchedSet s;
  s.case_family = {subj(0.5, 1, {0.0}), {subj(0.8, 0, {0.0})}};
  s.control_family = {subj(0.5, 0, {0.0}), {subj(0.8, 0, {0.0})}};
  d.matched_sets = {s};
  d.tau = 1.0;
  CHECK(proband_loglik(d, point(Eigen::VectorXd::Zero(1), 2.0, linear_hazard())) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("degenerate frailty gives conditional logistic regression") {
  const Dataset d = testutil::random_dataset(8, 5, 2, 2);
  Eigen::VectorXd beta(2);
  beta << 0.7, -0.4;
  const EvalPoint pt = point(beta, 1e-9, testutil::wiggly_hazard(d, 1));
  double direct = 0.0;
  for (const auto& s : d.matched_sets) {
    const double a = risk_weight(s.case_family.proband, beta);
    const double b = risk_weight(s.control_family.proband, beta);
    direct += std::log(a / (a + b));
  }
  CHECK(proband_loglik(d, pt) == doctest::Approx(direct).epsilon(1e-7));
}

TEST_CASE("table evaluation agrees with the reference implementation") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = testutil::random_dataset(seed, 5, 2, 3, seed % 2 == 1);
    Eigen::VectorXd beta(2);
    beta << 0.3, -0.6;
    const EvalPoint pt = point(beta, 0.4 + 0.3 * static_cast<double>(seed), testutil::wiggly_hazard(d, seed));
    const auto& law = pt.law;
    CHECK(proband_loglik(d, pt) == doctest::Approx(reference::proband_loglik(d, pt.gamma, law, pt.hazard)).epsilon(1e-12));
    CHECK(relatives_loglik(d, pt) ==
          doctest::Approx(reference::relatives_loglik(d, pt.gamma, law, pt.hazard)).epsilon(1e-12));
    const ScoreVector u1 = proband_score(d, pt), r1 = reference::proband_score(d, pt.gamma, law, pt.hazard);
    const ScoreVector u2 = relatives_score(d, pt), r2 = reference::relatives_score(d, pt.gamma, law, pt.hazard);
    for (Eigen::Index l = 0; l < 3; ++l) {
      CHECK(std::abs(u1[l] - r1[l]) < 1e-11 * std::max(1.0, std::abs(r1[l])));
      CHECK(std::abs(u2[l] - r2[l]) < 1e-11 * std::max(1.0, std::abs(r2[l])));
    }
  }
}

TEST_CASE("analytic scores are gradients of the log-likelihoods") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const Dataset d = testutil::random_dataset(seed, 5, 2, 3, seed % 3 == 0);
    Eigen::VectorXd beta(2);
    beta << 0.2 * static_cast<double>(seed % 5) - 0.4, 0.5;
    const EvalPoint pt = point(beta, 0.3 + 0.15 * static_cast<double>(seed % 10), testutil::wiggly_hazard(d, seed));
    const ScoreVector u1 = proband_score(d, pt), u2 = relatives_score(d, pt);
    const double h = 1e-6;
    for (Eigen::Index s = 0; s < 3; ++s) {
      const double fd1 = (proband_loglik(d, shifted(pt, s, h)) - proband_loglik(d, shifted(pt, s, -h))) / (2 * h);
      const double fd2 = (relatives_loglik(d, shifted(pt, s, h)) - relatives_loglik(d, shifted(pt, s, -h))) / (2 * h);
      CHECK(std::abs(u1[s] - fd1) <= 1e-5 * std::max(1.0, std::abs(fd1)));
      CHECK(std::abs(u2[s] - fd2) <= 1e-5 * std::max(1.0, std::abs(fd2)));
    }
  }
}

TEST_CASE("theta score stays finite near degeneracy") {
  const Dataset d = testutil::random_dataset(5, 4, 1, 2);
  const EvalPoint pt = point(Eigen::VectorXd::Constant(1, 0.2), 1e-6, testutil::wiggly_hazard(d, 2));
  CHECK(std::isfinite(proband_score(d, pt)[1]));
  CHECK(std::isfinite(relatives_score(d, pt)[1]));
}

TEST_CASE("relatives log-likelihood special cases") {
  // all relatives censored, degenerate frailty: minus the summed exposure
  Dataset d = testutil::random_dataset(6, 4, 1, 3);
  for (auto& s : d.matched_sets) {
    for (auto* f : {&s.case_family, &s.control_family}) {
      for (auto& r : f->relatives) r.event = 0;
    }
  }
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.3);
  StepCumHazard h = testutil::identity_at_subject_times(d);
  double exposure = 0.0;
  for (const auto& s : d.matched_sets) {
    for (const auto* f : {&s.case_family, &s.control_family}) {
      for (const auto& r : f->relatives) exposure += h(r.time) * risk_weight(r, beta);
    }
  }
  CHECK(relatives_loglik(d, point(beta, 1e-10, h)) == doctest::Approx(-exposure).epsilon(1e-8));
}

TEST_CASE("relatives log-likelihood of one family by quadrature") {
  Dataset d;
  d.p = 1;
  MatchedSet s;
  s.case_family = {subj(0.5, 1, {0.0}), {subj(0.3, 1, {0.0})}};
  s.control_family = {subj(0.5, 0, {0.0}), {subj(0.2, 0, {0.0})}};
  d.matched_sets = {s};
  d.tau = 1.0;
  StepCumHazard h;
  h.jump_times = {0.2, 0.3, 0.5};
  h.jump_sizes = {0.2, 0.1, 0.2};
  const double theta = 2.0;
  const EvalPoint pt = point(Eigen::VectorXd::Zero(1), theta, h);

  // case family: delta0 = 1, H0 = 0.5, relative fails with H = 0.3 and jump 0.1
  const double closed = std::log(0.1) + std::log(3.0 * std::pow(1 + theta * 0.8, -(0.5 + 2)) / std::pow(1 + theta * 0.5, -(0.5 + 1)));
  auto gamma_pdf = [&](double w) {
    const double a = 1.0 / theta;
    return std::exp((a - 1.0) * std::log(w) - w / theta - std::lgamma(a) - a * std::log(theta));
  };
  boost::math::quadrature::exp_sinh<double> q;
  const double inf = std::numeric_limits<double>::infinity();
  auto posterior_mass = [&](double rel_events, double rel_exposure, double d0, double h0) {
    const double num = q.integrate([&](double w) {
      return w <= 0 ? 0.0 : std::pow(w, rel_events + d0) * std::exp(-w * (rel_exposure + h0)) * gamma_pdf(w);
    }, 0.0, inf);
    const double den = q.integrate([&](double w) {
      return w <= 0 ? 0.0 : std::pow(w, d0) * std::exp(-w * h0) * gamma_pdf(w);
    }, 0.0, inf);
    return num / den;
  };
  const double case_quad = std::log(0.1) + std::log(posterior_mass(1, 0.3, 1, 0.5));
  CHECK(case_quad == doctest::Approx(closed).epsilon(1e-9));
  const double control_quad = std::log(posterior_mass(0, 0.2, 0, 0.5));
  CHECK(relatives_loglik(d, pt) == doctest::Approx(case_quad + control_quad).epsilon(1e-9));
}

TEST_CASE("relatives log-likelihood is additive over families") {
  const Dataset d = testutil::random_dataset(12, 6, 1, 2);
  Dataset a = d, b = d;
  a.matched_sets.resize(3);
  b.matched_sets.erase(b.matched_sets.begin(), b.matched_sets.begin() + 3);
  const EvalPoint pt = point(Eigen::VectorXd::Constant(1, 0.2), 1.1, testutil::wiggly_hazard(d, 3));
  CHECK(relatives_loglik(d, pt) == doctest::Approx(relatives_loglik(a, pt) + relatives_loglik(b, pt)).epsilon(1e-13));
}

TEST_CASE("relative failure without a jump is an error") {
  const Dataset d = testutil::random_dataset(13, 3, 1, 2);
  CHECK_THROWS_AS(relatives_loglik(d, point(Eigen::VectorXd::Zero(1), 1.0, linear_hazard())), NumericalError);
}

TEST_CASE("total score combines both parts") {
  const Dataset d = testutil::random_dataset(14, 5, 2, 2);
  Eigen::VectorXd beta(2);
  beta << 0.1, 0.2;
  const EvalPoint pt = point(beta, 0.8, testutil::wiggly_hazard(d, 4));
  const ScoreVector u = total_score(d, pt);
  const ScoreVector v = (proband_score(d, pt) + relatives_score(d, pt)) / 5.0;
  for (Eigen::Index l = 0; l < 3; ++l) CHECK(u[l] == doctest::Approx(v[l]).epsilon(1e-15));
}

TEST_CASE("closed form and quadrature laws agree") {
  const Dataset d = testutil::random_dataset(15, 4, 1, 2);
  const auto h = testutil::wiggly_hazard(d, 5);
  const EvalPoint a = point(Eigen::VectorXd::Constant(1, 0.4), 1.7, h, FrailtyLaw::gamma(1.0));
  const EvalPoint b = point(Eigen::VectorXd::Constant(1, 0.4), 1.7, h, FrailtyLaw::gamma_by_quadrature(1.0));
  CHECK(proband_loglik(d, a) == doctest::Approx(proband_loglik(d, b)).epsilon(1e-7));
  CHECK(relatives_loglik(d, a) == doctest::Approx(relatives_loglik(d, b)).epsilon(1e-7));
  const ScoreVector ua = total_score(d, a), ub = total_score(d, b);
  for (Eigen::Index l = 0; l < 2; ++l) CHECK(std::abs(ua[l] - ub[l]) < 1e-7 * std::max(1.0, std::abs(ua[l])));
}

TEST_CASE("score at the truth has mean zero") {
  SimDesign design;
  design.n_sets = 100;
  const int reps = 200;
  Eigen::MatrixXd u(reps, 2);
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate_dataset(design, static_cast<std::uint64_t>(r));
    u.row(r) = total_score(d, point(design.beta, design.theta, testutil::identity_at_subject_times(d))).transpose();
  }
  for (Eigen::Index l = 0; l < 2; ++l) {
    const double mean = u.col(l).mean();
    const double sd = std::sqrt((u.col(l).array() - mean).square().sum() / (reps - 1));
    CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("profile Jacobian") {
  SimDesign design;
  design.n_sets = 200;
  const Dataset d = generate_dataset(design, 1);
  const FamilyTable table(d);
  Parameters truth{design.beta, design.theta};
  const ProfileSpec spec;
  const auto j1 = profile_jacobian(table, truth, spec, 1e-4);
  const auto j2 = profile_jacobian(table, truth, spec, 5e-5);
  CHECK(!j1.singular);
  CHECK((j1.matrix - j2.matrix).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, j1.matrix.cwiseAbs().maxCoeff()));
  CHECK(j1.matrix(0, 0) < 0.0);

  EvalPoint pt = point(design.beta, design.theta, StepCumHazard{});
  const auto j3 = score_jacobian(d, pt);
  CHECK((j3.matrix - j2.matrix).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, j2.matrix.cwiseAbs().maxCoeff()));

  // theta only
  Dataset d0 = d;
  d0.p = 0;
  for (auto& s : d0.matched_sets) {
    for (auto* f : {&s.case_family, &s.control_family}) {
      f->proband.covariates.clear();
      for (auto& r : f->relatives) r.covariates.clear();
    }
  }
  const FamilyTable t0(d0);
  const Parameters g0{Eigen::VectorXd(0), 2.0};
  const auto j0 = profile_jacobian(t0, g0, spec);
  REQUIRE(j0.matrix.rows() == 1);
  const double h = 1e-5 * 2.0;
  const double quotient = (profile_point(t0, {Eigen::VectorXd(0), 2.0 + h}, spec).score[0] -
                           profile_point(t0, {Eigen::VectorXd(0), 2.0 - h}, spec).score[0]) /
                          (2 * h);
  CHECK(j0.matrix(0, 0) == doctest::Approx(quotient).epsilon(1e-12));
}
