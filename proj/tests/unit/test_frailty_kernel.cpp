#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "frailtycc/errors.hpp"
#include "frailtycc/frailty_kernel.hpp"

using namespace frailtycc;

namespace {

// Independent oracle: gamma(shape 1/theta, scale theta) density integrated with
// double-exponential quadrature.
double gamma_pdf(double w, double theta) {
  const double a = 1.0 / theta;
  return std::exp((a - 1.0) * std::log(w) - w / theta - std::lgamma(a) - a * std::log(theta));
}

double oracle_mu(double theta, int k, double h) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double w) { return w <= 0.0 ? 0.0 : std::pow(w, k) * std::exp(-h * w) * gamma_pdf(w, theta); };
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("mu_k closed form values") {
  const auto g2 = FrailtyLaw::gamma(2.0);
  CHECK(mu_k(g2, 0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mu_k(FrailtyLaw::inverse_gaussian(0.7), 0, 0.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(mu_k(g2, 1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mu_k(g2, 0, 0.5) == doctest::Approx(0.70710678118654752).epsilon(1e-14));
  CHECK(rel(mu_k(g2, 0, 0.5), oracle_mu(2.0, 0, 0.5)) < 1e-9);
  CHECK(rel(mu_k(g2, 2, 1.3), oracle_mu(2.0, 2, 1.3)) < 1e-9);
  CHECK_THROWS_AS(mu_k(g2, 0, -0.1), DomainError);
}

TEST_CASE("gamma law moments") {
  for (double theta : {0.3, 1.0, 2.0}) {
    CHECK(rel(oracle_mu(theta, 0, 0.0), 1.0) < 1e-8);
    CHECK(rel(oracle_mu(theta, 1, 0.0), 1.0) < 1e-8);
    CHECK(rel(oracle_mu(theta, 2, 0.0), 1.0 + theta) < 1e-8);
    const auto q = FrailtyLaw::gamma_by_quadrature(theta);
    CHECK(rel(mu_k(q, 0, 0.0), 1.0) < 1e-8);
    CHECK(rel(mu_k(q, 2, 0.0), 1.0 + theta) < 1e-8);
  }
  const auto ig = FrailtyLaw::inverse_gaussian(0.5);
  CHECK(rel(mu_k(ig, 1, 0.0), 1.0) < 1e-8);
  CHECK(rel(mu_k(ig, 2, 0.0), 1.5) < 1e-8);
}

TEST_CASE("mu_k_dtheta") {
  const auto g2 = FrailtyLaw::gamma(2.0);
  CHECK(mu_k_dtheta(g2, 0, 0.0) == doctest::Approx(0.0));
  CHECK(std::abs(mu_k_dtheta(FrailtyLaw::gamma(1.0), 1, 0.0)) < 1e-15);
  const double h = 1e-6;
  const double fd = (mu_k(FrailtyLaw::gamma(2.0 + h), 0, 0.5) - mu_k(FrailtyLaw::gamma(2.0 - h), 0, 0.5)) / (2 * h);
  CHECK(std::abs(mu_k_dtheta(g2, 0, 0.5) - fd) < 1e-6);
  for (double theta : {0.5, 1.0, 2.0, 3.0}) {
    for (int k : {0, 1, 2, 4}) {
      for (double hh : {0.0, 0.003, 0.4, 5.0}) {
        const double step = 1e-6 * std::max(1.0, theta);
        const double f = (mu_k(FrailtyLaw::gamma(theta + step), k, hh) - mu_k(FrailtyLaw::gamma(theta - step), k, hh)) /
                         (2 * step);
        const double a = mu_k_dtheta(FrailtyLaw::gamma(theta), k, hh);
        CHECK(std::abs(a - f) <= 1e-5 * std::max(1.0, std::abs(f)));
      }
    }
  }
  // quadrature route through density_dtheta
  for (double hh : {0.0, 0.5, 3.0}) {
    const double a = mu_k_dtheta(FrailtyLaw::gamma_by_quadrature(1.5), 2, hh);
    const double b = mu_k_dtheta(FrailtyLaw::gamma(1.5), 2, hh);
    CHECK(std::abs(a - b) <= 1e-7 * std::max(1.0, std::abs(b)));
  }
}

TEST_CASE("xi ratios and derivatives") {
  const auto g2 = FrailtyLaw::gamma(2.0);
  CHECK(xi_ratio(g2, 1, 0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(xi_ratio(FrailtyLaw::inverse_gaussian(1.0), 1, 1, 3.7) == 1.0);
  CHECK(xi_ratio(g2, 2, 0, 0.0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(rel(xi_ratio(g2, 2, 0, 0.0), oracle_mu(2.0, 2, 0.0)) < 1e-8);

  CHECK(xi10_dbeta(g2, 0.0, 1.0) == 0.0);
  {
    // d/dbeta xi10(Lambda e^{beta z}) at Lambda = 0.5, beta = 0, z = 1
    const double eps = 1e-6;
    const double fd = (xi_ratio(g2, 1, 0, 0.5 * std::exp(eps)) - xi_ratio(g2, 1, 0, 0.5 * std::exp(-eps))) / (2 * eps);
    CHECK(xi10_dbeta(g2, 0.5, 1.0) == doctest::Approx(0.5 * (0.25 - xi_ratio(g2, 2, 0, 0.5))).epsilon(1e-14));
    CHECK(std::abs(xi10_dbeta(g2, 0.5, 1.0) - fd) < 1e-6);
  }
  CHECK(std::abs(xi10_dbeta(FrailtyLaw::gamma(1e-8), 1.0, 1.0)) < 1e-7);

  CHECK(xi_dtheta(g2, 2, 2, 0.9) == 0.0);
  CHECK(xi_dtheta(g2, 1, 0, 0.5) == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(std::abs(xi_dtheta(FrailtyLaw::gamma(1.0), 1, 0, 0.0)) < 1e-15);
  for (double theta : {0.5, 2.0}) {
    for (double hh : {0.1, 1.0, 4.0}) {
      const double step = 1e-6 * std::max(1.0, theta);
      const double fd = (xi_ratio(FrailtyLaw::gamma(theta + step), 2, 0, hh) -
                         xi_ratio(FrailtyLaw::gamma(theta - step), 2, 0, hh)) /
                        (2 * step);
      CHECK(std::abs(xi_dtheta(FrailtyLaw::gamma(theta), 2, 0, hh) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("psi star, psi bar and psi family") {
  const auto g2 = FrailtyLaw::gamma(2.0);
  CHECK(psi_star(g2, 0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(psi_star(FrailtyLaw::inverse_gaussian(0.8), 0, 0.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(psi_star(g2, 1, 0.5) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(psi_star(g2, 0, 10.0) == doctest::Approx(0.5 / 10.5).epsilon(1e-14));
  CHECK(rel(psi_star(g2, 1, 0.5), oracle_mu(2.0, 2, 0.5) / oracle_mu(2.0, 1, 0.5)) < 1e-8);

  KernelClipConfig clip;
  clip.lambda_max = 2.0;
  CHECK(psi_bar(g2, 0, 0.0, clip) == 1.0);
  CHECK(psi_bar(g2, 1, 100.0, clip) == doctest::Approx(0.6).epsilon(1e-15));
  for (double hh : {0.0, 0.3, 1.99}) CHECK(psi_bar(g2, 3, hh, clip) == psi_star(g2, 3, hh));

  CHECK(psi_family(g2, 1, 1, 0.5, 0.5) == doctest::Approx(2.5 / 1.5).epsilon(1e-15));
  CHECK(psi_family(FrailtyLaw::inverse_gaussian(1.2), 0, 0, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(psi_family(FrailtyLaw::gamma(3.0), 0, 0, 1.0, 2.0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_AS(psi_family(g2, 0, 2, 0.0, 0.0), DomainError);
}

TEST_CASE("psi star monotone in h, increasing in r, bounded") {
  for (const auto& law : {FrailtyLaw::gamma(0.5), FrailtyLaw::gamma(2.0), FrailtyLaw::inverse_gaussian(1.0)}) {
    KernelClipConfig clip;
    clip.lambda_max = 3.0;
    clip.m_max = 2;
    const double hmax = clip.h_max();
    for (int r = 0; r <= 3; ++r) {
      double prev = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 40; ++i) {
        const double hh = 2.0 * hmax * i / 40.0;
        const double v = psi_star(law, r, hh);
        CHECK(v <= prev * (1 + 1e-12));
        CHECK(psi_star(law, r + 1, hh) >= v * (1 - 1e-12));
        const double b = psi_bar(law, r, hh, clip);
        CHECK(b >= psi_star(law, 0, hmax) * (1 - 1e-12));
        CHECK(b <= psi_star(law, 3, 0.0) * (1 + 1e-12));
        prev = v;
      }
    }
  }
}

TEST_CASE("log-space evaluation survives large exposures") {
  const auto q = FrailtyLaw::gamma_by_quadrature(2.0);
  const auto g = FrailtyLaw::gamma(2.0);
  for (double hh : {50.0, 800.0, 5000.0}) {
    CHECK(std::abs(q.log_mu(2, hh) - g.log_mu(2, hh)) < 1e-7 * std::abs(g.log_mu(2, hh)));
    CHECK(rel(q.psi_star(1, hh), g.psi_star(1, hh)) < 1e-7);
  }
}

TEST_CASE("custom laws respect their moment order") {
  const auto base = FrailtyLaw::gamma_by_quadrature(1.0);
  const auto limited = FrailtyLaw::custom(
      "limited", 1.0, [&](double w, double) { return base.density(w); }, [](double, double) { return 0.0; }, 2);
  CHECK_NOTHROW(limited.psi_star(1, 0.3));
  CHECK_THROWS_AS(limited.psi_star(2, 0.3), DomainError);
  CHECK_THROWS_AS(FrailtyLaw::gamma(0.0), DomainError);
  CHECK_THROWS_AS(FrailtyLaw::gamma(-1.0), DomainError);
}
