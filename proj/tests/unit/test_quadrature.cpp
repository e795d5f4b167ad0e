#include <cmath>
#include <numbers>

#include "doctest.h"
#include "frailtycc/errors.hpp"
#include "frailtycc/quadrature.hpp"

using namespace frailtycc;

TEST_CASE("half-line integrals with known values") {
  CHECK(integrate_half_line([](double w) { return std::exp(-w); }).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate_half_line([](double w) { return w * w * std::exp(-2.0 * w); }).value ==
        doctest::Approx(0.25).epsilon(1e-11));
  // integrable endpoint singularity: int w^{-1/2} e^{-w} = sqrt(pi)
  const auto r = integrate_half_line([](double w) { return std::exp(-w) / std::sqrt(w); });
  CHECK(r.value == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-9));
  // heavy tail: int 1/(1+w)^2 = 1
  CHECK(integrate_half_line([](double w) { return 1.0 / ((1 + w) * (1 + w)); }).value ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("non-convergence is reported") {
  CHECK_THROWS_AS(integrate_half_line([](double w) { return 1.0 / w; }, 1e-9, 50), NumericalError);
}
