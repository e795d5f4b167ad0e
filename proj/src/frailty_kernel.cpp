#include "frailtycc/frailty_kernel.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "frailtycc/errors.hpp"
#include "frailtycc/quadrature.hpp"

namespace frailtycc {

struct FrailtyLaw::Custom {
  std::string name;
  DensityFn density;
  DensityFn density_dtheta;
  int moment_order;
};

namespace {

constexpr double kQuadratureTolerance = 1e-9;

void check_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw DomainError("frailty parameter theta must be positive and finite, got " + std::to_string(theta));
  }
}

void check_exposure(double h) {
  if (!(h >= 0.0)) throw DomainError("cumulative exposure h must be >= 0, got " + std::to_string(h));
}

// log1p(x) - x/(1+x), accurate for small x.
double log1p_gap(double x) {
  if (std::abs(x) < 1e-2) {
    double term = x * x, sum = 0.0;
    for (int n = 2; n <= 12; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1.0) / n * term;
      term *= x;
    }
    return sum;
  }
  return std::log1p(x) - x / (1.0 + x);
}

double gamma_log_mu(double theta, int k, double h) {
  double log_prod = 0.0;
  for (int j = 1; j < k; ++j) log_prod += std::log1p(j * theta);
  return log_prod - (1.0 / theta + k) * std::log1p(theta * h);
}

double gamma_dlog_mu(double theta, int k, double h) {
  double s = 0.0;
  for (int j = 1; j < k; ++j) s += j / (1.0 + j * theta);
  const double x = theta * h;
  double gap_term;
  if (std::abs(x) < 1e-2) {
    // log1p_gap(x) / theta^2 = h^2 * sum_n (-1)^n (n-1)/n x^(n-2)
    double term = 1.0, sum = 0.0;
    for (int n = 2; n <= 12; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1.0) / n * term;
      term *= x;
    }
    gap_term = h * h * sum;
  } else {
    gap_term = log1p_gap(x) / (theta * theta);
  }
  return s + gap_term - k * h / (1.0 + x);
}

double gamma_density(double w, double theta) {
  if (!(w > 0.0)) return 0.0;
  const double a = 1.0 / theta;
  return std::exp((a - 1.0) * std::log(w) - a * w - std::lgamma(a) + a * std::log(a));
}

double gamma_density_dtheta(double w, double theta) {
  if (!(w > 0.0)) return 0.0;
  const double a = 1.0 / theta;
  const double dlog_da = std::log(w) - w - boost::math::digamma(a) + std::log(a) + 1.0;
  return gamma_density(w, theta) * (-a * a) * dlog_da;
}

double ig_density(double w, double theta) {
  if (!(w > 0.0)) return 0.0;
  const double lambda = 1.0 / theta;
  const double d = w - 1.0;
  return std::sqrt(lambda / (2.0 * std::numbers::pi * w * w * w)) * std::exp(-lambda * d * d / (2.0 * w));
}

double ig_density_dtheta(double w, double theta) {
  if (!(w > 0.0)) return 0.0;
  const double lambda = 1.0 / theta;
  const double d = w - 1.0;
  const double dlog_dlambda = 0.5 / lambda - d * d / (2.0 * w);
  return ig_density(w, theta) * (-lambda * lambda) * dlog_dlambda;
}

// Exponent shift: max over w of k log w - h w, so the scaled integrand peaks near 1.
double exponent_shift(int k, double h) {
  if (k == 0 || h == 0.0) return 0.0;
  return k * std::log(k / h) - k;
}

}  // namespace

FrailtyLaw::FrailtyLaw(FrailtyKind kind, double theta, std::shared_ptr<const Custom> custom)
    : kind_(kind), theta_(theta), custom_(std::move(custom)) {
  check_theta(theta);
}

FrailtyLaw FrailtyLaw::gamma(double theta) { return FrailtyLaw(FrailtyKind::GammaMeanOne, theta, nullptr); }

FrailtyLaw FrailtyLaw::gamma_by_quadrature(double theta) {
  return custom("gamma-quadrature", theta, gamma_density, gamma_density_dtheta, kUnboundedMoments);
}

FrailtyLaw FrailtyLaw::inverse_gaussian(double theta) {
  return custom("inverse-gaussian", theta, ig_density, ig_density_dtheta, kUnboundedMoments);
}

FrailtyLaw FrailtyLaw::custom(std::string name, double theta, DensityFn density, DensityFn density_dtheta,
                              int moment_order) {
  if (!density || !density_dtheta) throw DomainError("custom frailty law needs a density and its theta-derivative");
  if (moment_order < 1) throw DomainError("custom frailty law must have a finite mean");
  auto c = std::make_shared<const Custom>(
      Custom{std::move(name), std::move(density), std::move(density_dtheta), moment_order});
  return FrailtyLaw(FrailtyKind::CustomQuadrature, theta, std::move(c));
}

FrailtyLaw FrailtyLaw::with_theta(double theta) const {
  check_theta(theta);
  FrailtyLaw copy = *this;
  copy.theta_ = theta;
  return copy;
}

const std::string& FrailtyLaw::name() const noexcept {
  static const std::string gamma_name = "gamma";
  return custom_ ? custom_->name : gamma_name;
}

int FrailtyLaw::moment_order() const noexcept { return custom_ ? custom_->moment_order : kUnboundedMoments; }

double FrailtyLaw::density(double w) const {
  return custom_ ? custom_->density(w, theta_) : gamma_density(w, theta_);
}

double FrailtyLaw::density_dtheta(double w) const {
  return custom_ ? custom_->density_dtheta(w, theta_) : gamma_density_dtheta(w, theta_);
}

void FrailtyLaw::check_order(int k) const {
  if (k < 0) throw DomainError("moment index must be >= 0, got " + std::to_string(k));
  if (k > moment_order()) {
    throw DomainError("moment of order " + std::to_string(k) + " exceeds the finite moments (" +
                      std::to_string(moment_order()) + ") of frailty law '" + name() + "'");
  }
}

double FrailtyLaw::log_mu(int k, double h) const {
  check_exposure(h);
  check_order(k);
  if (kind_ == FrailtyKind::GammaMeanOne) return gamma_log_mu(theta_, k, h);

  const double shift = exponent_shift(k, h);
  const auto& dens = custom_->density;
  const double theta = theta_;
  const auto result = integrate_half_line(
      [&](double w) {
        const double f = dens(w, theta);
        if (f == 0.0) return 0.0;
        const double e = (k == 0 ? 0.0 : k * std::log(w)) - h * w - shift;
        return std::exp(e) * f;
      },
      kQuadratureTolerance);
  if (!(result.value > 0.0)) throw NumericalError("mu_k integral is not positive for law '" + name() + "'");
  return shift + std::log(result.value);
}

double FrailtyLaw::dlog_mu_dtheta(int k, double h) const {
  check_exposure(h);
  check_order(k);
  if (kind_ == FrailtyKind::GammaMeanOne) return gamma_dlog_mu(theta_, k, h);

  const double shift = exponent_shift(k, h);
  const double theta = theta_;
  auto weight = [&](double w) { return std::exp((k == 0 ? 0.0 : k * std::log(w)) - h * w - shift); };
  const auto base = integrate_half_line(
      [&](double w) {
        const double f = custom_->density(w, theta);
        return f == 0.0 ? 0.0 : weight(w) * f;
      },
      kQuadratureTolerance);
  const auto deriv = integrate_half_line(
      [&](double w) {
        const double f = custom_->density_dtheta(w, theta);
        return f == 0.0 ? 0.0 : weight(w) * f;
      },
      kQuadratureTolerance);
  if (!(base.value > 0.0)) throw NumericalError("mu_k integral is not positive for law '" + name() + "'");
  return deriv.value / base.value;
}

double FrailtyLaw::psi_star(int r, double h) const {
  check_exposure(h);
  if (r < 0) throw DomainError("psi* event count must be >= 0");
  check_order(r + 1);
  if (kind_ == FrailtyKind::GammaMeanOne) return (1.0 + r * theta_) / (1.0 + theta_ * h);
  return std::exp(log_mu(r + 1, h) - log_mu(r, h));
}

double mu_k(const FrailtyLaw& law, int k, double h) { return std::exp(law.log_mu(k, h)); }

double mu_k_dtheta(const FrailtyLaw& law, int k, double h) {
  return std::exp(law.log_mu(k, h)) * law.dlog_mu_dtheta(k, h);
}

double xi_ratio(const FrailtyLaw& law, int k, int kp, double h) {
  if (k == kp) {
    law.log_mu(k, h);  // domain checks only
    return 1.0;
  }
  return std::exp(law.log_mu(k, h) - law.log_mu(kp, h));
}

double xi10_dbeta(const FrailtyLaw& law, double h, double z_l) {
  const double xi10 = xi_ratio(law, 1, 0, h);
  const double xi20 = xi_ratio(law, 2, 0, h);
  return h * z_l * (xi10 * xi10 - xi20);
}

double xi_dtheta(const FrailtyLaw& law, int k, int kp, double h) {
  if (k == kp) {
    law.log_mu(k, h);
    return 0.0;
  }
  return xi_ratio(law, k, kp, h) * (law.dlog_mu_dtheta(k, h) - law.dlog_mu_dtheta(kp, h));
}

double psi_star(const FrailtyLaw& law, int r, double h) { return law.psi_star(r, h); }

double psi_bar(const FrailtyLaw& law, int r, double h, const KernelClipConfig& clip) {
  return law.psi_star(r, std::min(h, clip.h_max()));
}

double psi_family(const FrailtyLaw& law, int n_dot, int delta0, double h_rel, double h_proband) {
  if (delta0 != 0 && delta0 != 1) throw DomainError("proband event indicator must be 0 or 1");
  return law.psi_star(n_dot + delta0, h_rel + h_proband);
}

}  // namespace frailtycc
