#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>

namespace frailtycc {

enum class FrailtyKind { GammaMeanOne, CustomQuadrature };

/// Density (or its theta-derivative) of the frailty as a function of (w, theta).
using DensityFn = std::function<double(double w, double theta)>;

/// A frailty distribution f(w; theta) together with the Laplace-type
/// integrals the estimators need:
///
///   mu_k(h)     = int w^k exp(-h w) f(w) dw
///   psi*(r, h)  = mu_{r+1}(h) / mu_r(h)     (posterior mean of the frailty)
///
/// GammaMeanOne (mean 1, variance theta) uses closed forms. Every other law is
/// integrated numerically with adaptive Gauss-Legendre quadrature. Instances
/// are immutable and cheap to copy; all members are safe to call concurrently.
class FrailtyLaw {
 public:
  static constexpr int kUnboundedMoments = std::numeric_limits<int>::max();

  static FrailtyLaw gamma(double theta);
  /// The same gamma law routed through the generic quadrature path.
  static FrailtyLaw gamma_by_quadrature(double theta);
  /// Inverse Gaussian with mean 1 and variance theta.
  static FrailtyLaw inverse_gaussian(double theta);
  /// A user-supplied law. `moment_order` is the highest finite moment.
  static FrailtyLaw custom(std::string name, double theta, DensityFn density, DensityFn density_dtheta,
                           int moment_order = kUnboundedMoments);

  FrailtyLaw with_theta(double theta) const;

  FrailtyKind kind() const noexcept { return kind_; }
  double theta() const noexcept { return theta_; }
  const std::string& name() const noexcept;
  int moment_order() const noexcept;

  double density(double w) const;
  double density_dtheta(double w) const;

  /// log mu_k(h). Computed with an exponent shift so large h does not underflow.
  double log_mu(int k, double h) const;
  /// d/dtheta log mu_k(h) = mu_k^theta(h) / mu_k(h).
  double dlog_mu_dtheta(int k, double h) const;
  /// psi*(r, h).
  double psi_star(int r, double h) const;

 private:
  struct Custom;
  FrailtyLaw(FrailtyKind kind, double theta, std::shared_ptr<const Custom> custom);

  void check_order(int k) const;

  FrailtyKind kind_;
  double theta_;
  std::shared_ptr<const Custom> custom_;
};

/// Clipping of the psi kernel at h_max = m_max * nu * lambda_max.
/// An infinite lambda_max disables clipping.
struct KernelClipConfig {
  double lambda_max = std::numeric_limits<double>::infinity();
  double nu = 1.0;
  int m_max = 1;

  double h_max() const noexcept { return m_max * nu * lambda_max; }
  bool valid() const noexcept { return lambda_max > 0.0 && nu >= 1.0 && m_max >= 1; }
};

double mu_k(const FrailtyLaw& law, int k, double h);
double mu_k_dtheta(const FrailtyLaw& law, int k, double h);
/// xi_{k k'}(h) = mu_k(h) / mu_k'(h).
double xi_ratio(const FrailtyLaw& law, int k, int kp, double h);
/// d/dbeta_l xi_10 where h = H_0(t) and z_l is the covariate component.
double xi10_dbeta(const FrailtyLaw& law, double h, double z_l);
/// d/dtheta xi_{k k'}(h).
double xi_dtheta(const FrailtyLaw& law, int k, int kp, double h);
double psi_star(const FrailtyLaw& law, int r, double h);
/// psi*(r, min(h, h_max)).
double psi_bar(const FrailtyLaw& law, int r, double h, const KernelClipConfig& clip);
/// Posterior frailty mean of a family given its relatives' event count and
/// exposure, conditioned on the proband's (T_0, delta_0): the proband enters by
/// shifting the event count by delta_0 and the exposure by H_0(T_0).
double psi_family(const FrailtyLaw& law, int n_dot, int delta0, double h_rel, double h_proband);

}  // namespace frailtycc
