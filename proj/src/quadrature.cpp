#include "frailtycc/quadrature.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "frailtycc/errors.hpp"

namespace frailtycc {
namespace {

constexpr int kOrder = 15;

struct Rule {
  std::array<double, kOrder> nodes{};
  std::array<double, kOrder> weights{};
};

// Legendre roots by Newton iteration from the Chebyshev guess.
Rule make_rule() {
  Rule rule;
  const double pi = std::acos(-1.0);
  for (int i = 0; i < kOrder; ++i) {
    double x = std::cos(pi * (i + 0.75) / (kOrder + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= kOrder; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = kOrder * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const Rule& rule() {
  static const Rule r = make_rule();
  return r;
}

struct Panel {
  double a, b;
  double value, abs_value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

class Integrator {
 public:
  explicit Integrator(const std::function<double(double)>& f) : f_(f) {}

  // Integrand in u; the map sends u -> w = (u/(1-u))^2, dw = 2u du/(1-u)^3,
  // which also smooths w^{-1/2} endpoint behaviour.
  double g(double u) const {
    const double one_minus = 1.0 - u;
    const double r = u / one_minus;
    const double v = f_(r * r);
    if (v == 0.0) return 0.0;
    return 2.0 * v * r / (one_minus * one_minus);
  }

  void gauss(double a, double b, double& sum, double& abs_sum) const {
    const Rule& r = rule();
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    sum = 0.0;
    abs_sum = 0.0;
    for (int i = 0; i < kOrder; ++i) {
      const double v = g(mid + half * r.nodes[i]) * r.weights[i];
      sum += v;
      abs_sum += std::abs(v);
    }
    sum *= half;
    abs_sum *= half;
  }

  Panel panel(double a, double b) const {
    const double m = 0.5 * (a + b);
    double whole, whole_abs, left, left_abs, right, right_abs;
    gauss(a, b, whole, whole_abs);
    gauss(a, m, left, left_abs);
    gauss(m, b, right, right_abs);
    const double fine = left + right;
    return {a, b, fine, left_abs + right_abs, std::abs(whole - fine)};
  }

 private:
  const std::function<double(double)>& f_;
};

}  // namespace

QuadratureResult integrate_half_line(const std::function<double(double)>& f, double rel_tol,
                                     int max_intervals) {
  Integrator integ(f);
  std::priority_queue<Panel> heap;
  constexpr int kInitial = 8;
  for (int i = 0; i < kInitial; ++i) {
    heap.push(integ.panel(static_cast<double>(i) / kInitial, static_cast<double>(i + 1) / kInitial));
  }

  auto totals = [&heap](double& value, double& abs_value, double& err) {
    // Copying the heap is cheap next to the integrand evaluations.
    auto copy = heap;
    value = abs_value = err = 0.0;
    while (!copy.empty()) {
      value += copy.top().value;
      abs_value += copy.top().abs_value;
      err += copy.top().error;
      copy.pop();
    }
  };

  double value, abs_value, err;
  totals(value, abs_value, err);
  int count = kInitial;
  while (err > rel_tol * abs_value && abs_value > 0.0) {
    if (count >= max_intervals) {
      throw NumericalError("quadrature did not reach relative error " + std::to_string(rel_tol) +
                           " (estimate " + std::to_string(err / abs_value) + ")");
    }
    const Panel worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      throw NumericalError("quadrature interval underflow");
    }
    const Panel left = integ.panel(worst.a, m);
    const Panel right = integ.panel(m, worst.b);
    heap.push(left);
    heap.push(right);
    ++count;
    // Running update instead of a full resum; resum occasionally to shed drift.
    value += left.value + right.value - worst.value;
    abs_value += left.abs_value + right.abs_value - worst.abs_value;
    err += left.error + right.error - worst.error;
    if (count % 64 == 0) totals(value, abs_value, err);
  }
  totals(value, abs_value, err);
  return {value, abs_value, err, count};
}

}  // namespace frailtycc
