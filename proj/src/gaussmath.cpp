#include "deepntk/gaussmath.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace deepntk {

namespace {

// Gauss rule from the Jacobi matrix of an orthonormal family with recurrence
// t p_k = b_{k+1} p_{k+1} + b_k p_{k-1} (all diagonal terms zero here).
// Nodes from the tridiagonal eigenproblem, polished by Newton on p_n; weights
// from the Christoffel function 1 / sum_k p_k(x)^2.
QuadratureRule symmetric_rule(int n, const std::vector<double>& b, double mu0) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1);
  for (int k = 0; k < n - 1; ++k) off[k] = b[k + 1];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  const double p0 = 1.0 / std::sqrt(mu0);

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()[i];
    for (int it = 0; it < 3; ++it) {
      double pm = 0.0, p = p0, dpm = 0.0, dp = 0.0;
      for (int k = 0; k < n; ++k) {
        const double bk = k > 0 ? b[k] : 0.0;
        const double pn = (x * p - bk * pm) / b[k + 1];
        const double dpn = (p + x * dp - bk * dpm) / b[k + 1];
        pm = p;
        p = pn;
        dpm = dp;
        dp = dpn;
      }
      if (dp == 0.0 || !std::isfinite(p / dp)) break;
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    double pm = 0.0, p = p0, sum = p0 * p0;
    for (int k = 0; k < n - 1; ++k) {
      const double bk = k > 0 ? b[k] : 0.0;
      const double pn = (x * p - bk * pm) / b[k + 1];
      pm = p;
      p = pn;
      sum += p * p;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sum;
  }
  // Enforce exact symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  require(order >= 2, "gauss_hermite: order must be >= 2");
  std::vector<double> b(order + 1);
  b[0] = 0.0;
  for (int k = 1; k <= order; ++k) b[k] = std::sqrt(static_cast<double>(k));
  QuadratureRule rule = symmetric_rule(order, b, 1.0);
  rule.kind = QuadratureKind::hermite;
  return rule;
}

QuadratureRule gauss_jacobi(int order, double alpha) {
  require(order >= 2, "gauss_jacobi: order must be >= 2");
  require(alpha > -1.0, "gauss_jacobi: exponent must exceed -1");
  const double a = alpha, s = 2.0 * alpha;
  std::vector<double> b(order + 1);
  b[0] = 0.0;
  for (int k = 1; k <= order; ++k) {
    const double n = k;
    const double t = 2.0 * n + s;
    double b2;
    if (k == 1) {
      // n = 1 written out: the general form is 0/0 when alpha = -1/2.
      b2 = 4.0 * (1.0 + a) * (1.0 + a) / ((2.0 + s) * (2.0 + s) * (3.0 + s));
    } else {
      b2 = 4.0 * n * (n + a) * (n + a) * (n + s) / (t * t * (t + 1.0) * (t - 1.0));
    }
    b[k] = std::sqrt(b2);
  }
  const double mu0 = std::exp((s + 1.0) * std::log(2.0) + 2.0 * std::lgamma(a + 1.0) -
                              std::lgamma(s + 2.0));
  QuadratureRule rule = symmetric_rule(order, b, mu0);
  rule.kind = QuadratureKind::jacobi;
  rule.alpha_exponent = alpha;
  return rule;
}

const QuadratureRule& default_hermite() {
  static const QuadratureRule rule = gauss_hermite(64);
  return rule;
}

double expect2_split(double (*g1)(double), double (*g2)(double), double q1, double q2, double c,
                     int panel_order) {
  require(q1 >= 0.0 && q2 >= 0.0, "expect2_split: variances must be nonnegative");
  c = clamp_correlation(c);
  static thread_local int cached_order = 0;
  static thread_local QuadratureRule legendre;
  if (cached_order != panel_order) {
    legendre = gauss_jacobi(panel_order, 0.0);
    cached_order = panel_order;
  }
  constexpr double T = 10.0;
  const double inv_sqrt_2pi = 0.3989422804014327;
  // integral of h(z) phi(z) over [a, b]
  auto panel = [&](double a, double b, auto&& h) {
    if (b <= a) return 0.0;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < legendre.order(); ++i) {
      const double z = mid + half * legendre.nodes[i];
      acc += legendre.weights[i] * h(z) * std::exp(-0.5 * z * z);
    }
    return acc * half * inv_sqrt_2pi;
  };
  const double s1 = std::sqrt(q1), s2 = std::sqrt(q2);
  const double sc = std::sqrt(std::max(0.0, (1.0 - c) * (1.0 + c)));
  auto inner = [&](double z1) {
    if (sc == 0.0) return g2(s2 * c * z1);
    const auto h = [&](double z2) { return g2(s2 * (c * z1 + sc * z2)); };
    const double kink = std::clamp(-c * z1 / sc, -T, T);
    return panel(-T, kink, h) + panel(kink, T, h);
  };
  const auto outer = [&](double z1) { return g1(s1 * z1) * inner(z1); };
  const double v = panel(-T, 0.0, outer) + panel(0.0, T, outer);
  if (!std::isfinite(v)) fail(ErrorKind::numeric, "expect2_split: non-finite integrand");
  return v;
}

double clamp_correlation(double c) {
  if (!(std::abs(c) <= 1.0 + kCorrelationSlack)) {
    fail(ErrorKind::invalid_argument, "correlation outside [-1, 1]");
  }
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace deepntk
