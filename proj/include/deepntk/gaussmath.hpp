#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "deepntk/errors.hpp"

namespace deepntk {

enum class QuadratureKind { hermite, jacobi };

// Gaussian quadrature rule. Hermite rules integrate against the standard
// normal density; Jacobi rules against (1-t)^a (1+t)^a on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  QuadratureKind kind = QuadratureKind::hermite;
  double alpha_exponent = 0.0;  // jacobi only

  std::size_t order() const { return nodes.size(); }
};

QuadratureRule gauss_hermite(int order);
// Symmetric Gauss-Jacobi rule, weight (1-t^2)^alpha, alpha > -1.
QuadratureRule gauss_jacobi(int order, double alpha);

// Shared order-64 Hermite rule.
const QuadratureRule& default_hermite();

inline constexpr double kCorrelationSlack = 1e-12;

// Clamps c to [-1, 1], rejecting values outside by more than the slack.
double clamp_correlation(double c);

// E[g(sqrt(q) Z)], Z ~ N(0, 1).
template <class G>
double expect1(G&& g, double q, const QuadratureRule& rule) {
  require(q >= 0.0, "expect1: variance must be nonnegative");
  const double s = std::sqrt(q);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.order(); ++i) {
    const double v = g(s * rule.nodes[i]);
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "expect1: non-finite integrand");
    acc += rule.weights[i] * v;
  }
  return acc;
}

// E[g1(u1) g2(u2)] for centred Gaussians with variances q1, q2 and correlation c.
template <class G1, class G2>
double expect2(G1&& g1, G2&& g2, double q1, double q2, double c, const QuadratureRule& rule) {
  require(q1 >= 0.0 && q2 >= 0.0, "expect2: variances must be nonnegative");
  c = clamp_correlation(c);
  const double s1 = std::sqrt(q1), s2 = std::sqrt(q2);
  const double sc = std::sqrt(std::max(0.0, (1.0 - c) * (1.0 + c)));
  const std::size_t n = rule.order();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = rule.nodes[i];
    const double a = g1(s1 * zi);
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      inner += rule.weights[j] * g2(s2 * (c * zi + sc * rule.nodes[j]));
    }
    const double term = rule.weights[i] * a * inner;
    if (!std::isfinite(term)) fail(ErrorKind::numeric, "expect2: non-finite integrand");
    acc += term;
  }
  return acc;
}

template <class G>
double expect2(G&& g, double q1, double q2, double c, const QuadratureRule& rule) {
  // fixed argument order keeps the result exactly symmetric in (q1, q2)
  if (q2 < q1) std::swap(q1, q2);
  return expect2(g, g, q1, q2, c, rule);
}

// E[g1(u1) g2(u2)] for integrands that are smooth except where their argument
// crosses zero (ReLU-type kinks). Both integrals are split at the kink and
// evaluated with Gauss-Legendre panels on [-10, 10] in standard-normal units.
double expect2_split(double (*g1)(double), double (*g2)(double), double q1, double q2, double c,
                     int panel_order = 64);

}  // namespace deepntk
