#pragma once

#include <string>

#include "deepntk/gaussmath.hpp"

namespace deepntk {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct ActivationModel {
  Activation kind = Activation::relu;
  QuadratureRule quadrature;  // unused for relu

  static ActivationModel relu();
  static ActivationModel tanh(int order = 64);

  double phi(double x) const;
  double dphi(double x) const;
};

// Hermite rule used for tanh expectations at variance q: the model's rule up
// to q = 0.6, then 2x, 4x, 8x its order (capped at 512) as the integrand
// narrows in z.
const QuadratureRule& tanh_rule(const ActivationModel& model, double q);

// ReLU correlation function (c asin c + sqrt(1-c^2))/pi + c/2 and derivative.
double relu_f(double c);
double relu_f_prime(double c);
// Complements 1 - f(1 - gamma) and 1 - f'(1 - gamma), accurate for tiny gamma.
double relu_one_minus_f(double gamma);
double relu_one_minus_f_prime(double gamma);

// Correlation map at the variance fixed point q.
struct CorrelationMap {
  ActivationModel activation;
  double q = 1.0;
  double sigma_b = 0.0;
  double sigma_w = 1.0;
};

double tanh_f(const CorrelationMap& map, double c);
// f^(j)(c) = sigma_w^2 q^(j-1) E[phi^(j)(u1) phi^(j)(u2)], j in {1, 2, 3}.
double tanh_f_deriv(const CorrelationMap& map, double c, int order);
// 1 - f(1 - gamma) assuming f(1) = 1, from E[(phi(u1) - phi(u2))^2].
double tanh_one_minus_f(const CorrelationMap& map, double gamma);

// Second moments of a pair of centred Gaussian fields. The pair is stored as
// (qx, qxp, half_dist) with half_dist = E[(y - y')^2] / 2 so that the
// correlation gap 1 - c stays accurate when c is close to 1.
struct PairCovariance {
  double qx = 0.0;
  double qxp = 0.0;
  double half_dist = 0.0;

  static PairCovariance from_covariances(double qx, double qxp, double qcov);

  double qcov() const { return 0.5 * (qx + qxp) - half_dist; }
  // sqrt(qx qxp) - qcov, clamped at zero.
  double gap() const;
  // 1 - c in [0, 2]; 1 when either variance vanishes.
  double one_minus_corr() const;
  double corr() const { return 1.0 - one_minus_corr(); }

  PairCovariance& operator+=(const PairCovariance& o);
  PairCovariance scaled(double s) const { return {qx * s, qxp * s, half_dist * s}; }
};

struct LayerMoments {
  PairCovariance block;  // sigma_b^2 + sigma_w^2 E[phi phi] terms
  double qdot = 0.0;     // sigma_w^2 E[phi'(u1) phi'(u2)]
};

LayerMoments propagate(const ActivationModel& model, double sigma_b, double sigma_w,
                       const PairCovariance& in);

struct CovarianceTriple {
  double qx, qxp, qcov;
};

CovarianceTriple covariance_step(const ActivationModel& model, double sigma_b, double sigma_w,
                                 double qx, double qxp, double qcov);

}  // namespace deepntk
