#include "deepntk/activations.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace deepntk {

namespace {

constexpr double kPi = std::numbers::pi;

// theta = acos(1 - gamma), accurate for small gamma.
double angle_from_gap(double gamma) {
  gamma = std::clamp(gamma, 0.0, 2.0);
  if (gamma < 1.0) return 2.0 * std::asin(std::sqrt(0.5 * gamma));
  return std::acos(1.0 - gamma);
}

// sin(theta) - theta cos(theta)
double sin_minus_theta_cos(double theta) {
  if (theta < 0.1) {
    // sum_{n>=1} (-1)^(n+1) 2n theta^(2n+1) / (2n+1)!
    const double t2 = theta * theta;
    double power = theta * t2;
    double fact = 6.0;
    double sum = 0.0;
    for (int n = 1; n <= 8; ++n) {
      const double term = 2.0 * n * power / fact;
      sum += (n % 2 == 1) ? term : -term;
      power *= t2;
      fact *= (2.0 * n + 2.0) * (2.0 * n + 3.0);
    }
    return sum;
  }
  return std::sin(theta) - theta * std::cos(theta);
}

struct TanhPairMoments {
  double cross = 0.0;     // E[phi(u1) phi(u2)]
  double half_diff = 0.0; // E[(phi(u1) - phi(u2))^2] / 2
  double dcross = 0.0;    // E[phi'(u1) phi'(u2)]
  double sq1 = 0.0;       // E[phi(u1)^2]
  double sq2 = 0.0;       // E[phi(u2)^2]
};

TanhPairMoments tanh_pair_moments(const QuadratureRule& rule, double qx, double qxp,
                                  double gamma) {
  gamma = std::clamp(gamma, 0.0, 2.0);
  const double s1 = std::sqrt(qx), s2 = std::sqrt(qxp);
  const double c = 1.0 - gamma;
  const double sc = std::sqrt(gamma * (2.0 - gamma));
  // u1 - u2 = lead * z_i - s2 * sc * z_j
  const double lead = (s1 - s2) + s2 * gamma;
  const std::size_t n = rule.order();
  TanhPairMoments m;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = rule.nodes[i];
    const double wi = rule.weights[i];
    const double t1 = std::tanh(s1 * zi);
    const double d1 = 1.0 - t1 * t1;
    const double t2i = std::tanh(s2 * zi);
    m.sq1 += wi * t1 * t1;
    m.sq2 += wi * t2i * t2i;
    double cross = 0.0, half = 0.0, dcross = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double zj = rule.nodes[j];
      const double wj = rule.weights[j];
      const double t2 = std::tanh(s2 * (c * zi + sc * zj));
      // tanh a - tanh b = tanh(a - b) (1 - tanh a tanh b)
      const double diff = std::tanh(lead * zi - s2 * sc * zj) * (1.0 - t1 * t2);
      cross += wj * t2;
      half += wj * diff * diff;
      dcross += wj * (1.0 - t2 * t2);
    }
    m.cross += wi * t1 * cross;
    m.half_diff += wi * 0.5 * half;
    m.dcross += wi * d1 * dcross;
  }
  if (!std::isfinite(m.cross + m.half_diff + m.dcross)) {
    fail(ErrorKind::numeric, "tanh quadrature produced a non-finite value");
  }
  return m;
}

// phi^(j) for tanh, j = 0..3
double tanh_derivative(double x, int order) {
  const double t = std::tanh(x);
  const double d1 = 1.0 - t * t;
  switch (order) {
    case 0: return t;
    case 1: return d1;
    case 2: return -2.0 * t * d1;
    case 3: {
      const double d2 = -2.0 * t * d1;
      return -2.0 * d1 * d1 - 2.0 * t * d2;
    }
  }
  fail(ErrorKind::invalid_argument, "derivative order must be 0..3");
}

}  // namespace

const QuadratureRule& tanh_rule(const ActivationModel& model, double q) {
  const int base = static_cast<int>(model.quadrature.order());
  int factor = 1;
  if (q > 4.0) factor = 8;
  else if (q > 1.5) factor = 4;
  else if (q > 0.6) factor = 2;
  const int order = std::min(base * factor, std::max(base, 512));
  if (order == base) return model.quadrature;
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_hermite(order)).first;
  return it->second;
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  fail(ErrorKind::invalid_argument, "unknown activation '" + name + "'");
}

ActivationModel ActivationModel::relu() { return ActivationModel{Activation::relu, {}}; }

ActivationModel ActivationModel::tanh(int order) {
  return ActivationModel{Activation::tanh,
                         order == 64 ? default_hermite() : gauss_hermite(order)};
}

double ActivationModel::phi(double x) const {
  return kind == Activation::relu ? std::max(x, 0.0) : std::tanh(x);
}

double ActivationModel::dphi(double x) const {
  if (kind == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

double relu_f(double c) {
  c = std::clamp(c, -1.0, 1.0);
  return 1.0 - relu_one_minus_f(1.0 - c);
}

double relu_f_prime(double c) {
  c = std::clamp(c, -1.0, 1.0);
  return std::asin(c) / kPi + 0.5;
}

double relu_one_minus_f(double gamma) {
  const double theta = angle_from_gap(gamma);
  const double h = std::sin(0.5 * theta);
  return 2.0 * h * h - sin_minus_theta_cos(theta) / kPi;
}

double relu_one_minus_f_prime(double gamma) { return angle_from_gap(gamma) / kPi; }

double tanh_f(const CorrelationMap& map, double c) {
  require(map.q > 0.0, "tanh_f: q must be positive");
  c = clamp_correlation(c);
  const auto& rule = tanh_rule(map.activation, map.q);
  const double e = expect2([](double x) { return std::tanh(x); }, map.q, map.q, c, rule);
  return (map.sigma_b * map.sigma_b + map.sigma_w * map.sigma_w * e) / map.q;
}

double tanh_f_deriv(const CorrelationMap& map, double c, int order) {
  require(order >= 1 && order <= 3, "tanh_f_deriv: order must be 1, 2 or 3");
  require(map.q > 0.0, "tanh_f_deriv: q must be positive");
  c = clamp_correlation(c);
  const auto g = [order](double x) { return tanh_derivative(x, order); };
  // phi'' and phi''' oscillate more than phi; take the rule meant for a wider variance
  const double q_rule = order >= 2 ? 4.0 * map.q : map.q;
  const double e = expect2(g, map.q, map.q, c, tanh_rule(map.activation, q_rule));
  return map.sigma_w * map.sigma_w * std::pow(map.q, order - 1) * e;
}

double tanh_one_minus_f(const CorrelationMap& map, double gamma) {
  require(map.q > 0.0, "tanh_one_minus_f: q must be positive");
  const auto m = tanh_pair_moments(tanh_rule(map.activation, map.q), map.q, map.q, gamma);
  return map.sigma_w * map.sigma_w * m.half_diff / map.q;
}

PairCovariance PairCovariance::from_covariances(double qx, double qxp, double qcov) {
  return PairCovariance{qx, qxp, 0.5 * (qx + qxp) - qcov};
}

double PairCovariance::gap() const {
  const double sx = std::sqrt(std::max(qx, 0.0)), sp = std::sqrt(std::max(qxp, 0.0));
  const double sum = sx + sp;
  if (sum == 0.0) return 0.0;
  const double dv = (qx - qxp) / sum;  // sqrt(qx) - sqrt(qxp)
  return std::max(0.0, half_dist - 0.5 * dv * dv);
}

double PairCovariance::one_minus_corr() const {
  const double r = std::sqrt(std::max(qx, 0.0) * std::max(qxp, 0.0));
  if (r == 0.0) return 1.0;
  return std::clamp(gap() / r, 0.0, 2.0);
}

PairCovariance& PairCovariance::operator+=(const PairCovariance& o) {
  qx += o.qx;
  qxp += o.qxp;
  half_dist += o.half_dist;
  return *this;
}

LayerMoments propagate(const ActivationModel& model, double sigma_b, double sigma_w,
                       const PairCovariance& in) {
  const double sb2 = sigma_b * sigma_b, sw2 = sigma_w * sigma_w;
  const double gamma = in.one_minus_corr();
  LayerMoments out;
  if (model.kind == Activation::relu) {
    const double sx = std::sqrt(in.qx), sp = std::sqrt(in.qxp);
    const double dv = sx - sp;
    out.block.qx = sb2 + 0.5 * sw2 * in.qx;
    out.block.qxp = sb2 + 0.5 * sw2 * in.qxp;
    out.block.half_dist = 0.5 * sw2 * (0.5 * dv * dv + sx * sp * relu_one_minus_f(gamma));
    out.qdot = 0.5 * sw2 * (1.0 - relu_one_minus_f_prime(gamma));
    return out;
  }
  // Evaluate with the smaller variance first so that swapping the pair swaps
  // the outputs bit for bit.
  const bool swap = in.qx > in.qxp;
  const QuadratureRule& rule = tanh_rule(model, std::max(in.qx, in.qxp));
  const auto m = swap ? tanh_pair_moments(rule, in.qxp, in.qx, gamma)
                      : tanh_pair_moments(rule, in.qx, in.qxp, gamma);
  out.block.qx = sb2 + sw2 * (swap ? m.sq2 : m.sq1);
  out.block.qxp = sb2 + sw2 * (swap ? m.sq1 : m.sq2);
  out.block.half_dist = sw2 * m.half_diff;
  out.qdot = sw2 * m.dcross;
  return out;
}

CovarianceTriple covariance_step(const ActivationModel& model, double sigma_b, double sigma_w,
                                 double qx, double qxp, double qcov) {
  require(qx > 0.0 && qxp > 0.0, "covariance_step: variances must be positive");
  require(qcov * qcov <= qx * qxp + 1e-10, "covariance_step: Cauchy-Schwarz violated");
  const auto m = propagate(model, sigma_b, sigma_w, PairCovariance::from_covariances(qx, qxp, qcov));
  return {m.block.qx, m.block.qxp, m.block.qcov()};
}

}  // namespace deepntk
