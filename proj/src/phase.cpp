#include "deepntk/phase.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace deepntk {

namespace {

double tanh_sq(double x) {
  const double t = std::tanh(x);
  return t * t;
}

double tanh_dsq(double x) {
  const double t = std::tanh(x);
  return (1.0 - t * t) * (1.0 - t * t);
}

bool relu_on_eoc_point(const InitParams& p) {
  return p.sigma_b == 0.0 && std::abs(p.sigma_w * p.sigma_w - 2.0) <= 1e-12;
}

// d/dq of the tanh variance map: sigma_w^2 E[phi'(u)^2 + phi(u) phi''(u)].
double tanh_variance_slope(const ActivationModel& model, const InitParams& p, double q) {
  const auto g = [](double x) {
    const double t = std::tanh(x);
    const double d1 = 1.0 - t * t;
    return d1 * d1 - 2.0 * t * t * d1;
  };
  return p.sigma_w * p.sigma_w * expect1(g, q, tanh_rule(model, q));
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::ordered: return "ordered";
    case Phase::chaotic: return "chaotic";
    case Phase::eoc: return "eoc";
  }
  return "?";
}

double variance_map(const ActivationModel& model, const InitParams& params, double q) {
  const double sb2 = params.sigma_b * params.sigma_b, sw2 = params.sigma_w * params.sigma_w;
  if (model.kind == Activation::relu) return sb2 + 0.5 * sw2 * q;
  return sb2 + sw2 * expect1(tanh_sq, q, tanh_rule(model, q));
}

double variance_fixed_point(const ActivationModel& model, const InitParams& params,
                            double input_variance) {
  require(params.sigma_w > 0.0 && params.sigma_b >= 0.0, "invalid (sigma_b, sigma_w)");
  const double sb2 = params.sigma_b * params.sigma_b, sw2 = params.sigma_w * params.sigma_w;
  if (model.kind == Activation::relu) {
    if (relu_on_eoc_point(params)) {
      require(input_variance > 0.0, "input variance must be positive");
      return input_variance;
    }
    if (sw2 >= 2.0) fail(ErrorKind::divergence, "ReLU variance diverges for sigma_w >= sqrt(2)");
    return sb2 / (1.0 - 0.5 * sw2);
  }
  // tanh: root of h(q) = V(q) - q on [0, sb2 + sw2], h(0) = sb2 >= 0.
  if (sb2 == 0.0 && sw2 <= 1.0) return 0.0;
  double lo = 0.0;
  double hi = sb2 + sw2;
  if (sb2 == 0.0) {
    // q = 0 is an unstable root here; bracket the positive one
    lo = 1e-12;
    while (variance_map(model, params, lo) - lo <= 0.0 && lo < hi) lo *= 10.0;
    if (lo >= hi) fail(ErrorKind::convergence, "tanh variance bracket not found");
  }
  double q = 1.0 < hi && 1.0 > lo ? 1.0 : 0.5 * (lo + hi);
  for (int it = 0; it < 100000; ++it) {
    const double h = variance_map(model, params, q) - q;
    if (h > 0.0) lo = q; else hi = q;
    const double slope = tanh_variance_slope(model, params, q) - 1.0;
    double next = slope != 0.0 ? q - h / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - q) < 1e-15 * std::max(1.0, q) || hi - lo < 1e-15 * std::max(1.0, q)) {
      return next;
    }
    q = next;
  }
  fail(ErrorKind::convergence, "variance fixed point did not converge");
}

double chi(const ActivationModel& model, const InitParams& params, double q) {
  const double sw2 = params.sigma_w * params.sigma_w;
  if (model.kind == Activation::relu) return 0.5 * sw2;
  if (q == 0.0) return sw2;
  return sw2 * expect1(tanh_dsq, q, tanh_rule(model, q));
}

PhaseReport classify(const ActivationModel& model, const InitParams& params, double tol,
                     double input_variance) {
  PhaseReport r;
  r.params = params;
  if (model.kind == Activation::relu && params.sigma_w * params.sigma_w >= 2.0 &&
      !relu_on_eoc_point(params)) {
    // no finite fixed point; the phase is still defined by chi
    r.q_fixed = std::numeric_limits<double>::infinity();
  } else {
    r.q_fixed = variance_fixed_point(model, params, input_variance);
  }
  r.degenerate = model.kind == Activation::tanh && r.q_fixed == 0.0;
  r.chi = relu_on_eoc_point(params) && model.kind == Activation::relu
              ? 1.0
              : chi(model, params, std::isfinite(r.q_fixed) ? r.q_fixed : 0.0);
  if (r.chi < 1.0 - tol) r.phase = Phase::ordered;
  else if (r.chi > 1.0 + tol) r.phase = Phase::chaotic;
  else r.phase = Phase::eoc;
  return r;
}

double eoc_curve(const ActivationModel& tanh_model, double sigma_b) {
  require(tanh_model.kind == Activation::tanh, "eoc_curve: tanh activation required");
  require(sigma_b >= 0.0, "eoc_curve: sigma_b must be nonnegative");
  const auto excess = [&](double sw) {
    const InitParams p{sigma_b, sw};
    return chi(tanh_model, p, variance_fixed_point(tanh_model, p)) - 1.0;
  };
  // Scan upward for the first sign change: chi is increasing in sigma_w, and
  // the quadrature is least reliable at the large-variance end of [1e-3, 10].
  double lo = 1e-3, hi = lo;
  double flo = excess(lo), fhi = flo;
  while (fhi * flo > 0.0 && hi < 10.0) {
    lo = hi;
    flo = fhi;
    hi = std::min(10.0, hi * 1.25);
    fhi = excess(hi);
  }
  if (flo * fhi > 0.0) fail(ErrorKind::no_solution, "chi - 1 has no sign change on [1e-3, 10]");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = excess(mid);
    if (std::abs(fm) < 1e-10 && hi - lo < 1e-12) return mid;
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * mid) break;
  }
  mid = 0.5 * (lo + hi);
  if (std::abs(excess(mid)) >= 1e-10) fail(ErrorKind::no_solution, "eoc bisection stalled");
  return mid;
}

CorrelationMap correlation_map(const ActivationModel& model, const InitParams& params,
                               double input_variance) {
  const double q = variance_fixed_point(model, params, input_variance);
  if (!(q > 0.0)) fail(ErrorKind::numeric, "degenerate fixed point q = 0");
  return CorrelationMap{model, q, params.sigma_b, params.sigma_w};
}

}  // namespace deepntk
