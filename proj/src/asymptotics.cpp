#include "deepntk/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "deepntk/parallel.hpp"

namespace deepntk {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kResidualFloor = 1e-300;

struct LinearFit {
  double slope, intercept, r2;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) fail(ErrorKind::invalid_argument, "fit needs distinct abscissae");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (intercept + slope * x[i]);
    ssr += e * e;
  }
  const double r2 = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return {slope, intercept, r2};
}

bool ffnn_like(ArchKind a) { return dense_equivalent(a) == ArchKind::ffnn; }

}  // namespace

std::string to_string(RateModel m) {
  switch (m) {
    case RateModel::power: return "power";
    case RateModel::power_log: return "power_log";
    case RateModel::exp: return "exp";
    case RateModel::inv_log: return "inv_log";
  }
  return "?";
}

RateModel parse_rate_model(const std::string& name) {
  for (RateModel m : {RateModel::power, RateModel::power_log, RateModel::exp, RateModel::inv_log}) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorKind::invalid_argument, "unknown rate model '" + name + "'");
}

RateFit fit_rate(const std::vector<int>& depths, const std::vector<double>& residuals,
                 RateModel model) {
  require(depths.size() == residuals.size(), "fit_rate: length mismatch");
  require(depths.size() >= 8, "fit_rate: need at least 8 depth samples");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    require(residuals[i] > 0.0, "fit_rate: residuals must be positive");
    require(depths[i] >= 2, "fit_rate: depths must be >= 2");
    const double L = depths[i];
    const double lr = std::log(residuals[i]);
    switch (model) {
      case RateModel::power:
        x.push_back(std::log(L));
        y.push_back(lr);
        break;
      case RateModel::power_log:
        x.push_back(std::log(L));
        y.push_back(lr - std::log(std::log(L)));
        break;
      case RateModel::exp:
        x.push_back(L);
        y.push_back(lr);
        break;
      case RateModel::inv_log:
        x.push_back(std::log(std::log(L)));
        y.push_back(lr);
        break;
    }
  }
  const LinearFit f = least_squares(x, y);
  RateFit out;
  out.model = model;
  out.exponent = model == RateModel::exp ? -f.slope : f.slope;
  out.prefactor = std::exp(f.intercept);
  out.r_squared = f.r2;
  out.L_min = *std::min_element(depths.begin(), depths.end());
  out.L_max = *std::max_element(depths.begin(), depths.end());
  return out;
}

ExpansionConstants expansion_constants(const ActivationModel& model, const InitParams& params) {
  ExpansionConstants k;
  const double sw2 = params.sigma_w * params.sigma_w;
  k.kappa_relu = 9.0 * kPi * kPi / 2.0;
  k.kappa_resnet = k.kappa_relu * (1.0 + 2.0 / sw2) * (1.0 + 2.0 / sw2);
  k.s = 2.0 * std::sqrt(2.0) / (3.0 * kPi);
  k.b = std::sqrt(2.0) / (30.0 * kPi);
  k.zeta_scaled = 16.0 / (k.s * k.s * sw2 * sw2);
  k.kappa_tanh = k.zeta_tanh = std::numeric_limits<double>::quiet_NaN();
  if (model.kind == Activation::tanh) {
    const CorrelationMap map = correlation_map(model, params);
    k.kappa_tanh = 2.0 / tanh_f_deriv(map, 1.0, 2);
    k.zeta_tanh = tanh_f_deriv(map, 1.0, 3) / 6.0;
  }
  return k;
}

ExpansionLaw expansion_law(ArchKind arch, const ActivationModel& model) {
  switch (dense_equivalent(arch)) {
    case ArchKind::scaled_resnet_dense: return ExpansionLaw::inverse_log_square;
    case ArchKind::resnet_dense: return ExpansionLaw::inverse_square;
    default:
      return model.kind == Activation::relu ? ExpansionLaw::inverse_square : ExpansionLaw::inverse;
  }
}

std::string to_string(ExpansionLaw law) {
  switch (law) {
    case ExpansionLaw::inverse_square: return "l^2(1-c)";
    case ExpansionLaw::inverse: return "l(1-c)";
    case ExpansionLaw::inverse_log_square: return "log(l)^2(1-c)";
  }
  return "?";
}

double expansion_constant(ArchKind arch, const ActivationModel& model, const InitParams& params) {
  arch = dense_equivalent(arch);
  if (arch != ArchKind::ffnn && model.kind != Activation::relu) {
    fail(ErrorKind::unsupported, "residual expansions are ReLU only");
  }
  if (arch == ArchKind::ffnn) {
    const PhaseReport rep = classify(model, params);
    if (rep.phase != Phase::eoc) {
      fail(ErrorKind::unsupported, "correlation expansions hold on the edge of chaos only");
    }
  }
  const ExpansionConstants k = expansion_constants(model, params);
  switch (arch) {
    case ArchKind::resnet_dense: return k.kappa_resnet;
    case ArchKind::scaled_resnet_dense: return k.zeta_scaled;
    default: return model.kind == Activation::relu ? k.kappa_relu : k.kappa_tanh;
  }
}

double theoretical_correlation(ArchKind arch, const ActivationModel& model,
                               const InitParams& params, int l) {
  require(l >= 2, "theoretical_correlation: l must be >= 2");
  const double k = expansion_constant(arch, model, params);
  const double L = l;
  switch (expansion_law(arch, model)) {
    case ExpansionLaw::inverse_square:
      if (ffnn_like(arch)) return 1.0 - k / (L * L) + 3.0 * std::sqrt(k) * std::log(L) / (L * L * L);
      return 1.0 - k / (L * L);
    case ExpansionLaw::inverse: return 1.0 - k / L;
    case ExpansionLaw::inverse_log_square: {
      const double lg = std::log(L);
      return 1.0 - k / (lg * lg);
    }
  }
  return 0.0;
}

std::vector<double> correlation_gaps(ArchKind arch, const ActivationModel& model,
                                     const InitParams& params, double c1,
                                     const std::vector<int>& depths) {
  c1 = clamp_correlation(c1);
  require(!depths.empty(), "no depths requested");
  arch = dense_equivalent(arch);
  double q = 1.0;
  if (arch == ArchKind::ffnn) {
    const double sw2 = params.sigma_w * params.sigma_w;
    const bool relu_unbounded = model.kind == Activation::relu && sw2 >= 2.0;
    if (!relu_unbounded) {
      q = variance_fixed_point(model, params, 1.0);
      if (!(q > 0.0)) fail(ErrorKind::numeric, "degenerate fixed-point variance");
    }
  }
  PairCovariance cov{q, q, q * (1.0 - c1)};
  const int L = *std::max_element(depths.begin(), depths.end());
  std::vector<double> by_layer(L + 1, 0.0);
  by_layer[1] = cov.one_minus_corr();
  double S = 0.0;
  for (int l = 2; l <= L; ++l) {
    const double sb_eff = params.sigma_b * std::exp(-0.5 * S);
    const LayerMoments m = propagate(model, sb_eff, params.sigma_w, cov);
    switch (arch) {
      case ArchKind::resnet_dense: cov += m.block; break;
      case ArchKind::scaled_resnet_dense: cov += m.block.scaled(1.0 / l); break;
      default: cov = m.block; break;
    }
    const double big = std::max(cov.qx, cov.qxp);
    if (big > 1e100) {
      if (arch == ArchKind::ffnn && model.kind != Activation::relu) {
        fail(ErrorKind::numeric, "variance overflow");
      }
      cov = cov.scaled(1.0 / big);
      S += std::log(big);
    }
    by_layer[l] = cov.one_minus_corr();
  }
  std::vector<double> out;
  for (int l : depths) {
    require(l >= 1, "depths must be >= 1");
    out.push_back(by_layer[l]);
  }
  return out;
}

std::vector<ExpansionCheck> check_expansion(const std::vector<int>& depths,
                                            const std::vector<double>& gaps, ArchKind arch,
                                            const ActivationModel& model,
                                            const InitParams& params) {
  require(depths.size() == gaps.size(), "check_expansion: length mismatch");
  const ExpansionLaw law = expansion_law(arch, model);
  const double k = expansion_constant(arch, model, params);
  std::vector<ExpansionCheck> out;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const double L = depths[i];
    double scale = 0.0;
    switch (law) {
      case ExpansionLaw::inverse_square: scale = L * L; break;
      case ExpansionLaw::inverse: scale = L; break;
      case ExpansionLaw::inverse_log_square: scale = std::log(L) * std::log(L); break;
    }
    ExpansionCheck c;
    c.law = law;
    c.depth = depths[i];
    c.empirical = scale * gaps[i];
    c.theoretical = k;
    c.rel_error = c.empirical / k - 1.0;
    out.push_back(c);
  }
  return out;
}

ExpansionCheck check_expansion(ArchKind arch, const ActivationModel& model,
                               const InitParams& params, double c1, int depth) {
  const auto gaps = correlation_gaps(arch, model, params, c1, {depth});
  return check_expansion({depth}, gaps, arch, model, params).front();
}

std::vector<int> default_rate_depths() {
  std::vector<int> d;
  for (int j = 0; j <= 8; ++j) d.push_back(32 << j);
  return d;
}

RateStudy rate_study(ArchKind arch, const ActivationModel& model, const InitParams& params,
                     const std::vector<PairCovariance>& firsts, const std::vector<int>& depths) {
  require(!firsts.empty(), "rate_study: no input pairs");
  require(!depths.empty(), "rate_study: no depths");
  const ArchKind dense = dense_equivalent(arch);
  RateStudy st;
  st.depths = depths;
  bool eoc = false;
  double alpha = 0.0;
  if (dense == ArchKind::ffnn) {
    const PhaseReport rep = classify(model, params, kPhaseTolerance, firsts.front().qx);
    eoc = rep.phase == Phase::eoc;
    st.norm = eoc ? Normalization::average : Normalization::none;
    alpha = rep.chi;
  } else {
    st.norm = default_normalization(dense);
  }
  KernelConfig cfg;
  cfg.arch = dense;
  cfg.activation = model;
  cfg.params = params;
  cfg.norm = st.norm;
  st.limits.resize(firsts.size());
  st.per_pair.resize(firsts.size());
  parallel_for(firsts.size(), [&](std::size_t i) {
    st.limits[i] = limiting_kernel(dense, model, params, firsts[i]);
    const auto vals = kernel_values_at(cfg, firsts[i], depths);
    std::vector<double> r(vals.size());
    for (std::size_t j = 0; j < vals.size(); ++j) {
      r[j] = std::max(std::abs(vals[j] - st.limits[i]), kResidualFloor);
    }
    st.per_pair[i] = std::move(r);
  });
  st.residual.assign(depths.size(), kResidualFloor);
  for (const auto& r : st.per_pair) {
    for (std::size_t j = 0; j < r.size(); ++j) st.residual[j] = std::max(st.residual[j], r[j]);
  }
  const double L0 = depths.front();
  auto shape = [&](double L) -> double {
    if (dense == ArchKind::scaled_resnet_dense) return 1.0 / std::log(L);
    if (dense == ArchKind::ffnn && !eoc) return std::pow(alpha, L - L0);
    return std::log(L) / L;
  };
  st.theory_shape = dense == ArchKind::scaled_resnet_dense ? "1/log(L)"
                    : (dense == ArchKind::ffnn && !eoc) ? "chi^L"
                                                        : "log(L)/L";
  for (int L : depths) st.theory.push_back(st.residual.front() * shape(L) / shape(L0));
  return st;
}

}  // namespace deepntk
