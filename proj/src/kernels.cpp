#include "deepntk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deepntk {

namespace {

constexpr double kRescaleAbove = 1e100;
constexpr double kOverflowAbove = 1e300;
constexpr double kBEpsilon = 1e-3;

enum class Residual { none, plain, scaled };

Residual residual_of(ArchKind a) {
  switch (a) {
    case ArchKind::resnet_dense:
    case ArchKind::resnet_conv: return Residual::plain;
    case ArchKind::scaled_resnet_dense:
    case ArchKind::scaled_resnet_conv: return Residual::scaled;
    default: return Residual::none;
  }
}

void reserve_trace(KernelTrace& t, int L) {
  for (auto* v : {&t.qx, &t.qxp, &t.qcov, &t.corr, &t.one_minus_corr, &t.qdot, &t.ntk,
                  &t.log_scale}) {
    v->assign(L, 0.0);
  }
}

void record(KernelTrace& t, int l, const PairCovariance& cov, double qdot, double K, double S) {
  const int i = l - 1;
  t.qx[i] = cov.qx;
  t.qxp[i] = cov.qxp;
  t.qcov[i] = cov.qcov();
  t.one_minus_corr[i] = cov.one_minus_corr();
  t.corr[i] = 1.0 - t.one_minus_corr[i];
  t.qdot[i] = qdot;
  t.ntk[i] = K;
  t.log_scale[i] = S;
}

void check_params(const InitParams& p) {
  require(p.sigma_w > 0.0 && p.sigma_b >= 0.0, "require sigma_w > 0 and sigma_b >= 0");
}

int wrap(int i, int M) { return ((i % M) + M) % M; }

// sum_j sum_beta a(j, p + beta) b(j, r + beta)
double conv_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int p, int r, int k) {
  const int M = static_cast<int>(a.cols());
  double s = 0.0;
  for (int beta = -k; beta <= k; ++beta) {
    s += a.col(wrap(p + beta, M)).dot(b.col(wrap(r + beta, M)));
  }
  return s;
}

double conv_half_dist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int p, int r, int k) {
  const int M = static_cast<int>(a.cols());
  double s = 0.0;
  for (int beta = -k; beta <= k; ++beta) {
    s += (a.col(wrap(p + beta, M)) - b.col(wrap(r + beta, M))).squaredNorm();
  }
  return 0.5 * s;
}

void check_conv_inputs(const ConvPair& pair, int M, int k) {
  require(pair.x.rows() >= 1 && pair.x.cols() >= 1, "conv input must be nonempty");
  require(pair.x.rows() == pair.xp.rows() && pair.x.cols() == pair.xp.cols(),
          "conv inputs must share shape");
  require(pair.x.cols() == M, "conv input width must equal M");
  require(k >= 1 && 2 * k + 1 <= M, "conv filter requires 1 <= k and 2k+1 <= M");
}

bool grid_constant(const Eigen::MatrixXd& g) {
  const double ref = g(0, 0);
  const double tol = 1e-9 * std::max(1.0, std::abs(ref));
  return ((g.array() - ref).abs() <= tol).all();
}

KernelTrace full_grid_trace(ArchKind kind, const ConvPair& pair, const ActivationModel& model,
                            const InitParams& params, int k, int L) {
  const int M = static_cast<int>(pair.x.cols());
  const double n0 = static_cast<double>(pair.x.rows());
  const double width = 2.0 * k + 1.0;
  const double sb2 = params.sigma_b * params.sigma_b, sw2 = params.sigma_w * params.sigma_w;
  const double c1 = sw2 / (n0 * width);
  const Residual res = residual_of(kind);

  Eigen::VectorXd vx(M), vp(M);
  Eigen::MatrixXd H(M, M), K(M, M);
  for (int a = 0; a < M; ++a) {
    vx[a] = sb2 + c1 * conv_inner(pair.x, pair.x, a, a, k);
    vp[a] = sb2 + c1 * conv_inner(pair.xp, pair.xp, a, a, k);
  }
  for (int a = 0; a < M; ++a) {
    for (int b = 0; b < M; ++b) {
      H(a, b) = c1 * conv_half_dist(pair.x, pair.xp, a, b, k);
      K(a, b) = sb2 + c1 * conv_inner(pair.x, pair.xp, a, b, k);
    }
  }

  KernelTrace t;
  t.arch = kind;
  t.sigma_w = params.sigma_w;
  t.depth = L;
  reserve_trace(t, L);
  t.grid.resize(L);
  double S = 0.0;
  Eigen::MatrixXd qdot = Eigen::MatrixXd::Zero(M, M);

  auto snapshot = [&](int l) {
    ConvGrid g;
    g.qx = vx;
    g.qxp = vp;
    g.qcov.resize(M, M);
    g.corr.resize(M, M);
    g.qdot = qdot;
    g.ntk = K;
    for (int a = 0; a < M; ++a) {
      for (int b = 0; b < M; ++b) {
        const PairCovariance c{vx[a], vp[b], H(a, b)};
        g.qcov(a, b) = c.qcov();
        g.corr(a, b) = c.corr();
      }
    }
    t.grid[l - 1] = std::move(g);
    record(t, l, PairCovariance{vx[0], vp[0], H(0, 0)}, qdot(0, 0), K(0, 0), S);
  };
  t.in_b_epsilon = PairCovariance{vx[0], vp[0], H(0, 0)}.one_minus_corr() >= kBEpsilon;
  snapshot(1);

  Eigen::MatrixXd psi(M, M), bh(M, M);
  Eigen::VectorXd bx(M), bp(M);
  for (int l = 2; l <= L; ++l) {
    const double scale = res == Residual::scaled ? 1.0 / l : 1.0;
    const double sb_eff = params.sigma_b * std::exp(-0.5 * S);
    for (int a = 0; a < M; ++a) {
      for (int b = 0; b < M; ++b) {
        const auto m = propagate(model, sb_eff, params.sigma_w, PairCovariance{vx[a], vp[b], H(a, b)});
        if (b == 0) bx[a] = m.block.qx;
        if (a == 0) bp[b] = m.block.qxp;
        qdot(a, b) = m.qdot;
        psi(a, b) = m.qdot * scale * K(a, b) + m.block.qcov();
        bh(a, b) = m.block.half_dist;
      }
    }
    Eigen::VectorXd nvx = Eigen::VectorXd::Zero(M), nvp = Eigen::VectorXd::Zero(M);
    Eigen::MatrixXd nH = Eigen::MatrixXd::Zero(M, M), nK = Eigen::MatrixXd::Zero(M, M);
    for (int a = 0; a < M; ++a) {
      for (int beta = -k; beta <= k; ++beta) {
        nvx[a] += bx[wrap(a + beta, M)];
        nvp[a] += bp[wrap(a + beta, M)];
      }
      for (int b = 0; b < M; ++b) {
        for (int beta = -k; beta <= k; ++beta) {
          nH(a, b) += bh(wrap(a + beta, M), wrap(b + beta, M));
          nK(a, b) += psi(wrap(a + beta, M), wrap(b + beta, M));
        }
      }
    }
    nvx /= width;
    nvp /= width;
    nH /= width;
    nK /= width;
    if (res == Residual::none) {
      vx = nvx;
      vp = nvp;
      H = nH;
      K = nK;
    } else {
      vx += scale * nvx;
      vp += scale * nvp;
      H += scale * nH;
      K += nK;
    }
    if (res != Residual::none) {
      const double big = std::max({vx.maxCoeff(), vp.maxCoeff(), K.cwiseAbs().maxCoeff()});
      if (big > kRescaleAbove) {
        vx /= big;
        vp /= big;
        H /= big;
        K /= big;
        S += std::log(big);
      }
    } else if (!(std::max(vx.maxCoeff(), K.cwiseAbs().maxCoeff()) < kOverflowAbove)) {
      t.variance_overflow = true;
    }
    snapshot(l);
  }
  return t;
}

}  // namespace

std::string to_string(ArchKind a) {
  switch (a) {
    case ArchKind::ffnn: return "ffnn";
    case ArchKind::cnn: return "cnn";
    case ArchKind::resnet_dense: return "resnet_dense";
    case ArchKind::resnet_conv: return "resnet_conv";
    case ArchKind::scaled_resnet_dense: return "scaled_resnet_dense";
    case ArchKind::scaled_resnet_conv: return "scaled_resnet_conv";
  }
  return "?";
}

ArchKind parse_architecture(const std::string& name) {
  for (ArchKind a : {ArchKind::ffnn, ArchKind::cnn, ArchKind::resnet_dense, ArchKind::resnet_conv,
                     ArchKind::scaled_resnet_dense, ArchKind::scaled_resnet_conv}) {
    if (to_string(a) == name) return a;
  }
  if (name == "resnet") return ArchKind::resnet_dense;
  if (name == "scaled_resnet") return ArchKind::scaled_resnet_dense;
  fail(ErrorKind::invalid_argument, "unknown architecture '" + name + "'");
}

bool is_conv(ArchKind a) {
  return a == ArchKind::cnn || a == ArchKind::resnet_conv || a == ArchKind::scaled_resnet_conv;
}

bool is_residual(ArchKind a) { return residual_of(a) != Residual::none; }

ArchKind dense_equivalent(ArchKind a) {
  switch (a) {
    case ArchKind::cnn: return ArchKind::ffnn;
    case ArchKind::resnet_conv: return ArchKind::resnet_dense;
    case ArchKind::scaled_resnet_conv: return ArchKind::scaled_resnet_dense;
    default: return a;
  }
}

double KernelTrace::ntk_value(int l) const { return ntk[l - 1] * std::exp(log_scale[l - 1]); }

double KernelTrace::log_ntk(int l) const {
  return std::log(std::abs(ntk[l - 1])) + log_scale[l - 1];
}

PairCovariance dense_first_layer(const DensePair& pair, const InitParams& params) {
  require(pair.x.size() >= 1, "input dimension must be >= 1");
  require(pair.x.size() == pair.xp.size(), "input dimensions differ");
  const double d = static_cast<double>(pair.x.size());
  const double sb2 = params.sigma_b * params.sigma_b, sw2 = params.sigma_w * params.sigma_w;
  return PairCovariance{sb2 + sw2 * pair.x.squaredNorm() / d,
                        sb2 + sw2 * pair.xp.squaredNorm() / d,
                        0.5 * sw2 * (pair.x - pair.xp).squaredNorm() / d};
}

KernelTrace dense_trace(ArchKind kind, const ActivationModel& model, const InitParams& params,
                        const PairCovariance& first, int L) {
  check_params(params);
  require(L >= 1, "depth must be >= 1");
  require(!is_conv(kind), "dense_trace expects a dense architecture");
  const Residual res = residual_of(kind);
  if (res != Residual::none && model.kind != Activation::relu) {
    fail(ErrorKind::unsupported, "residual recursions are implemented for ReLU only");
  }
  KernelTrace t;
  t.arch = kind;
  t.sigma_w = params.sigma_w;
  t.depth = L;
  reserve_trace(t, L);
  t.in_b_epsilon = first.one_minus_corr() >= kBEpsilon;

  PairCovariance cov = first;
  double K = first.qcov();
  double S = 0.0;
  record(t, 1, cov, 0.0, K, S);
  for (int l = 2; l <= L; ++l) {
    const double sb_eff = params.sigma_b * std::exp(-0.5 * S);
    const LayerMoments m = propagate(model, sb_eff, params.sigma_w, cov);
    switch (res) {
      case Residual::none:
        cov = m.block;
        K = m.qdot * K + m.block.qcov();
        break;
      case Residual::plain:
        K = K * (1.0 + m.qdot) + m.block.qcov();
        cov += m.block;
        break;
      case Residual::scaled:
        K = K * (1.0 + m.qdot / l) + m.block.qcov();
        cov += m.block.scaled(1.0 / l);
        break;
    }
    if (res != Residual::none) {
      const double big = std::max({cov.qx, cov.qxp, std::abs(K)});
      if (big > kRescaleAbove) {
        cov = cov.scaled(1.0 / big);
        K /= big;
        S += std::log(big);
      }
    } else if (!(std::max({cov.qx, cov.qxp, std::abs(K)}) < kOverflowAbove)) {
      t.variance_overflow = true;
      const double inf = std::numeric_limits<double>::infinity();
      for (int r = l; r <= L; ++r) {
        record(t, r, PairCovariance{inf, inf, 0.0}, m.qdot, inf, 0.0);
        t.corr[r - 1] = std::numeric_limits<double>::quiet_NaN();
        t.one_minus_corr[r - 1] = std::numeric_limits<double>::quiet_NaN();
      }
      return t;
    }
    record(t, l, cov, m.qdot, K, S);
  }
  return t;
}

KernelTrace ntk_ffnn(const DensePair& pair, const ActivationModel& model,
                     const InitParams& params, int L) {
  return dense_trace(ArchKind::ffnn, model, params, dense_first_layer(pair, params), L);
}

KernelTrace ntk_resnet_dense(const DensePair& pair, const InitParams& params, int L) {
  return dense_trace(ArchKind::resnet_dense, ActivationModel::relu(), params,
                     dense_first_layer(pair, params), L);
}

KernelTrace ntk_scaled_resnet(const DensePair& pair, const InitParams& params, int L) {
  return dense_trace(ArchKind::scaled_resnet_dense, ActivationModel::relu(), params,
                     dense_first_layer(pair, params), L);
}

KernelTrace conv_trace(ArchKind kind, const ConvPair& pair, const ActivationModel& model,
                       const InitParams& params, int k, int L, bool assumption1) {
  check_params(params);
  require(is_conv(kind), "conv_trace expects a conv architecture");
  require(L >= 1, "depth must be >= 1");
  const int M = static_cast<int>(pair.x.cols());
  check_conv_inputs(pair, M, k);
  if (is_residual(kind) && model.kind != Activation::relu) {
    fail(ErrorKind::unsupported, "residual recursions are implemented for ReLU only");
  }
  if (!assumption1) return full_grid_trace(kind, pair, model, params, k, L);

  const double n0 = static_cast<double>(pair.x.rows());
  const double c1 = params.sigma_w * params.sigma_w / (n0 * (2.0 * k + 1.0));
  const double sb2 = params.sigma_b * params.sigma_b;
  Eigen::MatrixXd gxx(M, M), gpp(M, M), gxp(M, M);
  for (int a = 0; a < M; ++a) {
    for (int b = 0; b < M; ++b) {
      gxx(a, b) = conv_inner(pair.x, pair.x, a, b, k);
      gpp(a, b) = conv_inner(pair.xp, pair.xp, a, b, k);
      gxp(a, b) = conv_inner(pair.x, pair.xp, a, b, k);
    }
  }
  if (!grid_constant(gxx) || !grid_constant(gpp) || !grid_constant(gxp)) {
    fail(ErrorKind::assumption_violated, "first-layer conv covariance depends on the offsets");
  }
  const PairCovariance first{sb2 + c1 * gxx(0, 0), sb2 + c1 * gpp(0, 0),
                             c1 * conv_half_dist(pair.x, pair.xp, 0, 0, k)};
  KernelTrace t = dense_trace(dense_equivalent(kind), model, params, first, L);
  t.arch = kind;
  return t;
}

KernelTrace ntk_cnn(const ConvPair& pair, const ActivationModel& model, const InitParams& params,
                    int M, int k, int L, bool assumption1) {
  check_conv_inputs(pair, M, k);
  return conv_trace(ArchKind::cnn, pair, model, params, k, L, assumption1);
}

KernelTrace ntk_resnet_conv(const ConvPair& pair, const InitParams& params, int M, int k, int L,
                            bool assumption1) {
  check_conv_inputs(pair, M, k);
  return conv_trace(ArchKind::resnet_conv, pair, ActivationModel::relu(), params, k, L,
                    assumption1);
}

KernelTrace ntk_scaled_resnet_conv(const ConvPair& pair, const InitParams& params, int M, int k,
                                   int L, bool assumption1) {
  check_conv_inputs(pair, M, k);
  return conv_trace(ArchKind::scaled_resnet_conv, pair, ActivationModel::relu(), params, k, L,
                    assumption1);
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::average: return "average";
    case Normalization::resnet: return "resnet";
    case Normalization::scaled: return "scaled";
  }
  return "?";
}

Normalization parse_normalization(const std::string& name) {
  for (Normalization n : {Normalization::none, Normalization::average, Normalization::resnet,
                          Normalization::scaled}) {
    if (to_string(n) == name) return n;
  }
  fail(ErrorKind::invalid_argument, "unknown normalization '" + name + "'");
}

Normalization default_normalization(ArchKind a) {
  switch (residual_of(a)) {
    case Residual::plain: return Normalization::resnet;
    case Residual::scaled: return Normalization::scaled;
    default: return Normalization::average;
  }
}

double log_normalizer(Normalization n, double sigma_w, int l) {
  const double a = 0.5 * sigma_w * sigma_w;
  switch (n) {
    case Normalization::none: return 0.0;
    case Normalization::average: return std::log(static_cast<double>(l));
    case Normalization::resnet: return std::log(static_cast<double>(l)) + (l - 1) * std::log1p(a);
    case Normalization::scaled: return (1.0 + a) * std::log(static_cast<double>(l));
  }
  return 0.0;
}

std::vector<double> normalize(const KernelTrace& trace, Normalization scheme) {
  if (scheme != Normalization::none && scheme != default_normalization(trace.arch)) {
    fail(ErrorKind::invalid_argument,
         "normalization " + to_string(scheme) + " does not match " + to_string(trace.arch));
  }
  std::vector<double> out(trace.depth);
  for (int l = 1; l <= trace.depth; ++l) {
    out[l - 1] = trace.ntk[l - 1] *
                 std::exp(trace.log_scale[l - 1] - log_normalizer(scheme, trace.sigma_w, l));
  }
  return out;
}

double limiting_kernel(ArchKind arch, const ActivationModel& model, const InitParams& params,
                       const PairCovariance& first) {
  check_params(params);
  arch = dense_equivalent(arch);
  const bool same = first.half_dist == 0.0 && first.qx == first.qxp;
  const double a = 0.5 * params.sigma_w * params.sigma_w;
  if (arch == ArchKind::resnet_dense) {
    require(model.kind == Activation::relu, "resnet limit requires ReLU");
    const double sb2 = params.sigma_b * params.sigma_b;
    const double Q = first.qx + sb2 / a, Qp = first.qxp + sb2 / a;
    return (a / (1.0 + a)) * std::sqrt(Q * Qp) * (same ? 1.0 : 0.25);
  }
  if (arch == ArchKind::scaled_resnet_dense) {
    require(model.kind == Activation::relu, "scaled resnet limit requires ReLU");
    if (params.sigma_b != 0.0) {
      fail(ErrorKind::unsupported, "scaled resnet limit is only available for sigma_b = 0");
    }
    return a * std::sqrt(first.qx * first.qxp) / std::tgamma(2.0 + a);
  }
  const PhaseReport rep = classify(model, params, kPhaseTolerance, first.qx);
  if (rep.phase == Phase::eoc) {
    if (model.kind == Activation::relu) {
      return std::sqrt(first.qx * first.qxp) * (same ? 1.0 : 0.25);
    }
    return rep.q_fixed * (same ? 1.0 : 1.0 / 3.0);
  }
  if (model.kind == Activation::relu && rep.phase == Phase::chaotic) {
    fail(ErrorKind::divergence, "ReLU kernel diverges in the chaotic phase");
  }
  // Ordered or chaotic tanh: run the recursion until K^l settles.
  PairCovariance cov = first;
  double K = first.qcov();
  int stable = 0;
  for (int l = 2; l <= 2000000; ++l) {
    const LayerMoments m = propagate(model, params.sigma_b, params.sigma_w, cov);
    if (m.qdot >= 1.0 && l > 200) {
      fail(ErrorKind::divergence, "kernel diverges: gradient factor >= 1 at the limit");
    }
    const double next = m.qdot * K + m.block.qcov();
    cov = m.block;
    stable = std::abs(next - K) <= 1e-15 * std::max(1.0, std::abs(next)) ? stable + 1 : 0;
    K = next;
    if (!std::isfinite(K)) fail(ErrorKind::divergence, "kernel diverges");
    if (stable >= 5) return cov.qcov() / (1.0 - m.qdot);
  }
  fail(ErrorKind::convergence, "kernel recursion did not settle");
}

double limiting_kernel(ArchKind arch, const ActivationModel& model, const InitParams& params,
                       const DensePair& pair) {
  return limiting_kernel(arch, model, params, dense_first_layer(pair, params));
}

double kernel_value(const KernelConfig& config, const PairCovariance& first) {
  return kernel_values_at(config, first, {config.depth}).front();
}

double kernel_value(const KernelConfig& config, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& xp) {
  return kernel_value(config, dense_first_layer(DensePair{x, xp}, config.params));
}

std::vector<double> kernel_values_at(const KernelConfig& config, const PairCovariance& first,
                                     const std::vector<int>& depths) {
  require(!depths.empty(), "no depths requested");
  const int L = *std::max_element(depths.begin(), depths.end());
  require(*std::min_element(depths.begin(), depths.end()) >= 1, "depths must be >= 1");
  const KernelTrace t =
      dense_trace(dense_equivalent(config.arch), config.activation, config.params, first, L);
  const std::vector<double> norm = normalize(t, config.norm);
  std::vector<double> out;
  out.reserve(depths.size());
  for (int l : depths) out.push_back(norm[l - 1]);
  return out;
}

}  // namespace deepntk
