// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "deepntk/asymptotics.hpp"
#include "deepntk/empirical.hpp"
#include "deepntk/io/dataset.hpp"
#include "deepntk/regression.hpp"
#include "deepntk/selftest.hpp"
#include "deepntk/spectral.hpp"

using namespace deepntk;

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kPi = 3.14159265358979323846;

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = budget_s <= 0 || secs <= budget_s;
  if (!in_time) v.detail += fmt("; over the %.0f s budget", budget_s);
  const bool ok = v.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s C%d %s: %s [%.1f s]\n", ok ? "PASS" : "FAIL", id, title.c_str(), v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::vector<PairCovariance> firsts_for(const std::vector<DensePair>& pairs, const InitParams& p) {
  std::vector<PairCovariance> out;
  for (const auto& q : pairs) out.push_back(dense_first_layer(q, p));
  return out;
}

// Exponential fit beats power with r^2 > 0.99.
Verdict ordered_rates(const ActivationModel& model, const InitParams& p, const std::vector<DensePair>& pairs) {
  const RateStudy st = rate_study(ArchKind::ffnn, model, p, firsts_for(pairs, p), default_rate_depths());
  const RateFit e = fit_rate(st.depths, st.residual, RateModel::exp);
  const RateFit w = fit_rate(st.depths, st.residual, RateModel::power);
  return {e.r_squared > 0.99 && e.r_squared > w.r_squared,
          fmt("ordered (%.3g,%.4g) exp r2 %.5f vs power r2 %.5f", p.sigma_b, p.sigma_w, e.r_squared, w.r_squared)};
}

// Power exponent in [-1.15, -0.85] and the exp-fit rate shrinking as L_max grows.
Verdict eoc_rates(const ActivationModel& model, const InitParams& p, const std::vector<DensePair>& pairs) {
  const RateStudy st = rate_study(ArchKind::ffnn, model, p, firsts_for(pairs, p), default_rate_depths());
  const RateFit w = fit_rate(st.depths, st.residual, RateModel::power);
  std::vector<double> gammas;
  for (std::size_t n = 8; n <= st.depths.size(); ++n) {
    const std::vector<int> d(st.depths.begin(), st.depths.begin() + n);
    const std::vector<double> r(st.residual.begin(), st.residual.begin() + n);
    gammas.push_back(fit_rate(d, r, RateModel::exp).exponent);
  }
  bool shrinking = true;
  for (std::size_t i = 1; i < gammas.size(); ++i) shrinking = shrinking && gammas[i] < gammas[i - 1];
  const bool band = w.exponent >= -1.15 && w.exponent <= -0.85;
  return {band && shrinking, fmt("eoc power exponent %.4f (r2 %.5f), exp gamma %.3e -> %.3e", w.exponent, w.r_squared,
                                 gammas.front(), gammas.back())};
}

Verdict both(const Verdict& a, const Verdict& b) { return {a.pass && b.pass, a.detail + "; " + b.detail}; }

}  // namespace

int main() {
  const auto relu = ActivationModel::relu();
  const auto tanh = ActivationModel::tanh();

  criterion(1, "ReLU EOC constant 9pi^2/2", 1.0, [&] {
    const ExpansionCheck c = check_expansion(ArchKind::ffnn, relu, {0.0, kSqrt2}, 0.5, 20000);
    return Verdict{std::abs(c.rel_error) < 0.05 && std::abs(c.theoretical - 9 * kPi * kPi / 2) < 1e-12,
                   fmt("l^2(1-c)/kappa - 1 = %+.5f at l = 2e4", c.rel_error)};
  });

  criterion(2, "tanh EOC constant 2/f''(1)", 120.0, [&] {
    const InitParams p{0.2, eoc_curve(tanh, 0.2)};
    const ExpansionCheck c = check_expansion(ArchKind::ffnn, tanh, p, 0.5, 100000);
    return Verdict{std::abs(c.rel_error) < 0.05,
                   fmt("sigma_w %.10f, kappa %.6f, l(1-c)/kappa - 1 = %+.5f at l = 1e5", p.sigma_w, c.theoretical, c.rel_error)};
  });

  criterion(3, "ResNet constant (9pi^2/2)(1+2/sigma_w^2)^2", 0.0, [&] {
    const ExpansionCheck c = check_expansion(ArchKind::resnet_dense, relu, {0.0, kSqrt2}, 0.5, 20000);
    return Verdict{std::abs(c.rel_error) < 0.05 && std::abs(c.theoretical - 18 * kPi * kPi) < 1e-10,
                   fmt("kappa %.6f, l^2(1-c)/kappa - 1 = %+.5f at l = 2e4", c.theoretical, c.rel_error)};
  });

  criterion(4, "scaled ResNet constant 16/(s^2 sigma_w^4)", 60.0, [&] {
    const InitParams p{0.0, 2 * kSqrt2};
    const ExpansionCheck c = check_expansion(ArchKind::scaled_resnet_dense, relu, p, 0.5, 1000000);
    return Verdict{std::abs(c.rel_error) < 0.15,
                   fmt("sigma_w^2 = 8, zeta %.6f, log(l)^2(1-c)/zeta - 1 = %+.5f at l = 1e6", c.theoretical, c.rel_error)};
  });

  const auto pairs = io::synthetic_pairs(10, 10, 11);
  criterion(5, "rate discrimination", 300.0 + 1800.0, [&] {
    const Verdict r = both(ordered_rates(relu, {0.1, 1.41}, pairs), eoc_rates(relu, {0.0, kSqrt2}, pairs));
    const Verdict t = both(ordered_rates(tanh, {0.2, 1.295}, pairs), eoc_rates(tanh, {0.2, eoc_curve(tanh, 0.2)}, pairs));
    return Verdict{r.pass && t.pass, fmt("relu %s: ", r.pass ? "ok" : "fails") + r.detail +
                                         fmt(" | tanh %s: ", t.pass ? "ok" : "fails") + t.detail};
  });

  criterion(6, "ResNet normalization", 0.0, [&] {
    const InitParams p{0.0, kSqrt2};
    std::vector<DensePair> diag;
    for (const auto& q : pairs) diag.push_back({q.x, q.x});
    const RateStudy st = rate_study(ArchKind::resnet_dense, relu, p, firsts_for(diag, p), default_rate_depths());
    const RateFit f = fit_rate(st.depths, st.residual, RateModel::power);
    const KernelTrace t = ntk_resnet_dense(diag.front(), p, 100);
    const double ratio = t.ntk_value(100) / t.ntk_value(99), target = 1 + 0.5 * p.sigma_w * p.sigma_w;
    const bool band = f.exponent >= -1.1 && f.exponent <= -0.9;
    return Verdict{band && std::abs(ratio - target) <= 1e-6,
                   fmt("normalized diagonal exponent %.5f; K^100/K^99 = %.8f vs %.1f (gap %.2e)", f.exponent, ratio, target,
                       std::abs(ratio - target))};
  });

  criterion(7, "finite width against the mean-field NTK", 300.0, [&] {
    const DensePair q = io::synthetic_pairs(5, 1, 3).front();
    const WidthStudy st = width_convergence_study(ArchKind::ffnn, Activation::relu, {0.0, kSqrt2}, q.x, q.xp, 3,
                                                  {64, 128, 256, 512, 1024, 2048, 4096}, 30);
    double at1024 = 0;
    for (const auto& r : st.rows) if (r.width == 1024) at1024 = r.rel_err;
    return Verdict{at1024 < 0.05 && st.slope >= -0.65 && st.slope <= -0.35,
                   fmt("relative error %.4f at width 1024, error slope %.4f", at1024, st.slope)};
  });

  criterion(8, "spectral structure on S^2", 600.0, [&] {
    const int d = 3, k_max = 64;
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(-1.0 + 0.01 * i);
    const std::vector<std::pair<std::string, KernelConfig>> cfgs = {
        {"relu ordered", {ArchKind::ffnn, relu, {1.0, 0.1}, 300, Normalization::none}},
        {"relu eoc", {ArchKind::ffnn, relu, {0.0, kSqrt2}, 300, Normalization::average}},
        {"tanh eoc", {ArchKind::ffnn, tanh, {0.2, eoc_curve(tanh, 0.2)}, 300, Normalization::average}}};
    std::string msg = "sup reconstruction error:";
    bool ok = true;
    std::vector<double> higher;
    for (const auto& [name, cfg] : cfgs) {
      const SpectralDecomposition dec = eigen_trend(cfg, d, {300}, k_max).front();
      const auto g = zonal_profile(cfg, d, grid);
      double err = 0, inner = 0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double e = std::abs(dec.reconstruct(grid[i]) - g[i]);
        err = std::max(err, e);
        if (std::abs(grid[i]) <= 0.99 + 1e-12) inner = std::max(inner, e);
      }
      msg += fmt(" %s %.2e (|t| <= 0.99: %.2e)", name.c_str(), err, inner);
      ok = ok && err < 1e-6;
      higher.push_back(1.0 - dec.normalized()[0]);
    }
    const bool mass = 1.0 - higher[0] > 0.99 && higher[1] > higher[0] && higher[2] > higher[0];
    msg += fmt("; ordered mu0 share %.8f; higher-mode mass ordered %.2e, relu eoc %.2e, tanh eoc %.2e", 1.0 - higher[0],
               higher[0], higher[1], higher[2]);
    return Verdict{ok && mass, msg};
  });

  criterion(9, "closed-form training", 0.0, [&] {
    const Dataset data = io::synthetic_two_class(10, 200, 1);
    const KernelConfig eoc{ArchKind::ffnn, relu, {0.0, kSqrt2}, 3, Normalization::average};
    const TrainingState s = build_gram(data, eoc);
    const double cond = s.min_eig / s.max_eig;
    const double acc = accuracy(evolve(s, data.Z, kInfiniteTime), data.labels);
    const bool acc_ok = cond <= 1e-10 || acc == 1.0;
    // explicit Euler on f' = -(1/N) K (f - Z)
    const double T = 1.0, h = 1e-4, N = data.size();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(data.size(), data.Z.cols());
    for (int i = 0; i < static_cast<int>(T / h + 0.5); ++i) f -= h / N * (s.gram * (f - data.Z));
    const double euler = (evolve(s, data.Z, T) - f).cwiseAbs().maxCoeff();
    std::vector<double> r;
    for (int L : {3, 300}) {
      const TrainingState o = build_gram(data, {ArchKind::ffnn, relu, {1.0, 0.1}, L, Normalization::none});
      r.push_back(o.min_eig / o.max_eig);
    }
    return Verdict{acc_ok && euler < 1e-5 && r[1] <= r[0] / 1e3,
                   fmt("eoc eig ratio %.2e, train accuracy %.3f; |evolve - Euler| %.2e at t = 1; ordered eig ratio L=3 %.2e, L=300 %.2e",
                       cond, acc, euler, r[0], r[1])};
  });

  criterion(10, "conv reduction under translation-invariant inputs", 0.0, [&] {
    const int M = 5, L = 50;
    const Eigen::Vector3d u(0.4, -1.2, 0.9), v(1.1, 0.3, -0.2);
    Eigen::MatrixXd X(3, M), Xp(3, M);
    for (int a = 0; a < M; ++a) X.col(a) = u, Xp.col(a) = v;
    double worst = 0;
    const std::vector<std::pair<ArchKind, ActivationModel>> cases = {
        {ArchKind::cnn, relu}, {ArchKind::cnn, tanh}, {ArchKind::resnet_conv, relu}, {ArchKind::scaled_resnet_conv, relu}};
    for (const auto& [arch, model] : cases) {
      const InitParams p{0.1, 1.25};
      const KernelTrace full = conv_trace(arch, {X, Xp}, model, p, 1, L, false);
      const KernelTrace dense = dense_trace(dense_equivalent(arch), model, p, dense_first_layer({u, v}, p), L);
      for (int l = 1; l <= L; ++l) {
        const Eigen::MatrixXd g = full.grid[l - 1].ntk * std::exp(full.log_scale[l - 1]);
        const double ref = dense.ntk_value(l);
        worst = std::max(worst, (g.array() - ref).abs().maxCoeff() / std::max(1.0, std::abs(ref)));
      }
    }
    return Verdict{worst <= 1e-10, fmt("max grid deviation %.2e over cnn relu/tanh, resnet_conv, scaled_resnet_conv to L = 50", worst)};
  });

  criterion(11, "invariant suites and gradient checks", 0.0, [&] {
    std::vector<CheckResult> all = run_module_invariants();
    for (auto& c : cli::cli_invariants()) all.push_back(c);
    int passed = 0;
    std::string failed;
    for (const auto& c : all) {
      if (c.passed) ++passed;
      else failed += " [" + c.module + ": " + c.name + " (" + c.detail + ")]";
    }
    double worst = 0;
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -0.9, 1.3);
    for (ArchKind a : {ArchKind::ffnn, ArchKind::resnet_dense})
      for (Activation act : {Activation::relu, Activation::tanh})
        worst = std::max(worst, finite_difference_check(sample_net(a, act, {0.2, 1.3}, 4, {8, 8, 8}, 21), x).rel_error);
    const bool ok = passed == static_cast<int>(all.size()) && worst < 1e-5;
    return Verdict{ok, fmt("%d/%d invariants pass, gradient check max rel error %.2e", passed, static_cast<int>(all.size()), worst) +
                           (failed.empty() ? "" : "; failing:" + failed)};
  });

  std::printf("%d criterion line(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
