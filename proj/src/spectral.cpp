#include "deepntk/spectral.hpp"

#include <climits>
#include <cmath>
#include <numbers>

#include "deepntk/parallel.hpp"

namespace deepntk {

long long harmonic_count(int d, int k) {
  require(d >= 3, "harmonic_count: d must be >= 3");
  require(k >= 0, "harmonic_count: k must be >= 0");
  if (k == 0) return 1;
  // C(k+d-3, d-2) built incrementally; each partial product is an integer.
  const int n = k + d - 3, r = d - 2;
  __int128 binom = 1;
  for (int i = 1; i <= r; ++i) {
    binom = binom * (n - r + i) / i;
    if (binom > static_cast<__int128>(LLONG_MAX)) fail(ErrorKind::numeric, "harmonic_count overflow");
  }
  const __int128 num = static_cast<__int128>(2 * k + d - 2) * binom;
  if (num % k != 0) fail(ErrorKind::numeric, "harmonic_count: non-integer result");
  const __int128 out = num / k;
  if (out > static_cast<__int128>(LLONG_MAX)) fail(ErrorKind::numeric, "harmonic_count overflow");
  return static_cast<long long>(out);
}

std::vector<double> legendre_all(int d, int k_max, double t) {
  require(d >= 3, "legendre: d must be >= 3");
  require(k_max >= 0, "legendre: k must be >= 0");
  std::vector<double> p(k_max + 1);
  p[0] = 1.0;
  if (k_max >= 1) p[1] = t;
  for (int k = 1; k < k_max; ++k) {
    p[k + 1] = ((2.0 * k + d - 2.0) * t * p[k] - k * p[k - 1]) / (k + d - 2.0);
  }
  return p;
}

double legendre_poly(int d, int k, double t) { return legendre_all(d, k, t).back(); }

double sphere_area(int m) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
}

double SpectralDecomposition::reconstruct(double t) const {
  const auto p = legendre_all(d, static_cast<int>(mu.size()) - 1, t);
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) s += mu[k] * multiplicities[k] * p[k];
  return s;
}

std::vector<double> SpectralDecomposition::normalized() const {
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) total += mu[k] * multiplicities[k];
  std::vector<double> out(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) out[k] = mu[k] * multiplicities[k] / total;
  return out;
}

QuadratureRule sphere_rule(int d, int nodes) {
  require(d >= 3, "sphere_rule: d must be >= 3");
  return gauss_jacobi(nodes, 0.5 * (d - 3));
}

PairCovariance sphere_first_layer(const InitParams& params, int d, double t) {
  require(d >= 3, "sphere inputs need d >= 3");
  require(std::abs(t) <= 1.0 + kCorrelationSlack, "t outside [-1, 1]");
  t = std::clamp(t, -1.0, 1.0);
  const double sb2 = params.sigma_b * params.sigma_b, sw2 = params.sigma_w * params.sigma_w;
  const double q = sb2 + sw2 / d;
  return PairCovariance{q, q, sw2 * (1.0 - t) / d};
}

std::vector<std::vector<double>> zonal_profiles(const KernelConfig& config, int d,
                                                const std::vector<int>& depths,
                                                const std::vector<double>& grid) {
  std::vector<std::vector<double>> out(depths.size(), std::vector<double>(grid.size()));
  parallel_for(grid.size(), [&](std::size_t j) {
    const auto v = kernel_values_at(config, sphere_first_layer(config.params, d, grid[j]), depths);
    for (std::size_t i = 0; i < depths.size(); ++i) out[i][j] = v[i];
  });
  return out;
}

std::vector<double> zonal_profile(const KernelConfig& config, int d,
                                  const std::vector<double>& grid) {
  return zonal_profiles(config, d, {config.depth}, grid).front();
}

SpectralDecomposition decompose(const std::vector<double>& profile, const QuadratureRule& rule,
                                int d, int k_max) {
  require(d >= 3, "decompose: d must be >= 3");
  require(rule.kind == QuadratureKind::jacobi &&
              std::abs(rule.alpha_exponent - 0.5 * (d - 3)) < 1e-12,
          "decompose: rule must be Gauss-Jacobi with exponent (d-3)/2");
  require(profile.size() == rule.order(), "decompose: profile must be sampled on the rule nodes");
  require(k_max >= 0, "decompose: k_max must be >= 0");
  if (k_max >= static_cast<int>(rule.order())) {
    fail(ErrorKind::resolution, "k_max exceeds the degree resolvable by the quadrature");
  }
  const double ratio = sphere_area(d - 1) / sphere_area(d);
  SpectralDecomposition dec;
  dec.d = d;
  dec.mu.assign(k_max + 1, 0.0);
  dec.multiplicities.resize(k_max + 1);
  for (int k = 0; k <= k_max; ++k) dec.multiplicities[k] = static_cast<double>(harmonic_count(d, k));
  for (std::size_t i = 0; i < rule.order(); ++i) {
    const auto p = legendre_all(d, k_max, rule.nodes[i]);
    for (int k = 0; k <= k_max; ++k) dec.mu[k] += rule.weights[i] * profile[i] * p[k];
  }
  for (double& m : dec.mu) m *= ratio;
  return dec;
}

std::string kernel_id(const KernelConfig& config) {
  return to_string(config.arch) + "/" + to_string(config.activation.kind) + "/" +
         to_string(config.norm);
}

std::vector<SpectralDecomposition> eigen_trend(const KernelConfig& config, int d,
                                               const std::vector<int>& depths, int k_max,
                                               int nodes) {
  const QuadratureRule rule = sphere_rule(d, nodes);
  const auto profiles = zonal_profiles(config, d, depths, rule.nodes);
  std::vector<SpectralDecomposition> out;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    SpectralDecomposition dec = decompose(profiles[i], rule, d, k_max);
    dec.depth = depths[i];
    dec.kernel_id = kernel_id(config);
    out.push_back(std::move(dec));
  }
  return out;
}

}  // namespace deepntk
