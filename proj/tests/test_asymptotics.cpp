#include <doctest.h>

#include "deepntk/asymptotics.hpp"
#include "deepntk/io/dataset.hpp"
#include "oracles.hpp"

using namespace deepntk;

namespace {

const double kSqrt2 = std::sqrt(2.0);

std::vector<int> geometric_depths(int from, int count) {
  std::vector<int> d;
  for (int i = 0; i < count; ++i) d.push_back(from << i);
  return d;
}

template <class F>
std::vector<double> sample(const std::vector<int>& depths, F f) {
  std::vector<double> r;
  for (int L : depths) r.push_back(f(static_cast<double>(L)));
  return r;
}

// ReLU correlation map iterated in long double
long double relu_corr(long double c) {
  const long double pi = 3.14159265358979323846264338327950288L;
  return (c * std::asin(c) + std::sqrt((1 - c) * (1 + c))) / pi + c / 2;
}

void expect_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_SUITE("asymptotics") {
  TEST_CASE("fit_rate recovers exact laws") {
    const auto d = geometric_depths(4, 9);
    const RateFit p = fit_rate(d, sample(d, [](double L) { return 3.0 / L; }), RateModel::power);
    CHECK(p.exponent == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(p.prefactor == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(p.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.L_min == 4);
    CHECK(p.L_max == 1024);

    std::vector<int> lin;
    for (int L = 2; L <= 40; L += 2) lin.push_back(L);
    const RateFit e = fit_rate(lin, sample(lin, [](double L) { return 0.7 * std::exp(-0.3 * L); }), RateModel::exp);
    CHECK(e.exponent == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(e.prefactor == doctest::Approx(0.7).epsilon(1e-10));

    const RateFit pl = fit_rate(d, sample(d, [](double L) { return 2.0 * std::log(L) / L; }), RateModel::power_log);
    CHECK(pl.exponent == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pl.prefactor == doctest::Approx(2.0).epsilon(1e-10));

    const RateFit il = fit_rate(d, sample(d, [](double L) { return 5.0 / std::pow(std::log(L), 2); }), RateModel::inv_log);
    CHECK(il.exponent == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(il.prefactor == doctest::Approx(5.0).epsilon(1e-10));
  }

  TEST_CASE("fit_rate rejects bad input") {
    const auto d = geometric_depths(4, 9);
    auto r = sample(d, [](double L) { return 1.0 / L; });
    expect_kind(ErrorKind::invalid_argument, [&] { fit_rate({4, 8, 16}, {1, 0.5, 0.25}, RateModel::power); });
    expect_kind(ErrorKind::invalid_argument, [&] { fit_rate(d, {1, 2}, RateModel::power); });
    r[3] = 0.0;
    expect_kind(ErrorKind::invalid_argument, [&] { fit_rate(d, r, RateModel::power); });
    expect_kind(ErrorKind::invalid_argument, [&] { parse_rate_model("cubic"); });
    CHECK(parse_rate_model(to_string(RateModel::inv_log)) == RateModel::inv_log);
  }

  TEST_CASE("expansion constants") {
    const double pi = oracle::pi;
    const ExpansionConstants k = expansion_constants(ActivationModel::relu(), {0.0, kSqrt2});
    // constants quoted with the expansions
    CHECK(k.kappa_relu == doctest::Approx(9 * pi * pi / 2).epsilon(1e-15));
    CHECK(k.s == doctest::Approx(2 * kSqrt2 / (3 * pi)).epsilon(1e-15));
    CHECK(k.b == doctest::Approx(kSqrt2 / (30 * pi)).epsilon(1e-15));
    CHECK(k.kappa_resnet == doctest::Approx(9 * pi * pi / 2 * 4).epsilon(1e-14));
    CHECK(k.zeta_scaled == doctest::Approx(16 / (k.s * k.s * 4)).epsilon(1e-14));
    CHECK(std::isnan(k.kappa_tanh));
    // kappa = 2 / s^2 from 1 - c ~ (2 / (s l))^2
    CHECK(k.kappa_relu == doctest::Approx(4 / (k.s * k.s) * 1.0).epsilon(1e-14));
  }

  TEST_CASE("tanh constants from an independent second derivative") {
    const auto th = ActivationModel::tanh();
    const InitParams prm{0.2, eoc_curve(th, 0.2)};
    const double q = variance_fixed_point(th, prm);
    const auto d2 = [](double x) {
      const double t = std::tanh(x);
      return -2 * t * (1 - t * t);
    };
    const double f2 = prm.sigma_w * prm.sigma_w * q * oracle::simpson_normal([&](double u) { return d2(u) * d2(u); }, q);
    const ExpansionConstants k = expansion_constants(th, prm);
    CHECK(k.kappa_tanh == doctest::Approx(2 / f2).epsilon(1e-8));
    CHECK(std::isfinite(k.zeta_tanh));
    CHECK(expansion_constant(ArchKind::ffnn, th, prm) == k.kappa_tanh);
  }

  TEST_CASE("expansions need the edge of chaos or a ReLU residual net") {
    expect_kind(ErrorKind::unsupported, [] { theoretical_correlation(ArchKind::ffnn, ActivationModel::relu(), {1.0, 0.1}, 10); });
    expect_kind(ErrorKind::unsupported, [] { theoretical_correlation(ArchKind::resnet_dense, ActivationModel::tanh(), {0.0, 1.0}, 10); });
    expect_kind(ErrorKind::invalid_argument, [] { theoretical_correlation(ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2}, 1); });
    const double pi = oracle::pi, kap = 9 * pi * pi / 2;
    CHECK(theoretical_correlation(ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2}, 100) ==
          doctest::Approx(1 - kap / 1e4 + 3 * std::sqrt(kap) * std::log(100.0) / 1e6).epsilon(1e-14));
    CHECK(theoretical_correlation(ArchKind::resnet_dense, ActivationModel::relu(), {0.0, 2.0}, 1000) ==
          doctest::Approx(1 - kap * 2.25 / 1e6).epsilon(1e-14));
    CHECK(expansion_law(ArchKind::scaled_resnet_conv, ActivationModel::relu()) == ExpansionLaw::inverse_log_square);
    CHECK(expansion_law(ArchKind::cnn, ActivationModel::tanh()) == ExpansionLaw::inverse);
  }

  TEST_CASE("ReLU correlation gaps match a long-double iteration") {
    const std::vector<int> depths{2, 10, 100, 1000, 5000};
    const auto g = correlation_gaps(ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2}, 0.5, depths);
    long double c = 0.5L;
    int l = 1;
    for (std::size_t i = 0; i < depths.size(); ++i) {
      while (l < depths[i]) c = relu_corr(c), ++l;
      CHECK(g[i] == doctest::Approx(static_cast<double>(1 - c)).epsilon(1e-6));
    }
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
  }

  TEST_CASE("ResNet correlation gaps match the covariance oracle") {
    const double sw = 1.3, sw2 = sw * sw;
    const auto g = correlation_gaps(ArchKind::resnet_dense, ActivationModel::relu(), {0.0, sw}, 0.2, {5, 50, 400});
    double a = 1, c = 0.2;
    std::vector<double> ref;
    for (int l = 2; l <= 400; ++l) {
      const double na = a + sw2 * oracle::relu_pair(a, a, a);
      c += sw2 * oracle::relu_pair(a, a, c);
      a = na;
      if (l == 5 || l == 50 || l == 400) ref.push_back(1 - c / a);
    }
    for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }

  TEST_CASE("leading-order expansions at depth") {
    const ExpansionCheck relu = check_expansion(ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2}, 0.5, 10000);
    CHECK(std::abs(relu.rel_error) < 0.01);
    CHECK(relu.law == ExpansionLaw::inverse_square);
    const ExpansionCheck res = check_expansion(ArchKind::resnet_dense, ActivationModel::relu(), {0.0, kSqrt2}, 0.5, 10000);
    CHECK(std::abs(res.rel_error) < 0.02);
    const auto th = ActivationModel::tanh();
    const ExpansionCheck t = check_expansion(ArchKind::ffnn, th, {0.2, eoc_curve(th, 0.2)}, 0.5, 2000);
    CHECK(t.law == ExpansionLaw::inverse);
    CHECK(std::abs(t.rel_error) < 0.05);
  }

  TEST_CASE("check_expansion applies the law's scale") {
    const auto v = check_expansion({10, 100}, {0.5, 0.005}, ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2});
    const double kap = 9 * oracle::pi * oracle::pi / 2;
    CHECK(v[0].empirical == doctest::Approx(50.0));
    CHECK(v[1].rel_error == doctest::Approx(50.0 / kap - 1));
  }

  TEST_CASE("edge-of-chaos ReLU converges polynomially") {
    std::vector<PairCovariance> firsts;
    for (const DensePair& p : io::synthetic_pairs(10, 5, 11)) firsts.push_back(dense_first_layer(p, {0.0, kSqrt2}));
    const RateStudy st = rate_study(ArchKind::ffnn, ActivationModel::relu(), {0.0, kSqrt2}, firsts, default_rate_depths());
    CHECK(st.norm == Normalization::average);
    CHECK(st.theory_shape == "log(L)/L");
    CHECK(st.theory.front() == st.residual.front());
    const RateFit f = fit_rate(st.depths, st.residual, RateModel::power);
    CHECK(f.exponent > -1.15);
    CHECK(f.exponent < -0.85);
    for (std::size_t i = 0; i < firsts.size(); ++i) {
      CHECK(st.limits[i] == doctest::Approx(0.25 * std::sqrt(firsts[i].qx * firsts[i].qxp)).epsilon(1e-14));
    }
  }

  TEST_CASE("ordered ReLU converges exponentially") {
    const InitParams prm{0.1, 1.41};
    std::vector<PairCovariance> firsts;
    for (const DensePair& p : io::synthetic_pairs(10, 3, 11)) firsts.push_back(dense_first_layer(p, prm));
    const RateStudy st = rate_study(ArchKind::ffnn, ActivationModel::relu(), prm, firsts, default_rate_depths());
    CHECK(st.norm == Normalization::none);
    const RateFit e = fit_rate(st.depths, st.residual, RateModel::exp);
    const RateFit p = fit_rate(st.depths, st.residual, RateModel::power);
    CHECK(e.r_squared > p.r_squared);
    CHECK(e.r_squared > 0.99);
    // decay rate against -log chi at the fixed point
    const double chi1 = chi(ActivationModel::relu(), prm, variance_fixed_point(ActivationModel::relu(), prm));
    CHECK(e.exponent == doctest::Approx(-std::log(chi1)).epsilon(0.2));
  }

  TEST_CASE("default depth grid") {
    const auto d = default_rate_depths();
    REQUIRE(d.size() == 9);
    CHECK(d.front() == 32);
    CHECK(d.back() == 8192);
  }
}
