#include <doctest.h>

#include "deepntk/gaussmath.hpp"
#include "oracles.hpp"

using namespace deepntk;

TEST_SUITE("gaussmath") {
  TEST_CASE("two-point hermite rule") {
    const QuadratureRule r = gauss_hermite(2);
    REQUIRE(r.order() == 2);
    CHECK(r.nodes[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r.nodes[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
  }

  TEST_CASE("order below two is rejected") {
    try {
      gauss_hermite(1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }

  TEST_CASE("order 64 moments") {
    const QuadratureRule r = gauss_hermite(64);
    double m0 = 0, m2 = 0, m4 = 0, m6 = 0;
    for (std::size_t i = 0; i < r.order(); ++i) {
      const double z2 = r.nodes[i] * r.nodes[i];
      m0 += r.weights[i];
      m2 += r.weights[i] * z2;
      m4 += r.weights[i] * z2 * z2;
      m6 += r.weights[i] * z2 * z2 * z2;
    }
    CHECK(std::abs(m0 - 1) < 1e-12);
    CHECK(std::abs(m2 - 1) < 1e-12);
    CHECK(std::abs(m4 - 3) < 1e-10);
    CHECK(std::abs(m6 - 15) < 1e-9);
  }

  TEST_CASE("higher orders stay accurate") {
    for (int n : {128, 256, 512}) {
      const QuadratureRule r = gauss_hermite(n);
      double m0 = 0, m2 = 0;
      for (std::size_t i = 0; i < r.order(); ++i) {
        m0 += r.weights[i];
        m2 += r.weights[i] * r.nodes[i] * r.nodes[i];
        CHECK(r.weights[i] >= 0);  // far tails underflow
      }
      CHECK(std::abs(m0 - 1) < 1e-12);
      CHECK(std::abs(m2 - 1) < 1e-11);
    }
  }

  TEST_CASE("jacobi rule integrates (1-t^2)^a t^2j") {
    for (double a : {0.0, 0.5, 1.0, 3.5}) {
      const QuadratureRule r = gauss_jacobi(40, a);
      for (int j : {0, 1, 3}) {
        double s = 0;
        for (std::size_t i = 0; i < r.order(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * j);
        // Beta(j + 1/2, a + 1)
        const double want = std::tgamma(j + 0.5) * std::tgamma(a + 1) / std::tgamma(j + a + 1.5);
        CHECK(std::abs(s - want) < 1e-12 * want);
      }
    }
  }

  TEST_CASE("expect1 closed-form cases") {
    CHECK(std::abs(expect1([](double u) { return u; }, 4.0, default_hermite())) < 1e-14);
    CHECK(expect1([](double u) { return u * u; }, 4.0, default_hermite()) == doctest::Approx(4.0).epsilon(1e-13));
  }

  TEST_CASE("expect1 of tanh^2 agrees with Monte-Carlo") {
    const auto g = [](double u) { return std::tanh(u) * std::tanh(u); };
    const double v = expect1(g, 1.0, default_hermite());
    const oracle::Estimate mc = oracle::mc_single(g, 1.0, 1000000, 42);
    CHECK(std::abs(v - mc.mean) < 3 * mc.se);
    // tanh has poles at i pi/2, so 64 nodes stop near 1e-9 at unit variance
    CHECK(std::abs(v - oracle::simpson_normal(g, 1.0)) < 1e-8);
    CHECK(std::abs(expect1(g, 1.0, gauss_hermite(128)) - oracle::simpson_normal(g, 1.0)) < 1e-12);
  }

  TEST_CASE("expect2 closed-form cases") {
    const auto id = [](double u) { return u; };
    CHECK(expect2(id, 1.0, 1.0, 0.5, default_hermite()) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(expect2(id, 1.0, 1.0, 1.0, default_hermite()) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(expect2(id, 2.0, 8.0, -0.25, default_hermite()) == doctest::Approx(-1.0).epsilon(1e-13));
  }

  TEST_CASE("expect2 of tanh agrees with Monte-Carlo") {
    const auto th = [](double u) { return std::tanh(u); };
    const double v = expect2(th, 1.0, 1.0, 0.7, default_hermite());
    const oracle::Estimate mc =
        oracle::mc_pair([](double a, double b) { return std::tanh(a) * std::tanh(b); }, 1.0, 1.0, 0.7, 1000000, 7);
    CHECK(std::abs(v - mc.mean) < 3 * mc.se);
  }

  TEST_CASE("correlation clamping") {
    const auto id = [](double u) { return u; };
    CHECK(expect2(id, 1.0, 1.0, 1.0 + 5e-13, default_hermite()) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(clamp_correlation(-1.0 - 5e-13) == -1.0);
    try {
      expect2(id, 1.0, 1.0, 1.0 + 1e-9, default_hermite());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }

  TEST_CASE("non-finite integrand is a numeric error") {
    try {
      expect1([](double u) { return 1.0 / (u - u); }, 1.0, default_hermite());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::numeric);
    }
  }

  TEST_CASE("expect2 symmetry and diagonal") {
    const auto th = [](double u) { return std::tanh(u); };
    for (double c : {-0.9, 0.1, 0.6}) {
      CHECK(std::abs(expect2(th, 0.3, 1.7, c, default_hermite()) - expect2(th, 1.7, 0.3, c, default_hermite())) <=
            1e-12);
    }
    const double diag = expect2(th, 0.8, 0.8, 1.0, default_hermite());
    CHECK(std::abs(diag - expect1([](double u) { return std::tanh(u) * std::tanh(u); }, 0.8, default_hermite())) <
          1e-10);
  }

  TEST_CASE("split quadrature handles the ReLU kink") {
    for (double c : {-0.95, -0.3, 0.0, 0.4, 0.99}) {
      const double v = expect2_split(+[](double u) { return u > 0 ? u : 0.0; },
                                     +[](double u) { return u > 0 ? u : 0.0; }, 1.3, 0.6, c);
      CHECK(std::abs(v - oracle::relu_pair(1.3, 0.6, c * std::sqrt(1.3 * 0.6))) < 1e-12);
    }
  }
}
