#include <doctest.h>

#include "deepntk/phase.hpp"
#include "oracles.hpp"

using namespace deepntk;

namespace {

double sech2(double x) {
  const double t = std::tanh(x);
  return 1 - t * t;
}

// Tanh fixed-point variance and chi by plain iteration with Simpson integrals.
double ref_q(double sb, double sw) {
  double q = 1.0;
  for (int i = 0; i < 2000; ++i) {
    const double next = sb * sb + sw * sw * oracle::simpson_normal([](double u) { return std::tanh(u) * std::tanh(u); }, q, 4000);
    if (std::abs(next - q) < 1e-15) return next;
    q = next;
  }
  return q;
}

double ref_chi(double sb, double sw) {
  const double q = ref_q(sb, sw);
  return sw * sw * oracle::simpson_normal([](double u) { return sech2(u) * sech2(u); }, q, 4000);
}

double ref_eoc(double sb) {
  double lo = 1.0, hi = 2.0;
  for (int i = 0; i < 45; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ref_chi(sb, mid) < 1 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("phase") {
  TEST_CASE("ReLU fixed variance in the ordered phase") {
    CHECK(variance_fixed_point(ActivationModel::relu(), {1.0, 0.1}) == doctest::Approx(1 / (1 - 0.005)).epsilon(1e-14));
  }

  TEST_CASE("ReLU edge of chaos keeps the input variance") {
    for (double v : {0.25, 1.0, 9.0}) {
      CHECK(variance_fixed_point(ActivationModel::relu(), {0.0, std::sqrt(2.0)}, v) == v);
    }
  }

  TEST_CASE("ReLU variance diverges for large weights") {
    try {
      variance_fixed_point(ActivationModel::relu(), {0.1, 1.5});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::divergence);
    }
  }

  TEST_CASE("tanh fixed variance solves the variance equation") {
    const auto th = ActivationModel::tanh();
    const double q = variance_fixed_point(th, {0.2, 1.298});
    const double resid =
        0.04 + 1.298 * 1.298 * oracle::simpson_normal([](double u) { return std::tanh(u) * std::tanh(u); }, q) - q;
    CHECK(std::abs(resid) < 1e-10);
    CHECK(q == doctest::Approx(ref_q(0.2, 1.298)).epsilon(1e-9));
  }

  TEST_CASE("classify ReLU points") {
    const PhaseReport o = classify(ActivationModel::relu(), {1.0, 0.1});
    CHECK(o.phase == Phase::ordered);
    CHECK(o.chi == doctest::Approx(0.005).epsilon(1e-14));
    const PhaseReport e = classify(ActivationModel::relu(), {0.0, std::sqrt(2.0)});
    CHECK(e.phase == Phase::eoc);
    CHECK(e.chi == 1.0);
    const PhaseReport c = classify(ActivationModel::relu(), {0.0, 1.6});
    CHECK(c.phase == Phase::chaotic);
    CHECK(std::isinf(c.q_fixed));
  }

  TEST_CASE("tanh chi agrees with an independent solve") {
    const auto th = ActivationModel::tanh();
    for (InitParams p : {InitParams{0.2, 1.298}, InitParams{0.5, 1.2}, InitParams{0.1, 2.0}}) {
      CHECK(classify(th, p).chi == doctest::Approx(ref_chi(p.sigma_b, p.sigma_w)).epsilon(1e-9));
    }
  }

  TEST_CASE("the quoted tanh point sits just below the edge of chaos") {
    // chi(0.2, 1.298) is about 0.9966: within 4e-3 of one, classified ordered at tolerance 1e-8
    const PhaseReport r = classify(ActivationModel::tanh(), {0.2, 1.298});
    CHECK(std::abs(r.chi - 1) < 4e-3);
    CHECK(r.chi < 1);
    CHECK(classify(ActivationModel::tanh(), {0.2, 1.298}, 4e-3).phase == Phase::eoc);
  }

  TEST_CASE("eoc_curve at sigma_b = 0.2") {
    const auto th = ActivationModel::tanh();
    const double sw = eoc_curve(th, 0.2);
    CHECK(sw == doctest::Approx(ref_eoc(0.2)).epsilon(1e-8));
    // quoted 1.298 vs the solved 1.3041
    CHECK(std::abs(sw - 1.298) < 6.5e-3);
    const PhaseReport r = classify(th, {0.2, sw});
    CHECK(r.phase == Phase::eoc);
    CHECK(std::abs(r.chi - 1) < 1e-10);
  }

  TEST_CASE("eoc_curve without bias is sigma_w = 1") {
    const auto th = ActivationModel::tanh();
    CHECK(std::abs(eoc_curve(th, 0.0) - 1.0) < 1e-6);
    const PhaseReport r = classify(th, {0.0, 0.9});
    CHECK(r.degenerate);
    CHECK(r.chi == doctest::Approx(0.81).epsilon(1e-12));
  }

  TEST_CASE("eoc_curve round trip over sigma_b") {
    const auto th = ActivationModel::tanh();
    for (double sb : {0.05, 0.5, 1.0, 2.0}) {
      const double sw = eoc_curve(th, sb);
      CHECK(classify(th, {sb, sw}).phase == Phase::eoc);
    }
  }

  TEST_CASE("chi increases with sigma_w") {
    const auto th = ActivationModel::tanh();
    for (double sb : {0.0, 0.2, 0.7}) {
      double prev = -1;
      for (double sw = 0.3; sw < 3.0; sw += 0.1) {
        const double c = classify(th, {sb, sw}).chi;
        CHECK(c > prev);
        prev = c;
      }
    }
  }

  TEST_CASE("ordered ReLU variances converge geometrically") {
    const auto relu = ActivationModel::relu();
    const InitParams p{0.5, 1.2};
    const double qs = variance_fixed_point(relu, p);
    for (double q0 : {1e-3, 1e3}) {
      double q = q0;
      int n = 0;
      while (std::abs(q - qs) >= 1e-9 && n < 5000) {
        const double next = variance_map(relu, p, q);
        if (std::abs(q - qs) > 1e-6) CHECK(std::abs(next - qs) / std::abs(q - qs) < 1.0);
        q = next;
        ++n;
      }
      CHECK(n < 5000);
    }
  }

  TEST_CASE("invalid parameters") {
    try {
      classify(ActivationModel::relu(), {0.0, 0.0});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }
}
