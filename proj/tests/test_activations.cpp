#include <doctest.h>

#include "deepntk/activations.hpp"
#include "deepntk/phase.hpp"
#include "oracles.hpp"

using namespace deepntk;

namespace {

double relu_f_ref(double c) { return (c * std::asin(c) + std::sqrt(1 - c * c)) / oracle::pi + c / 2; }

double dtanh(double x) {
  const double t = std::tanh(x);
  return 1 - t * t;
}

}  // namespace

TEST_SUITE("activations") {
  TEST_CASE("relu_f at the endpoints and zero") {
    CHECK(relu_f(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(relu_f(0.0) == doctest::Approx(1.0 / oracle::pi).epsilon(1e-15));
    CHECK(std::abs(relu_f(-1.0)) < 1e-15);
    for (double c = -0.95; c < 0.96; c += 0.05) CHECK(relu_f(c) == doctest::Approx(relu_f_ref(c)).epsilon(1e-14));
  }

  TEST_CASE("relu_f_prime values") {
    CHECK(relu_f_prime(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(relu_f_prime(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(relu_f_prime(-1.0)) < 1e-15);
    for (double c : {-0.7, 0.2, 0.8}) {
      const double fd = (relu_f_ref(c + 1e-6) - relu_f_ref(c - 1e-6)) / 2e-6;
      CHECK(relu_f_prime(c) == doctest::Approx(fd).epsilon(1e-8));
    }
  }

  TEST_CASE("gap form near c = 1 follows the three-halves expansion") {
    // 1 - f(1 - g) = g - s g^{3/2} - b g^{5/2} - e g^{7/2} + O(g^{9/2}); e from integrating
    // f''(1 - u) = (1 + u/4 + 3u^2/32 + ...) / (pi sqrt(2u)) twice
    const double s = 2 * std::sqrt(2.0) / (3 * oracle::pi), b = std::sqrt(2.0) / (30 * oracle::pi),
                 e = 3 / (280 * oracle::pi * std::sqrt(2.0));
    for (double g : {1e-12, 1e-8, 1e-5, 1e-3}) {
      const double want = g - s * std::pow(g, 1.5) - b * std::pow(g, 2.5) - e * std::pow(g, 3.5);
      CHECK(std::abs(relu_one_minus_f(g) - want) <= 1e-14 * g + 1e-3 * std::pow(g, 4.5));
      CHECK(relu_one_minus_f_prime(g) == doctest::Approx(1 - relu_f_prime(1 - g)).epsilon(1e-6));
    }
    for (double g : {0.05, 0.5, 1.2, 2.0}) {
      CHECK(relu_one_minus_f(g) == doctest::Approx(1 - relu_f_ref(1 - g)).epsilon(1e-13));
    }
  }

  TEST_CASE("tanh_f is one at c = 1 for fixed-point maps") {
    const auto th = ActivationModel::tanh();
    for (InitParams p : {InitParams{0.2, 1.298}, InitParams{0.5, 2.0}, InitParams{1.0, 0.1}}) {
      CHECK(std::abs(tanh_f(correlation_map(th, p), 1.0) - 1.0) < 1e-8);
    }
  }

  TEST_CASE("tanh_f vanishes at c = 0 without bias") {
    const auto th = ActivationModel::tanh();
    const CorrelationMap m = correlation_map(th, {0.0, 1.5});
    CHECK(m.q > 0);
    CHECK(std::abs(tanh_f(m, 0.0)) < 1e-14);
  }

  TEST_CASE("tanh_f agrees with Monte-Carlo") {
    const auto th = ActivationModel::tanh();
    const CorrelationMap m = correlation_map(th, {0.2, 1.298});
    const oracle::Estimate mc = oracle::mc_pair([](double a, double b) { return std::tanh(a) * std::tanh(b); }, m.q,
                                                m.q, 0.5, 1000000, 99);
    const double scale = m.sigma_w * m.sigma_w / m.q;
    const double want = (m.sigma_b * m.sigma_b) / m.q + scale * mc.mean;
    CHECK(std::abs(tanh_f(m, 0.5) - want) < 3 * scale * mc.se);
  }

  TEST_CASE("tanh_f derivatives") {
    const auto th = ActivationModel::tanh();
    const double sw = eoc_curve(th, 0.2);
    const CorrelationMap eoc = correlation_map(th, {0.2, sw});
    CHECK(std::abs(tanh_f_deriv(eoc, 1.0, 1) - 1.0) < 1e-6);
    CHECK(tanh_f_deriv(eoc, 1.0, 2) > 0);

    const CorrelationMap m = correlation_map(th, {0.3, 1.6});
    for (double c : {-0.4, 0.3, 0.8}) {
      const double h = 1e-5;
      const double fd1 = (tanh_f(m, c + h) - tanh_f(m, c - h)) / (2 * h);
      CHECK(std::abs(tanh_f_deriv(m, c, 1) - fd1) < 1e-6);
      const double fd2 = (tanh_f_deriv(m, c + h, 1) - tanh_f_deriv(m, c - h, 1)) / (2 * h);
      CHECK(std::abs(tanh_f_deriv(m, c, 2) - fd2) < 1e-6);
      const double fd3 = (tanh_f_deriv(m, c + h, 2) - tanh_f_deriv(m, c - h, 2)) / (2 * h);
      CHECK(std::abs(tanh_f_deriv(m, c, 3) - fd3) < 1e-5);
    }
    // f''(1) = sigma_w^2 q E[phi''(sqrt(q) Z)^2]
    const auto d2 = [](double x) { return -2 * std::tanh(x) * dtanh(x); };
    const double want = m.sigma_w * m.sigma_w * m.q *
                        oracle::simpson_normal([&](double u) { return d2(u) * d2(u); }, m.q);
    CHECK(tanh_f_deriv(m, 1.0, 2) == doctest::Approx(want).epsilon(1e-9));
  }

  TEST_CASE("tanh gap form matches the direct map") {
    const auto th = ActivationModel::tanh();
    const CorrelationMap m = correlation_map(th, {0.2, 1.3});
    for (double g : {0.5, 0.1, 0.01}) {
      CHECK(tanh_one_minus_f(m, g) == doctest::Approx(1 - tanh_f(m, 1 - g)).epsilon(1e-9));
    }
    // small gaps: f'(1) g is the leading term
    const double g = 1e-9;
    CHECK(tanh_one_minus_f(m, g) == doctest::Approx(tanh_f_deriv(m, 1.0, 1) * g).epsilon(1e-6));
  }

  TEST_CASE("ReLU covariance step on the edge of chaos keeps equal covariances") {
    for (double v : {0.3, 1.0, 7.0}) {
      const CovarianceTriple t = covariance_step(ActivationModel::relu(), 0.0, std::sqrt(2.0), v, v, v);
      CHECK(t.qx == doctest::Approx(v).epsilon(1e-14));
      CHECK(t.qxp == doctest::Approx(v).epsilon(1e-14));
      CHECK(t.qcov == doctest::Approx(v).epsilon(1e-14));
    }
  }

  TEST_CASE("ordered ReLU iteration reaches the fixed variance") {
    for (double q0 : {1e-3, 1.0, 50.0}) {
      double qx = q0, qp = 2 * q0, qc = 0.5 * q0;
      for (int i = 0; i < 200; ++i) {
        const CovarianceTriple t = covariance_step(ActivationModel::relu(), 1.0, 0.1, qx, qp, qc);
        qx = t.qx, qp = t.qxp, qc = t.qcov;
      }
      CHECK(qx == doctest::Approx(1 / 0.995).epsilon(1e-12));
      CHECK(qp == doctest::Approx(1 / 0.995).epsilon(1e-12));
    }
  }

  TEST_CASE("ReLU covariance step matches the arc-cosine formula") {
    for (auto [a, b, c] : {std::tuple{1.0, 2.0, 0.3}, std::tuple{0.5, 0.5, -0.4}, std::tuple{3.0, 0.2, 0.7}}) {
      const CovarianceTriple t = covariance_step(ActivationModel::relu(), 0.4, 1.3, a, b, c);
      CHECK(t.qcov == doctest::Approx(0.16 + 1.69 * oracle::relu_pair(a, b, c)).epsilon(1e-13));
      CHECK(t.qx == doctest::Approx(0.16 + 1.69 * a / 2).epsilon(1e-14));
    }
  }

  TEST_CASE("tanh covariance step matches a wide random layer") {
    // one step from (1, 1, 0.5); each of 1e5 neurons contributes one sample
    const double sb = 0.2, sw = 1.3;
    const oracle::Estimate mc = oracle::mc_pair([](double a, double b) { return std::tanh(a) * std::tanh(b); }, 1.0,
                                                1.0, 0.5, 100000, 5);
    const CovarianceTriple t = covariance_step(ActivationModel::tanh(), sb, sw, 1.0, 1.0, 0.5);
    CHECK(std::abs(t.qcov - (sb * sb + sw * sw * mc.mean)) < 3 * sw * sw * mc.se);
  }

  TEST_CASE("covariance step rejects nonpositive variances") {
    try {
      covariance_step(ActivationModel::relu(), 0.0, 1.0, 0.0, 1.0, 0.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }

  TEST_CASE("propagated pairs respect Cauchy-Schwarz") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 4.0), c(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const double qx = u(rng), qp = u(rng), cc = c(rng);
      const auto model = i % 3 ? ActivationModel::relu() : ActivationModel::tanh();
      const CovarianceTriple t = covariance_step(model, 0.3, 1.4, qx, qp, cc * std::sqrt(qx * qp));
      CHECK(t.qcov * t.qcov <= t.qx * t.qxp + 1e-10);
    }
  }

  TEST_CASE("swapping the pair leaves the step unchanged") {
    const PairCovariance a = PairCovariance::from_covariances(0.7, 1.9, 0.4);
    const PairCovariance b = PairCovariance::from_covariances(1.9, 0.7, 0.4);
    for (const auto& model : {ActivationModel::relu(), ActivationModel::tanh()}) {
      const LayerMoments ma = propagate(model, 0.1, 1.2, a), mb = propagate(model, 0.1, 1.2, b);
      CHECK(ma.block.qcov() == mb.block.qcov());
      CHECK(ma.qdot == mb.qdot);
    }
  }

  TEST_CASE("derivative covariance matches quadrature-free forms") {
    const PairCovariance p = PairCovariance::from_covariances(1.2, 0.8, 0.5);
    const LayerMoments m = propagate(ActivationModel::relu(), 0.0, 1.5, p);
    CHECK(m.qdot == doctest::Approx(2.25 * oracle::relu_deriv_pair(1.2, 0.8, 0.5)).epsilon(1e-13));
    const LayerMoments t = propagate(ActivationModel::tanh(), 0.0, 1.5, p);
    const oracle::Estimate mc =
        oracle::mc_pair([](double a, double b) { return dtanh(a) * dtanh(b); }, 1.2, 0.8, 0.5 / std::sqrt(0.96), 1000000, 11);
    CHECK(std::abs(t.qdot - 2.25 * mc.mean) < 3 * 2.25 * mc.se);
  }
}
