#include <doctest.h>

#include "fvlab/genlab.hpp"
#include "fvlab/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace fvlab;

namespace {

AtomicMeasure two_atoms() {
  AtomicMeasure eta;
  eta.immigrant_mass = 1.0;
  eta.cells.push_back({0.5, 3.0});
  return eta;
}

// Term (3) of L for F = 1 / (1 + q |eta|), integrated directly in h:
// z int (psi(z + h) - psi(z) - h psi'(z)) c h^(-1-alpha) dh, where the bracket
// equals q^2 h^2 / ((1 + q z)^2 (1 + q z + q h)).
double mass_only_jump_term(double q, double z, double alpha, double c) {
  const double a = 1.0 + q * z;
  const auto f = [&](double h) {
    return q * q * h * h / (a * a * (a + q * h)) * c * std::pow(h, -1.0 - alpha);
  };
  QuadratureOptions o;
  o.left_power = endpoint_power(1.0 - alpha);
  o.max_depth = 30;
  return z * integrate_to_infinity(f, 0.0, z, o, endpoint_power(alpha - 2.0)).value;
}

}  // namespace

TEST_SUITE("genlab") {
  TEST_CASE("gateaux derivative of the second moment") {
    // F = <phi, rho>^2 with phi = x on eta = delta_0 + 3 delta_1/2:
    // P = 3/8, F'(a) = 2 P (a - P) / 4.
    TestFunctional f{PhiFn::identity(), 2, PsiFn::one()};
    const auto eta = two_atoms();
    CHECK(f.value(eta) == doctest::Approx(9.0 / 64.0));
    CHECK(gateaux(f, eta, 1.0) == doctest::Approx(2 * 0.375 * 0.625 / 4.0));
    CHECK(gateaux(f, eta, 0.0) == doctest::Approx(-2 * 0.375 * 0.375 / 4.0));
    CHECK(gateaux_fd(f, eta, 1.0) == doctest::Approx(gateaux(f, eta, 1.0)).epsilon(1e-8));
  }

  TEST_CASE("gateaux derivative of a single atom") {
    AtomicMeasure eta;
    eta.cells.push_back({0.5, 2.0});
    TestFunctional f{PhiFn::identity(), 1, PsiFn::one()};
    CHECK(gateaux(f, eta, 1.0) == doctest::Approx(0.25));
    CHECK(gateaux_fd(f, eta, 1.0) == doctest::Approx(0.25).epsilon(1e-8));
    TestFunctional flat{PhiFn::constant(1.0), 3, PsiFn::one()};
    CHECK(gateaux(flat, eta, 0.2) == 0.0);
    CHECK_THROWS_AS(gateaux(f, AtomicMeasure{}, 0.2), std::invalid_argument);
  }

  TEST_CASE("closed-form derivatives agree with differences") {
    RandomSuiteOptions o;
    o.samples = 20;
    o.seed = 3;
    for (const auto& s : random_suite(o)) {
      const double scale = std::abs(s.f.value(s.eta)) / s.eta.total_mass();
      for (double a : {0.0, 0.3, 0.9})
        CHECK(relative_deviation(gateaux(s.f, s.eta, a), gateaux_fd(s.f, s.eta, a), scale) < 1e-7);
    }
  }

  TEST_CASE("psi differences") {
    for (const PsiFn p : {PsiFn::exp(0.7), PsiFn::rational(1.3)})
      for (double h : {1e-9, 1e-3, 0.4, 3.0}) {
        const double z = 0.8;
        CHECK(p.diff1(z, h) == doctest::Approx(p.value(z + h) - p.value(z)).epsilon(1e-6));
        // rem2 ~ h^2 psi''(z) / 2 for small h
        if (h < 1e-6) CHECK(p.rem2(z, h) == doctest::Approx(h * h * p.d2(z) / 2).epsilon(1e-6));
        else CHECK(p.rem2(z, h) == doctest::Approx(p.value(z + h) - p.value(z) - h * p.d1(z)));
      }
  }

  TEST_CASE("total-mass generator matches the Laplace exponents") {
    const auto eta = two_atoms();
    for (const auto& mech : {Mechanism::feller(1.3, 0.6), Mechanism::stable(1.5, 1.0, 0.7),
                             Mechanism::stable(1.2, 0.4, 2.0), Mechanism::stable(1.8, 2.0, 0.0)})
      for (double q : {0.3, 1.0, 2.5}) {
        TestFunctional f{PhiFn::constant(1.0), 1, PsiFn::exp(q)};
        const double z = eta.total_mass();
        const double exact = (z * psi(mech, q) - phi(mech, q)) * std::exp(-q * z);
        CHECK(apply_L(mech, f, eta) == doctest::Approx(exact).epsilon(1e-9));
      }
  }

  TEST_CASE("rational psi jump term against direct integration in h") {
    const auto eta = two_atoms();
    const double alpha = 1.6, c = 0.9;
    TestFunctional f{PhiFn::constant(1.0), 1, PsiFn::rational(0.8)};
    const double direct = mass_only_jump_term(0.8, eta.total_mass(), alpha, c);
    CHECK(apply_L(Mechanism::stable(alpha, c, 0.0), f, eta) == doctest::Approx(direct).epsilon(1e-9));
  }

  TEST_CASE("generator by quadrature equals the block-counting form") {
    const CoalescentM m = theorem1_correspondence(Mechanism::stable(1.4, 1.0, 0.6));
    RandomSuiteOptions o;
    o.samples = 15;
    o.seed = 9;
    for (const auto& s : random_suite(o)) {
      const auto rho = *s.eta.normalized();
      CHECK(apply_Fgen(m, s.f, rho) == doctest::Approx(apply_Fgen_by_rates(m, s.f, rho)).epsilon(1e-9));
    }
  }

  TEST_CASE("kingman generator on the second moment") {
    // rho = (delta_0 + 3 delta_{1/2}) / 4, phi = x: P = 3/8, M2 = 3/16.
    CoalescentM m;
    m.c0 = 0.5;
    m.c1 = 2.0;
    TestFunctional f{PhiFn::identity(), 2, PsiFn::one()};
    const auto rho = *two_atoms().normalized();
    const double p = 0.375, m2 = 0.1875;
    const double exact = 2.0 * (m2 - p * p) + 0.5 * 2 * (0.0 - p * p);
    CHECK(apply_Fgen(m, f, rho) == doctest::Approx(exact));
  }

  TEST_CASE("factorization holds on a random suite") {
    RandomSuiteOptions o;
    o.samples = 10;
    o.seed = 11;
    const auto suite = random_suite(o);
    CHECK(factorization_check(Mechanism::feller(2.0, 1.0), suite) < 1e-10);
    CHECK(factorization_check(Mechanism::stable(1.5, 1.0, 1.0), suite) < 1e-7);
    CHECK(factorization_check(Mechanism::stable(1.25, 0.5, 2.0), suite) < 1e-7);
  }

  TEST_CASE("pushforward of r^2 under the stable measure") {
    // z^-alpha c int r^(1-alpha) (1-r)^(alpha-1) dr = B(2 - alpha, alpha); for alpha = 1.5
    // this is B(1/2, 3/2) = pi / 2.
    const StableCase sc{1.5, 1.0, 1.0};
    const Polynomial r2{{0.0, 0.0, 1.0}};
    const auto res = pushforward_check(sc, {1.0, 2.0}, {r2});
    REQUIRE(res.h_side.size() == 4);
    CHECK(res.h_side[0] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-10));
    CHECK(res.h_side[1] == doctest::Approx(std::numbers::pi / 2 * std::pow(2.0, -1.5)).epsilon(1e-10));
    // nu_hat_0 side: z^(1-alpha) int r^2 r^-alpha (1-r)^(alpha-2) dr = B(3 - alpha, alpha - 1).
    const double b = boost::math::tgamma(1.5) * boost::math::tgamma(0.5);
    CHECK(res.h_side[2] == doctest::Approx(b).epsilon(1e-10));
    CHECK(res.h_side[3] == doctest::Approx(b * std::pow(2.0, -0.5)).epsilon(1e-10));
    CHECK(res.max_deviation < 1e-9);
    CHECK_THROWS_AS(pushforward_check(sc, {1.0}, {Polynomial{{0.0, 1.0}}}), std::invalid_argument);
  }

  TEST_CASE("report passes with the default configuration") {
    GenlabConfig cfg;
    cfg.suite.samples = 10;
    const auto rep = run_genlab(cfg);
    CHECK(rep.checks.size() == 9);
    for (const auto& c : rep.checks) {
      INFO(c.name << " " << c.max_deviation);
      CHECK(c.passed);
    }
  }
}
