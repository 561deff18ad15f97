#include <doctest.h>

#include "fvlab/mechanisms.hpp"
#include "fvlab/quadrature.hpp"

#include <cmath>
#include <functional>

using namespace fvlab;

namespace {

// Classical fourth-order Runge-Kutta for dv/dt = -Psi(v).
double rk4_flow(const Mechanism& m, double t, double q, int steps = 20000) {
  const double h = t / steps;
  double v = q;
  const auto f = [&](double x) { return -psi(m, std::max(x, 0.0)); };
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(v);
    const double k2 = f(v + 0.5 * h * k1);
    const double k3 = f(v + 0.5 * h * k2);
    const double k4 = f(v + h * k3);
    v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return v;
}

double quadrature_phi_integral(const Mechanism& m, double t, double q) {
  QuadratureOptions o;
  o.rel_tol = 1e-12;
  return integrate([&](double s) { return phi(m, flow_v(m, s, q)); }, 0.0, t, o).value;
}

}  // namespace

TEST_SUITE("mechanisms") {
  TEST_CASE("psi and phi closed forms") {
    CHECK(psi(Mechanism::feller(2, 0), 3) == doctest::Approx(9));
    CHECK(psi(Mechanism::stable_from_d(1.5, 1, 0), 4) == doctest::Approx(8));
    CHECK(psi(Mechanism::feller(2, 1), 0) == 0.0);
    CHECK(psi(Mechanism::stable(1.3, 1, 1), 0) == 0.0);
    CHECK(phi(Mechanism::feller(2, 1), 2) == doctest::Approx(2));
    CHECK(phi(Mechanism::stable_from_d(1.5, 1, 1), 4) == doctest::Approx(3));
    CHECK(phi(Mechanism::stable(1.5, 1, 1), 0) == 0.0);
    CHECK_THROWS_AS(psi(Mechanism::feller(2, 1), -1), std::domain_error);
    CHECK_THROWS_AS(phi(Mechanism::feller(2, 1), -1), std::domain_error);
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS(Mechanism::feller(0, 0));
    CHECK_THROWS(Mechanism::feller(-1, 1));
    CHECK_THROWS(Mechanism::stable(1.0, 1, 1));
    CHECK_THROWS(Mechanism::stable(2.0, 1, 1));
    CHECK_THROWS(Mechanism::stable(1.5, -1, 1));
    CHECK_NOTHROW(Mechanism::feller(0, 1));
  }

  TEST_CASE("c -> d -> c round trip") {
    for (double a : {1.1, 1.5, 1.9}) {
      const StableCase s{a, 0.7, 1.3};
      const auto m = Mechanism::stable_from_d(a, s.d(), s.dprime());
      CHECK(m.stable_params().c == doctest::Approx(0.7).epsilon(1e-15));
      CHECK(m.stable_params().cprime == doctest::Approx(1.3).epsilon(1e-15));
    }
  }

  TEST_CASE("flow examples against RK4") {
    const auto f = Mechanism::feller(2, 0);
    CHECK(rk4_flow(f, 1, 1) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(flow_v(f, 1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    const auto s = Mechanism::stable_from_d(1.5, 1, 0);
    CHECK(rk4_flow(s, 1, 1) == doctest::Approx(4.0 / 9.0).epsilon(1e-10));
    CHECK(flow_v(s, 1, 1) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    CHECK(flow_v(s, 0, 2.5) == doctest::Approx(2.5));
  }

  TEST_CASE("closed-form flow matches RK4 on a grid") {
    for (const auto& m : {Mechanism::feller(0.7, 1), Mechanism::feller(3, 0),
                          Mechanism::stable(1.2, 1.4, 0.3), Mechanism::stable(1.8, 0.5, 2)}) {
      for (double t : {0.1, 1.0, 3.0})
        for (double q : {0.05, 1.0, 7.0}) {
          const double exact = flow_v(m, t, q);
          CHECK(std::abs(rk4_flow(m, t, q) - exact) <= 1e-8 * exact);
        }
    }
  }

  TEST_CASE("semigroup property") {
    for (const auto& m : {Mechanism::feller(2, 1), Mechanism::stable(1.5, 1, 1),
                          Mechanism::stable(1.1, 2, 0)}) {
      for (double t : {0.2, 1.0, 5.0})
        for (double s : {0.0, 0.3, 2.0})
          for (double q : {0.01, 1.0, 50.0}) {
            const double lhs = flow_v(m, t + s, q);
            const double rhs = flow_v(m, t, flow_v(m, s, q));
            CHECK(std::abs(lhs - rhs) <= 1e-10 * lhs);
          }
    }
  }

  TEST_CASE("laplace examples against quadrature of the phi integral") {
    const auto f = Mechanism::feller(2, 1);
    const double qf = quadrature_phi_integral(f, 1, 1);
    CHECK(phi_integral(f, 1, 1) == doctest::Approx(qf).epsilon(1e-11));
    CHECK(std::exp(-flow_v(f, 1, 1) - qf) == doctest::Approx(std::exp(-0.5) / 2).epsilon(1e-11));
    CHECK(cbi_laplace(f, 1, 1, 1) == doctest::Approx(0.303265).epsilon(1e-6));

    const auto s = Mechanism::stable_from_d(1.5, 1, 1);
    const double qs = quadrature_phi_integral(s, 1, 1);
    CHECK(phi_integral(s, 1, 1) == doctest::Approx(qs).epsilon(1e-11));
    CHECK(cbi_laplace(s, 1, 1, 1) == doctest::Approx(std::exp(-4.0 / 9.0) * std::pow(1.5, -3)).epsilon(1e-12));

    for (const auto& m : {Mechanism::feller(0.5, 2), Mechanism::stable(1.2, 1, 3),
                          Mechanism::stable(1.9, 2, 0.1)})
      for (double t : {0.5, 2.0})
        for (double q : {0.5, 4.0})
          CHECK(phi_integral(m, t, q) == doctest::Approx(quadrature_phi_integral(m, t, q)).epsilon(1e-10));
  }

  TEST_CASE("degenerate sigma2 = 0 limit") {
    const auto m = Mechanism::feller(0, 1.5);
    CHECK(cbi_laplace(m, 2, 1, 0.5) == doctest::Approx(std::exp(-2 * 0.5 - 1.5 * 0.5)));
  }

  TEST_CASE("laplace at t = 0 and monotonicity") {
    const auto m = Mechanism::stable(1.4, 1, 1);
    CHECK(cbi_laplace(m, 1.7, 0, 0.8) == doctest::Approx(std::exp(-1.7 * 0.8)));
    double prev = 1.0;
    for (double q = 0.1; q < 10; q *= 1.7) {
      const double v = cbi_laplace(m, 1, 1, q);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      CHECK(v <= prev);
      prev = v;
    }
    CHECK(cbi_laplace(m, 2, 1, 1) <= cbi_laplace(m, 1, 1, 1));
  }

  TEST_CASE("branching property") {
    for (const auto& m : {Mechanism::feller(2, 1), Mechanism::stable(1.5, 1, 1)}) {
      const double x = 0.7, y = 1.9, t = 0.8, q = 1.3;
      const double lhs = cbi_laplace(m, x + y, t, q);
      const double rhs = cbi_laplace(m, x, t, q) * std::exp(-y * flow_v(m, t, q));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    }
  }

  TEST_CASE("conservativity") {
    CHECK(conservativity_check(Mechanism::feller(2, 1)));
    CHECK(conservativity_check(Mechanism::stable(1.5, 1, 1)));
    for (const auto& m : {Mechanism::feller(2, 1), Mechanism::stable(1.5, 1, 1),
                          Mechanism::stable(1.05, 1, 0)}) {
      const auto rep = conservativity_report(m);
      CHECK(rep.numeric_divergence);
      for (std::size_t i = 1; i < rep.integrals.size(); ++i)
        CHECK(rep.integrals[i] > rep.integrals[i - 1]);
    }
  }

  TEST_CASE("theorem 1 correspondence") {
    const auto k = theorem1_correspondence(Mechanism::feller(2, 1));
    CHECK(k.c0 == 1.0);
    CHECK(k.c1 == 2.0);
    CHECK(!k.nu0);
    CHECK(!k.nu1);

    const auto b = theorem1_correspondence(Mechanism::stable(1.5, 1, 1));
    CHECK(b.c0 == 0.0);
    CHECK(b.c1 == 0.0);
    REQUIRE(b.nu0);
    REQUIRE(b.nu1);
    CHECK(b.nu0->a == doctest::Approx(0.5));
    CHECK(b.nu0->b == doctest::Approx(0.5));
    CHECK(b.nu1->a == doctest::Approx(0.5));
    CHECK(b.nu1->b == doctest::Approx(1.5));
    CHECK(b.lambda0_mass() == doctest::Approx(beta_fn(0.5, 0.5)));

    const auto z = theorem1_correspondence(Mechanism::stable(1.5, 1, 0));
    CHECK(z.lambda0_mass() == 0.0);
    CHECK(z.nu0_density(0.3) == 0.0);
  }

  TEST_CASE("truncated masses of nu against direct quadrature") {
    const auto m = theorem1_correspondence(Mechanism::stable(1.5, 1, 1));
    QuadratureOptions o;
    o.right_power = 2.0;
    const double eps = 0.01;
    const double nu1 = integrate([&](double r) { return m.nu1_density(r); }, eps, 1.0, o).value;
    // The (1 - r)^(-1/2) singularity is moved to 0 by reflection.
    QuadratureOptions refl;
    refl.left_power = 2.0;
    const double nu0 =
        integrate([&](double s) { return m.nu0_density(1.0 - s); }, 0.0, 1.0 - eps, refl).value;
    CHECK(m.nu1_mass_above(eps) == doctest::Approx(nu1).epsilon(1e-9));
    CHECK(m.nu0_mass_above(eps) == doctest::Approx(nu0).epsilon(1e-9));
    QuadratureOptions l;
    l.left_power = 2.0;
    const double s1 = integrate([&](double r) { return r * r * m.nu1_density(r); }, 0.0, eps, l).value;
    const double s0 = integrate([&](double r) { return r * m.nu0_density(r); }, 0.0, eps, l).value;
    CHECK(m.nu1_small_second_moment(eps) == doctest::Approx(s1).epsilon(1e-10));
    CHECK(m.nu0_small_first_moment(eps) == doctest::Approx(s0).epsilon(1e-10));
  }
}
