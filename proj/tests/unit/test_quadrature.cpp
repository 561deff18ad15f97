#include <doctest.h>

#include "fvlab/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

using namespace fvlab;

TEST_SUITE("quadrature") {
  TEST_CASE("smooth integrand") {
    const auto r = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
    CHECK(r.value == doctest::Approx(std::numbers::e - 1.0).epsilon(1e-14));
  }

  TEST_CASE("endpoint singularities with substitution") {
    QuadratureOptions o;
    o.left_power = 2.0;
    const auto r = integrate(
        [](double x) { return 1.0 / std::sqrt(x * (1.0 - x)); }, 0.0, 0.5, o);
    CHECK(2.0 * r.value == doctest::Approx(std::numbers::pi).epsilon(1e-12));
    QuadratureOptions mild;
    mild.left_power = 2.0;
    mild.right_power = 2.0;
    const auto b = integrate([](double x) { return std::sqrt(x * (1.0 - x)); }, 0.0, 1.0, mild);
    CHECK(b.value == doctest::Approx(std::numbers::pi / 8.0).epsilon(1e-12));
  }

  TEST_CASE("fractional substitution power") {
    QuadratureOptions o;
    o.left_power = 1.0 / 0.3;
    const auto r = integrate([](double x) { return std::pow(x, -0.7); }, 0.0, 1.0, o);
    CHECK(r.value == doctest::Approx(1.0 / 0.3).epsilon(1e-12));
  }

  TEST_CASE("automatic endpoint power") {
    CHECK(endpoint_power(0.0) == 1.0);
    CHECK(endpoint_power(3.0) == 1.0);
    for (double e : {-0.7, -0.5, 0.5, 1.3}) {
      QuadratureOptions o;
      o.left_power = endpoint_power(e);
      o.rel_tol = 1e-13;
      const auto r = integrate([&](double x) { return std::pow(x, e) * std::exp(-x); }, 0.0, 1.0, o);
      const double exact = std::tgamma(e + 1.0) * boost::math::gamma_p(e + 1.0, 1.0);
      CHECK(r.value == doctest::Approx(exact).epsilon(1e-12));
    }
  }

  TEST_CASE("semi-infinite range") {
    const auto r = integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0);
    CHECK(r.value == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
    const auto s = integrate_to_infinity([](double x) { return std::pow(x, -2.5); }, 1.0, 2.0,
                                         {}, 1.0 / 1.5);
    CHECK(s.value == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
  }

  TEST_CASE("beta function") {
    CHECK(beta_fn(0.5, 2.5) == doctest::Approx(3.0 * std::numbers::pi / 8.0).epsilon(1e-14));
    CHECK(beta_fn(0.5, 1.5) == doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-14));
    CHECK(incomplete_beta(2.0, 1.0, 0.5) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(std::isfinite(log_beta(300.0, 400.0)));
  }

  TEST_CASE("non-convergence is reported") {
    QuadratureOptions o;
    o.max_depth = 2;
    o.rel_tol = 1e-15;
    o.abs_tol = 0.0;
    CHECK_THROWS_AS(integrate([](double x) { return std::sin(1.0 / x); }, 0.0, 1.0, o),
                    QuadratureError);
  }
}
