#include <doctest.h>

#include "fvlab/samplers.hpp"
#include "fvlab/stats.hpp"

#include <cmath>
#include <vector>

using namespace fvlab;

TEST_SUITE("samplers") {
  TEST_CASE("poisson and gamma moments") {
    Stream s(3, 1);
    RunningStats p, g;
    for (int i = 0; i < 100000; ++i) {
      p.push(static_cast<double>(sample_poisson(s, 3.5)));
      g.push(sample_gamma(s, 2.5, 0.4));
    }
    CHECK(within_sigma(estimate(p), 3.5));
    CHECK(within_sigma(estimate(g), 1.0));
    CHECK(sample_gamma(s, 0.0, 1.0) == 0.0);
    CHECK(sample_poisson(s, 0.0) == 0);
  }

  TEST_CASE("binomial edge cases") {
    Stream s(3, 2);
    CHECK(sample_binomial(s, 10, 0.0) == 0);
    CHECK(sample_binomial(s, 10, 1.0) == 10);
    RunningStats b;
    for (int i = 0; i < 50000; ++i) b.push(static_cast<double>(sample_binomial(s, 20, 0.3)));
    CHECK(within_sigma(estimate(b), 6.0));
  }

  TEST_CASE("positive stable laplace transform") {
    for (double beta : {0.2, 0.5, 0.8}) {
      Stream s(11, static_cast<std::uint64_t>(beta * 100));
      for (double q : {0.5, 1.0, 2.0}) {
        RunningStats st;
        for (int i = 0; i < 100000; ++i) st.push(std::exp(-q * sample_positive_stable(s, beta)));
        CHECK(within_sigma(estimate(st), std::exp(-std::pow(q, beta))));
      }
    }
  }

  TEST_CASE("half-stable special case") {
    // beta = 1/2: S = 1 / (4 G) with G ~ Gamma(1/2, 1), so P(S <= x) = erfc(1 / (2 sqrt(x))).
    for (double x : {0.1, 1.0, 10.0})
      CHECK(positive_stable_cdf(0.5, x) ==
            doctest::Approx(std::erfc(1.0 / (2.0 * std::sqrt(x)))).epsilon(1e-8));
    const double med = positive_stable_quantile(0.5, 0.5);
    CHECK(positive_stable_cdf(0.5, med) == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("stable cdf against the empirical distribution") {
    Stream s(5, 5);
    const double beta = 0.3;
    const double x = positive_stable_quantile(beta, 0.3);
    int below = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) below += sample_positive_stable(s, beta) <= x;
    const double f = static_cast<double>(below) / n;
    CHECK(std::abs(f - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / n));
  }

  TEST_CASE("pareto tail") {
    Stream s(9, 9);
    int above = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) above += sample_pareto(s, 0.5, 1.5) > 1.0;
    const double p = std::pow(2.0, -1.5);
    CHECK(std::abs(static_cast<double>(above) / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}
