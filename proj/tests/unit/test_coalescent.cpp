#include <doctest.h>

#include "fvlab/coalescent.hpp"
#include "fvlab/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

using namespace fvlab;

namespace {

CoalescentM kingman(double c0, double c1) {
  CoalescentM m;
  m.c0 = c0;
  m.c1 = c1;
  return m;
}

CoalescentM beta_pair(double alpha, double c, double cprime) {
  return theorem1_correspondence(Mechanism::stable(alpha, c, cprime));
}

// Two-sample chi-square homogeneity test over category counts.
double homogeneity_p_value(const std::map<std::string, double>& a,
                           const std::map<std::string, double>& b) {
  std::map<std::string, std::pair<double, double>> cells;
  double na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    cells[k].first = v;
    na += v;
  }
  for (const auto& [k, v] : b) {
    cells[k].second = v;
    nb += v;
  }
  double stat = 0.0;
  for (const auto& [k, v] : cells) {
    const double tot = v.first + v.second;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    stat += (v.first - ea) * (v.first - ea) / ea + (v.second - eb) * (v.second - eb) / eb;
  }
  const double df = static_cast<double>(cells.size()) - 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

}  // namespace

TEST_SUITE("coalescent") {
  TEST_CASE("partition basics") {
    const auto s = Partition0::singletons(3);
    CHECK(s.block_count() == 4);
    CHECK(s.outside_blocks() == 3);
    CHECK(s.encoding() == "0.1.2.3");
    const auto p = Partition0::from_blocks({{0, 3}, {1, 2}});
    CHECK(p.encoding() == "0.1.1.0");
    CHECK(p.block_of(3) == 0);
    CHECK(p.restrict_to(1).encoding() == "0.1");
    CHECK(Partition0::from_word({5, 2, 2, 5}) == p);
    CHECK_THROWS_AS(Partition0::from_blocks({{0, 1}, {1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(Partition0::from_blocks({{0}, {2}}), std::invalid_argument);

    auto q = Partition0::singletons(4);
    q.merge({1, 3}, false);
    CHECK(q.encoding() == "0.1.2.1.3");
    q.merge({2}, true);
    CHECK(q.encoding() == "0.1.0.1.2");
  }

  TEST_CASE("kingman rate table") {
    const auto t = rates(kingman(0.7, 1.3), 8);
    CHECK(t.lambda(5, 2) == doctest::Approx(1.3));
    CHECK(t.r(5, 1) == doctest::Approx(0.7));
    CHECK(t.lambda(5, 3) == 0.0);
    CHECK(t.r(5, 2) == 0.0);
    CHECK_THROWS_AS(t.lambda(5, 1), std::out_of_range);
    CHECK_THROWS_AS(t.r(9, 1), std::out_of_range);
  }

  TEST_CASE("beta rates at known values") {
    const auto t = rates(beta_pair(1.5, 1.0, 1.0), 4);
    CHECK(t.lambda(3, 2) == doctest::Approx(3.0 * std::numbers::pi / 8.0).epsilon(1e-13));
    CHECK(t.r(2, 1) == doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-13));
    CHECK(std::beta(0.5, 2.5) == doctest::Approx(3.0 * std::numbers::pi / 8.0).epsilon(1e-13));
  }

  TEST_CASE("closed forms agree with quadrature") {
    for (double alpha : {1.2, 1.5, 1.8}) {
      auto m = beta_pair(alpha, 0.8, 1.7);
      m.c0 = 0.3;
      m.c1 = 0.4;
      const auto t = rates(m, 16);
      for (int n = 1; n <= 16; ++n) {
        for (int k = 1; k <= n; ++k) {
          const double rq = r_by_quadrature(m, n, k);
          CHECK(std::abs(t.r(n, k) - rq) <= 1e-10 * std::abs(rq));
          if (k >= 2) {
            const double lq = lambda_by_quadrature(m, n, k);
            CHECK(std::abs(t.lambda(n, k) - lq) <= 1e-10 * std::abs(lq));
          }
        }
      }
    }
  }

  TEST_CASE("consistency recursion") {
    const auto t = rates(beta_pair(1.35, 1.0, 2.0), 40);
    for (int n = 1; n < 40; ++n) {
      for (int k = 1; k <= n; ++k) {
        const double r = t.r(n, k);
        CHECK(std::abs(r - t.r(n + 1, k) - t.r(n + 1, k + 1)) <= 1e-10 * r);
        if (k >= 2) {
          const double l = t.lambda(n, k);
          CHECK(std::abs(l - t.lambda(n + 1, k) - t.lambda(n + 1, k + 1)) <= 1e-10 * l);
        }
      }
    }
  }

  TEST_CASE("lambda equivalence") {
    CHECK(lambda_equivalence(kingman(2.0, 2.0), 16).equivalent);
    for (double alpha : {1.2, 1.5, 1.8})
      CHECK(lambda_equivalence(beta_pair(alpha, 1.3, 1.3), 16).equivalent);
    const auto bad = lambda_equivalence(kingman(1.0, 2.0), 16);
    CHECK_FALSE(bad.equivalent);
    CHECK(bad.max_deviation > 0.1);
    CHECK_FALSE(lambda_equivalence(beta_pair(1.5, 1.0, 2.0), 16).equivalent);
  }

  TEST_CASE("kingman gillespie step probabilities") {
    const auto t = rates(kingman(1.0, 1.0), 4);
    Stream rng(5, 0);
    RunningStats merge, wait;
    for (int i = 0; i < 30000; ++i) {
      const auto s = gillespie_step(Partition0::singletons(2), t, rng);
      merge.push(s.immigration ? 0.0 : 1.0);
      wait.push(s.waiting_time);
      if (!s.immigration) CHECK(s.next.encoding() == "0.1.1");
    }
    CHECK(within_sigma(estimate(merge), 1.0 / 3.0, 4.0));
    CHECK(within_sigma(estimate(wait), 1.0 / 3.0, 4.0));
  }

  TEST_CASE("absorbing state has no jumps") {
    const auto t = rates(kingman(1.0, 1.0), 4);
    Stream rng(5, 1);
    const auto s = gillespie_step(Partition0::from_blocks({{0, 1, 2}}), t, rng);
    CHECK(std::isinf(s.waiting_time));
    CHECK(s.next.encoding() == "0.0.0");
  }

  TEST_CASE("a single transition touches only the chosen blocks") {
    const auto t = rates(beta_pair(1.5, 1.0, 1.0), 8);
    Stream rng(5, 2);
    for (int i = 0; i < 500; ++i) {
      const auto s = gillespie_step(Partition0::singletons(6), t, rng);
      const auto blocks = s.next.blocks();
      int touched = 0;
      for (const auto& b : blocks) if (b.size() > 1) touched += static_cast<int>(b.size());
      if (s.immigration) {
        CHECK(touched == s.merged + 1);
      } else {
        CHECK(touched == s.merged);
        CHECK(s.merged >= 2);
      }
      CHECK(s.next.outside_blocks() == 6 - s.merged + (s.immigration ? 0 : 1));
    }
  }

  TEST_CASE("absorption chain exact values") {
    const auto k = rates(kingman(0.8, 1.0), 4);
    for (double t : {0.3, 1.0, 2.5}) CHECK(absorption_chain(1, k, t) == doctest::Approx(1.0 - std::exp(-0.8 * t)));
    CHECK(absorption_chain(3, k, 0.0) == 0.0);

    // Two out, c0 = 1, c1 = 2: leave at rate 4 to one out, then absorb at rate 1.
    const auto k2 = rates(kingman(1.0, 2.0), 4);
    const double hypo = 1.0 - (4.0 * std::exp(-1.0) - std::exp(-4.0)) / 3.0;
    CHECK(absorption_chain(2, k2, 1.0) == doctest::Approx(hypo).epsilon(1e-12));
    CHECK(hypo == doctest::Approx(0.51561).epsilon(1e-4));
    CHECK_THROWS_AS(absorption_chain(2, k2, -1.0), std::domain_error);
  }

  TEST_CASE("absorption chain agrees with simulated coalescents") {
    const auto t = rates(beta_pair(1.5, 1.0, 1.0), 8);
    for (int p : {1, 3}) {
      const auto mc = absorption_monte_carlo(p, t, 0.7, 20000, 3);
      CHECK(within_sigma(mc, absorption_chain(p, t, 0.7)));
    }
  }

  TEST_CASE("restriction is sampling consistent") {
    auto m = beta_pair(1.5, 1.0, 0.6);
    m.c1 = 0.5;
    const auto t = rates(m, 8);
    for (int n : {3, 4}) {
      std::map<std::string, double> big, small;
      Stream ra(8, static_cast<std::uint64_t>(n)), rb(9, static_cast<std::uint64_t>(n));
      for (int i = 0; i < 100000; ++i) {
        big[simulate_coalescent(n, t, 0.4, ra).states.back().restrict_to(n - 1).encoding()] += 1;
        small[simulate_coalescent(n - 1, t, 0.4, rb).states.back().encoding()] += 1;
      }
      CHECK(homogeneity_p_value(big, small) > 1e-3);
    }
  }

  TEST_CASE("coalescent csv") {
    const auto t = rates(kingman(1.0, 1.0), 4);
    Stream rng(1, 1);
    const auto p = simulate_coalescent(3, t, 10.0, rng);
    CHECK(p.states.front().encoding() == "0.1.2.3");
    std::ostringstream os;
    write_coalescent_csv(os, {p});
    CHECK(os.str().rfind("rep_id,time,n_blocks_outside,partition_encoding\n0,0,3,0.1.2.3\n", 0) == 0);
  }
}
