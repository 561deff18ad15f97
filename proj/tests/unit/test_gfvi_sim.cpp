#include <doctest.h>

#include "fvlab/coalescent.hpp"
#include "fvlab/gfvi_sim.hpp"
#include "fvlab/quadrature.hpp"
#include "fvlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

using namespace fvlab;

namespace {

CoalescentM kingman(double c0, double c1) {
  CoalescentM m;
  m.c0 = c0;
  m.c1 = c1;
  return m;
}

// 1 - sum_x rho({x})^2: probability that two with-replacement draws differ.
double heterozygosity(const std::vector<double>& types) {
  std::map<double, double> counts;
  for (double x : types) counts[x] += 1.0;
  const double n = static_cast<double>(types.size());
  double s = 0.0;
  for (const auto& [x, c] : counts) s += (c / n) * (c / n);
  return 1.0 - s;
}

// P(R <= x) for the density r^g (1 - r)^d on (eps, 1], by quadrature.
double truncated_cdf(double g, double d, double eps, double x) {
  QuadratureOptions o;
  o.left_power = endpoint_power(d);
  const auto f = [&](double s) { return std::pow(1.0 - s, g) * std::pow(s, d); };
  const double total = integrate(f, 0.0, 1.0 - eps, o).value;
  const double above = integrate(f, 0.0, 1.0 - x, o).value;
  return 1.0 - above / total;
}

}  // namespace

TEST_SUITE("gfvi_sim") {
  TEST_CASE("truncated power sampler matches its distribution function") {
    struct Case {
      double g, d, eps;
    };
    for (const Case c : {Case{-2.5, 0.5, 0.01}, Case{-1.5, -0.5, 0.01}, Case{-1.0, -0.8, 0.05},
                         Case{-2.2, 0.8, 0.6}}) {
      const TruncatedPowerSampler sampler(c.g, c.d, c.eps);
      Stream s(12, 0);
      std::vector<double> xs(40000);
      for (auto& x : xs) x = sampler(s);
      for (double q : {0.2, 0.5, 0.8}) {
        const double x = c.eps + q * (1.0 - c.eps);
        RunningStats below;
        for (double v : xs) below.push(v <= x ? 1.0 : 0.0);
        CHECK(within_sigma(estimate(below), truncated_cdf(c.g, c.d, c.eps, x), 4.0));
      }
      CHECK(*std::min_element(xs.begin(), xs.end()) > c.eps);
      CHECK(*std::max_element(xs.begin(), xs.end()) <= 1.0);
    }
  }

  TEST_CASE("effective rates fold the small events") {
    const auto m = theorem1_correspondence(Mechanism::stable(1.5, 1.0, 1.0));
    const auto g = gfvi_rates(m, 0.01);
    CHECK(g.c1_eff == doctest::Approx(m.nu1_small_second_moment(0.01)));
    CHECK(g.c0_eff == doctest::Approx(m.nu0_small_first_moment(0.01)));
    CHECK(g.big_rep == doctest::Approx(m.nu1_mass_above(0.01)));
    CHECK_THROWS_AS(gfvi_rates(m, 1.0), std::invalid_argument);
  }

  TEST_CASE("no events leaves the types unchanged") {
    GfviOptions o;
    o.n = 20;
    o.keep_types = true;
    o.observe_times = {0.0, 0.5};
    Stream s(1, 0);
    const auto tr = sim_gfvi(kingman(0.0, 0.0), o, s);
    CHECK(tr.event_count == 0);
    REQUIRE(tr.types.size() == 2);
    CHECK(tr.types[0] == tr.types[1]);
    CHECK(tr.distinct_types[1] == 20);
    CHECK(tr.frac_type0[1] == 0.0);
  }

  TEST_CASE("kingman heterozygosity decays at rate c1") {
    GfviOptions o;
    o.n = 40;
    o.keep_types = true;
    const auto reps = gfvi_replicates(kingman(0.0, 1.0), o, 3000, 2);
    for (std::size_t k = 0; k < o.observe_times.size(); ++k) {
      RunningStats h;
      for (const auto& tr : reps) h.push(heterozygosity(tr.types[k]));
      const double exact = (1.0 - 1.0 / o.n) * std::exp(-o.observe_times[k]);
      CHECK(within_sigma(estimate(h), exact));
    }
  }

  TEST_CASE("pure immigration fills the zero atom") {
    GfviOptions o;
    o.n = 50;
    o.observe_times = {0.0, 0.5, 1.0};
    const auto reps = gfvi_replicates(kingman(0.7, 0.0), o, 3000, 3);
    CHECK(moment_estimate(reps, 0.0, 1, {}, o.n).mean == 0.0);
    for (double t : {0.5, 1.0}) {
      const auto e = moment_estimate(reps, t, 1, {}, o.n);
      CHECK(within_sigma(e, 1.0 - std::exp(-0.7 * t)));
      CHECK(within_sigma(e, absorption_chain(1, rates(kingman(0.7, 0.0), 4), t)));
    }
  }

  TEST_CASE("kingman duality for the second moment") {
    const auto m = kingman(1.0, 2.0);
    GfviOptions o;
    o.n = 100;
    const auto reps = gfvi_replicates(m, o, 4000, 4);
    const auto table = rates(m, 4);
    for (double t : {0.5, 1.0}) {
      const auto e = moment_estimate(reps, t, 2, {}, o.n);
      CHECK(within_sigma(e, absorption_chain(2, table, t)));
    }
  }

  TEST_CASE("beta duality for p = 1, 2") {
    const auto m = theorem1_correspondence(Mechanism::stable(1.5, 1.0, 1.0));
    GfviOptions o;
    o.n = 200;
    o.eps_trunc = 0.01;
    const auto reps = gfvi_replicates(m, o, 2000, 5);
    const auto table = rates(m, 4);
    for (double t : {0.5, 1.0})
      for (int p : {1, 2})
        CHECK(within_sigma(moment_estimate(reps, t, p, {}, o.n), absorption_chain(p, table, t)));
  }

  TEST_CASE("immigration events only increase the zero fraction") {
    CoalescentM m;
    m.nu0 = BetaLambda{0.5, 0.5, 1.0};
    GfviOptions o;
    o.n = 100;
    o.eps_trunc = 0.05;
    o.record_events = true;
    o.observe_times.clear();
    for (int i = 0; i <= 20; ++i) o.observe_times.push_back(0.05 * i);
    Stream s(6, 0);
    const auto tr = sim_gfvi(m, o, s);
    CHECK(!tr.events.empty());
    for (const auto& ev : tr.events)
      CHECK((ev.kind == GfviEventKind::big_imm || ev.kind == GfviEventKind::king_imm));
    for (std::size_t i = 1; i < tr.frac_type0.size(); ++i)
      CHECK(tr.frac_type0[i] >= tr.frac_type0[i - 1]);
  }

  TEST_CASE("permuted initial configurations give the same moments") {
    const auto m = theorem1_correspondence(Mechanism::stable(1.5, 1.0, 0.5));
    GfviOptions o;
    o.n = 100;
    o.eps_trunc = 0.02;
    o.initial_cells = 10;
    o.keep_types = true;
    o.observe_times = {0.5};
    std::vector<double> base(static_cast<std::size_t>(o.n));
    for (int i = 0; i < o.n; ++i) base[static_cast<std::size_t>(i)] = (i / 10 + 1) / 10.0;
    auto shuffled = base;
    Stream perm(7, 99);
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(uniform_open(perm) * i)]);
    REQUIRE(shuffled != base);

    std::vector<GfviTrajectory> a, b;
    for (int r = 0; r < 3000; ++r) {
      Stream sa(7, static_cast<std::uint64_t>(r)), sb(8, static_cast<std::uint64_t>(r));
      a.push_back(sim_gfvi(m, o, base, sa));
      b.push_back(sim_gfvi(m, o, shuffled, sb));
    }
    const IndicatorSet low{0.0, 0.3};
    for (int p : {1, 2})
      CHECK(within_sigma(moment_estimate(a, 0.5, p, low, o.n), moment_estimate(b, 0.5, p, low, o.n)));
  }

  TEST_CASE("moment order and observation checks") {
    GfviOptions o;
    o.n = 20;
    const auto reps = gfvi_replicates(kingman(1.0, 1.0), o, 3, 1);
    CHECK_THROWS_AS(moment_estimate(reps, 0.5, 3, {}, o.n), std::invalid_argument);
    CHECK_THROWS_AS(moment_estimate(reps, 0.7, 1, {}, o.n), std::out_of_range);
    CHECK_THROWS_AS(moment_estimate(reps, 0.5, 1, IndicatorSet{0.0, 0.5}, o.n),
                    std::invalid_argument);
  }

  TEST_CASE("gfvi csv") {
    GfviOptions o;
    o.n = 10;
    o.observe_times = {0.0};
    const auto reps = gfvi_replicates(kingman(1.0, 1.0), o, 2, 1);
    std::ostringstream os;
    write_gfvi_csv(os, reps);
    CHECK(os.str() == "rep_id,time,frac_type0,distinct_types\n0,0,0,10\n1,0,0,10\n");
  }
}
