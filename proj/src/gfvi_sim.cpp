#include "fvlab/gfvi_sim.hpp"

#include "fvlab/io.hpp"
#include "fvlab/parallel.hpp"
#include "fvlab/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace fvlab {
namespace {

constexpr std::uint64_t kGfviTag = 0x676676692d73696dull;

// int_lo^hi x^g dx
double power_integral(double g, double lo, double hi) {
  if (g == -1.0) return std::log(hi / lo);
  return (std::pow(hi, g + 1.0) - std::pow(lo, g + 1.0)) / (g + 1.0);
}

std::size_t uniform_index(Stream& s, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform_open(s) * static_cast<double>(n));
  return std::min(i, n - 1);
}

int count_distinct(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

class Particles {
 public:
  explicit Particles(std::vector<double> types) : types_(std::move(types)) {
    perm_.resize(types_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
    for (double x : types_) zeros_ += x == 0.0 ? 1 : 0;
  }

  std::size_t size() const noexcept { return types_.size(); }
  double type(std::size_t i) const { return types_[i]; }
  const std::vector<double>& types() const noexcept { return types_; }
  double frac_zero() const noexcept {
    return static_cast<double>(zeros_) / static_cast<double>(types_.size());
  }

  void set(std::size_t i, double x) {
    zeros_ += (x == 0.0 ? 1 : 0) - (types_[i] == 0.0 ? 1 : 0);
    types_[i] = x;
  }

  // k distinct uniform indices, by a partial shuffle of a persistent permutation.
  template <class F>
  void for_random_subset(std::size_t k, Stream& s, F&& f) {
    const std::size_t n = perm_.size();
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(s, n - i);
      std::swap(perm_[i], perm_[j]);
      f(perm_[i]);
    }
  }

 private:
  std::vector<double> types_;
  std::vector<std::size_t> perm_;
  std::int64_t zeros_ = 0;
};

std::vector<double> initial_types(const GfviOptions& opts) {
  std::vector<double> v(static_cast<std::size_t>(opts.n));
  for (int i = 0; i < opts.n; ++i) {
    if (opts.initial_cells > 0) {
      const int cell = static_cast<int>(static_cast<std::int64_t>(i) * opts.initial_cells / opts.n);
      v[static_cast<std::size_t>(i)] = static_cast<double>(cell + 1) / opts.initial_cells;
    } else {
      v[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) / opts.n;
    }
  }
  return v;
}

}  // namespace

TruncatedPowerSampler::TruncatedPowerSampler(double gamma, double delta, double eps)
    : gamma_(gamma), delta_(delta), eps_(eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0, 1)");
  if (!(delta > -1.0)) throw std::invalid_argument("delta must be > -1");
  split_ = std::max(eps, 0.5);
  double left = 0.0;
  if (eps < 0.5) {
    bound_left_ = delta < 0.0 ? std::pow(0.5, delta) : 1.0;
    left = bound_left_ * power_integral(gamma, eps, 0.5);
  }
  bound_right_ = gamma < 0.0 ? std::pow(split_, gamma) : 1.0;
  const double right = bound_right_ * std::pow(1.0 - split_, delta + 1.0) / (delta + 1.0);
  weight_left_ = left / (left + right);
}

double TruncatedPowerSampler::operator()(Stream& s) const {
  while (true) {
    if (uniform_open(s) < weight_left_) {
      const double u = uniform_open(s);
      double r;
      if (gamma_ == -1.0) {
        r = eps_ * std::pow(0.5 / eps_, u);
      } else {
        const double g1 = gamma_ + 1.0;
        const double lo = std::pow(eps_, g1), hi = std::pow(0.5, g1);
        r = std::pow(lo + u * (hi - lo), 1.0 / g1);
      }
      if (uniform_open(s) * bound_left_ <= std::pow(1.0 - r, delta_)) return r;
    } else {
      const double r = 1.0 - (1.0 - split_) * std::pow(uniform_open(s), 1.0 / (delta_ + 1.0));
      if (uniform_open(s) * bound_right_ <= std::pow(r, gamma_)) return r;
    }
  }
}

GfviRates gfvi_rates(const CoalescentM& m, double eps) {
  m.validate();
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps_trunc must lie in (0, 1)");
  GfviRates g;
  g.c1_eff = m.c1 + m.nu1_small_second_moment(eps);
  g.c0_eff = m.c0 + m.nu0_small_first_moment(eps);
  g.big_rep = m.nu1_mass_above(eps);
  g.big_imm = m.nu0_mass_above(eps);
  return g;
}

GfviTrajectory sim_gfvi(const CoalescentM& m, const GfviOptions& opts, Stream& rng) {
  return sim_gfvi(m, opts, initial_types(opts), rng);
}

GfviTrajectory sim_gfvi(const CoalescentM& m, const GfviOptions& opts,
                        std::vector<double> initial, Stream& rng) {
  if (opts.n < 2) throw std::invalid_argument("need at least two particles");
  if (initial.size() != static_cast<std::size_t>(opts.n))
    throw std::invalid_argument("initial configuration must have n types");
  for (double x : initial)
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("types must lie in [0, 1]");
  if (!std::is_sorted(opts.observe_times.begin(), opts.observe_times.end()))
    throw std::invalid_argument("observe_times must be sorted");
  for (double t : opts.observe_times)
    if (t < 0.0 || t > opts.horizon) throw std::invalid_argument("observe time outside horizon");

  const GfviRates g = gfvi_rates(m, opts.eps_trunc);
  std::optional<TruncatedPowerSampler> rep_size, imm_size;
  if (g.big_rep > 0.0) rep_size.emplace(m.nu1->a - 3.0, m.nu1->b - 1.0, opts.eps_trunc);
  if (g.big_imm > 0.0) imm_size.emplace(m.nu0->a - 2.0, m.nu0->b - 1.0, opts.eps_trunc);

  const auto n = static_cast<std::size_t>(opts.n);
  const double dn = static_cast<double>(n);
  const double rate_pairs = g.c1_eff * dn * (dn - 1.0) / 2.0;
  const double rate_king_imm = g.c0_eff * dn;
  const double total = rate_pairs + rate_king_imm + g.big_rep + g.big_imm;

  Particles ps(std::move(initial));
  GfviTrajectory out;
  std::size_t next_obs = 0;
  const auto observe_until = [&](double t_event) {
    while (next_obs < opts.observe_times.size() && opts.observe_times[next_obs] < t_event) {
      out.times.push_back(opts.observe_times[next_obs]);
      out.frac_type0.push_back(ps.frac_zero());
      out.distinct_types.push_back(count_distinct(ps.types()));
      if (opts.keep_types) out.types.push_back(ps.types());
      ++next_obs;
    }
  };

  double t = 0.0;
  while (true) {
    t += total > 0.0 ? sample_exponential(rng, total) : opts.horizon + 1.0;
    observe_until(t);
    if (t > opts.horizon) break;
    ++out.event_count;
    double u = uniform_open(rng) * total;
    GfviEvent ev{t, GfviEventKind::king_rep, 0.0};
    if ((u -= rate_pairs) < 0.0) {
      const std::size_t i = uniform_index(rng, n);
      std::size_t j = uniform_index(rng, n - 1);
      if (j >= i) ++j;
      ps.set(i, ps.type(j));
    } else if ((u -= rate_king_imm) < 0.0) {
      ev.kind = GfviEventKind::king_imm;
      ps.set(uniform_index(rng, n), 0.0);
    } else if ((u -= g.big_rep) < 0.0) {
      ev.kind = GfviEventKind::big_rep;
      ev.r = (*rep_size)(rng);
      const double parent = ps.type(uniform_index(rng, n));
      const auto k = static_cast<std::size_t>(sample_binomial(rng, static_cast<std::int64_t>(n), ev.r));
      ps.for_random_subset(k, rng, [&](std::size_t i) { ps.set(i, parent); });
    } else {
      ev.kind = GfviEventKind::big_imm;
      ev.r = (*imm_size)(rng);
      const auto k = static_cast<std::size_t>(sample_binomial(rng, static_cast<std::int64_t>(n), ev.r));
      ps.for_random_subset(k, rng, [&](std::size_t i) { ps.set(i, 0.0); });
    }
    if (opts.record_events) out.events.push_back(ev);
  }
  return out;
}

std::vector<GfviTrajectory> gfvi_replicates(const CoalescentM& m, const GfviOptions& opts,
                                            std::int64_t reps, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("need at least one replicate");
  std::vector<GfviTrajectory> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), [&](std::size_t i) {
    Stream rng(seed, derive_stream_id(kGfviTag, i));
    out[i] = sim_gfvi(m, opts, rng);
  });
  return out;
}

Estimate moment_estimate(const std::vector<GfviTrajectory>& trajs, double t, int p,
                         const IndicatorSet& a, int n) {
  if (p < 1 || 10 * p > n) throw std::invalid_argument("moment order must satisfy 1 <= p <= n/10");
  std::vector<double> vals;
  vals.reserve(trajs.size());
  for (const auto& tr : trajs) {
    const auto it = std::find(tr.times.begin(), tr.times.end(), t);
    if (it == tr.times.end()) throw std::out_of_range("time was not observed");
    const auto idx = static_cast<std::size_t>(it - tr.times.begin());
    double mass;
    if (a.is_zero_atom()) {
      mass = tr.frac_type0[idx];
    } else {
      if (tr.types.empty()) throw std::invalid_argument("indicator functional needs keep_types");
      const auto& ty = tr.types[idx];
      mass = static_cast<double>(std::count_if(ty.begin(), ty.end(),
                                               [&](double x) { return a.contains(x); })) /
             static_cast<double>(ty.size());
    }
    vals.push_back(std::pow(mass, p));
  }
  return estimate(std::span<const double>(vals));
}

void write_gfvi_csv(std::ostream& os, const std::vector<GfviTrajectory>& trajs, bool header) {
  if (header) os << "rep_id,time,frac_type0,distinct_types\n";
  for (std::size_t r = 0; r < trajs.size(); ++r) {
    const auto& tr = trajs[r];
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      os << r << ',' << format_double(tr.times[i]) << ',' << format_double(tr.frac_type0[i]) << ','
         << tr.distinct_types[i] << '\n';
  }
}

}  // namespace fvlab
