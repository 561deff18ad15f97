#include "fvlab/cbi_sim.hpp"

#include "fvlab/io.hpp"
#include "fvlab/parallel.hpp"
#include "fvlab/samplers.hpp"
#include "fvlab/stats.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace fvlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kHittingTag = 0x68697474696e67ull;

double clock_rate(double y, double alpha) {
  if (y <= 0.0) return kInf;
  return std::pow(y, 1.0 - alpha);
}

double next_step(const StepControl& sc, double y, double alpha) {
  if (sc.clock_increment <= 0.0) return sc.dt;
  const double adaptive = sc.clock_increment * std::pow(std::max(y, 0.0), alpha - 1.0);
  return std::clamp(adaptive, sc.min_dt, sc.dt);
}

double cached_stable_median(double beta) {
  static std::mutex mutex;
  static std::map<double, double> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(beta);
  if (it == cache.end()) it = cache.emplace(beta, positive_stable_quantile(beta, 0.5)).first;
  return it->second;
}

bool has_immigration(const Mechanism& m) {
  return m.is_feller() ? m.feller_params().beta > 0.0 : m.stable_params().cprime > 0.0;
}

void validate_steps(const StepControl& sc) {
  if (!(sc.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (sc.clock_increment > 0.0 && !(sc.min_dt > 0.0 && sc.min_dt <= sc.dt))
    throw std::invalid_argument("min_dt must lie in (0, dt]");
}

}  // namespace

double AtomicMeasure::total_mass() const noexcept {
  double z = immigrant_mass;
  for (const auto& c : cells) z += c.mass;
  return z;
}

std::optional<AtomicMeasure> AtomicMeasure::normalized() const {
  const double z = total_mass();
  if (!(z > 0.0)) return std::nullopt;
  AtomicMeasure out = *this;
  out.immigrant_mass /= z;
  for (auto& c : out.cells) c.mass /= z;
  return out;
}

CbiStepper::CbiStepper(const Mechanism& mech, double eps_trunc, double kappa, double scale_floor)
    : mech_(mech), eps_(eps_trunc), kappa_(kappa), floor_(scale_floor) {
  if (!(kappa_ > 0.0)) throw std::invalid_argument("kappa must be > 0");
  if (!(floor_ > 0.0)) throw std::invalid_argument("scale_floor must be > 0");
  if (mech_.is_stable()) {
    if (!(eps_trunc > 0.0 && eps_trunc < 1.0))
      throw std::invalid_argument("eps_trunc must lie in (0, 1)");
  }
}

double CbiStepper::feller_exact(double y, double dt, double sigma2, double beta,
                                Stream& rng) const {
  if (sigma2 == 0.0) return y + beta * dt;
  const double u = 0.5 * sigma2 * dt;
  double out = 0.0;
  if (y > 0.0) {
    const auto n = sample_poisson(rng, y / u);
    if (n > 0) out += sample_gamma(rng, static_cast<double>(n), u);
  }
  if (beta > 0.0) out += sample_gamma(rng, 2.0 * beta / sigma2, u);
  return out;
}

double CbiStepper::compensated_small_jumps(double y, double dt, double cut, Stream& rng) const {
  const auto& s = mech_.stable_params();
  if (s.c == 0.0 || y <= 0.0 || cut <= 0.0) return y;
  const double a = s.alpha;
  const double drift = s.c * std::pow(cut, 1.0 - a) / (a - 1.0);
  const double var = s.c * std::pow(cut, 2.0 - a) / (2.0 - a);
  // v_t(q) = A q / (1 + B q): Poisson(y A / B) clusters of Exp(B) mass.
  const double survive = std::exp(-drift * dt);
  const double spread = var * (-std::expm1(-drift * dt)) / (2.0 * drift);
  const auto n = sample_poisson(rng, y * survive / spread);
  return n > 0 ? sample_gamma(rng, static_cast<double>(n), spread) : 0.0;
}

double CbiStepper::immigration_increment(double dt, Stream& rng) const {
  const auto& s = mech_.stable_params();
  if (s.cprime == 0.0 || dt <= 0.0) return 0.0;
  const double b = s.alpha - 1.0;
  const double exponent_scale = s.cprime * boost::math::tgamma(2.0 - s.alpha) / b;
  return std::pow(exponent_scale * dt, 1.0 / b) * sample_positive_stable(rng, b);
}

double CbiStepper::large_jumps(double y, double dt, double cut, Stream& rng) const {
  // The pure-jump branching flow, run exactly: each unit of mass fires at rate
  // nu_hat_1((cut, inf)) and offspring mass fires in turn.
  const auto& s = mech_.stable_params();
  if (s.c == 0.0 || y <= 0.0) return 0.0;
  const double rate = s.c * std::pow(cut, -s.alpha) / s.alpha;
  double big = 0.0;
  double clock = 0.0;
  while (true) {
    clock += sample_exponential(rng, rate * (y + big));
    if (clock > dt) break;
    big += sample_pareto(rng, cut, s.alpha);
  }
  return big;
}

double CbiStepper::step(double y, double dt, Stream& rng, StepJumps* jumps,
                        double scale) const {
  if (jumps) *jumps = {};
  if (mech_.is_feller()) {
    const auto& f = mech_.feller_params();
    return feller_exact(y, dt, f.sigma2, f.beta, rng);
  }
  const auto& s = mech_.stable_params();
  const double a = s.alpha;
  // Compensator drift m(cut); substeps keep m * h <= kappa.
  const auto drift = [&](double cut) { return s.c * std::pow(cut, 1.0 - a) / (a - 1.0); };

  double remaining = dt;
  while (remaining > 0.0) {
    const double ref = std::max(scale > 0.0 ? scale : y, floor_);
    double h = remaining;
    if (s.c > 0.0) h = std::min(remaining, kappa_ / drift(eps_ * ref));
    if (remaining - h <= 1e-12 * dt) h = remaining;

    const double imm1 = immigration_increment(0.5 * h, rng);
    y += imm1;
    const double cut = eps_ * std::max(scale > 0.0 ? scale : y, floor_);
    y = compensated_small_jumps(y, 0.5 * h, cut, rng);
    const double big = large_jumps(y, h, cut, rng);
    y += big;
    y = compensated_small_jumps(y, 0.5 * h, cut, rng);
    const double imm2 = immigration_increment(0.5 * h, rng);
    y += imm2;
    if (jumps) {
      jumps->reproduction += big;
      jumps->immigration += imm1 + imm2;
    }
    remaining -= h;
    if (y == 0.0 && s.cprime == 0.0) break;
  }
  return y;
}

double CbiStepper::immigration_median(double dt) const {
  if (mech_.is_feller()) {
    const auto& f = mech_.feller_params();
    if (f.beta == 0.0) return 0.0;
    if (f.sigma2 == 0.0) return f.beta * dt;
    const boost::math::gamma_distribution<double> g(2.0 * f.beta / f.sigma2,
                                                    0.5 * f.sigma2 * dt);
    return boost::math::quantile(g, 0.5);
  }
  const auto& s = mech_.stable_params();
  if (s.cprime == 0.0) return 0.0;
  const double b = s.alpha - 1.0;
  const double exponent_scale = s.cprime * boost::math::tgamma(2.0 - s.alpha) / b;
  return std::pow(exponent_scale * dt, 1.0 / b) * cached_stable_median(b);
}

PathGrid sim_cbi(const Mechanism& mech, double x0, double horizon, const StepControl& steps,
                 double eps_trunc, Stream& rng) {
  validate_steps(steps);
  if (!(x0 >= 0.0)) throw std::invalid_argument("x0 must be >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
  const CbiStepper stepper(mech, eps_trunc);
  const double alpha = mech.clock_exponent();
  const bool immigrates = has_immigration(mech);

  PathGrid path;
  path.times.push_back(0.0);
  path.values.push_back(x0);
  double t = 0.0;
  double y = x0;
  CbiStepper::StepJumps jumps;
  while (t < horizon) {
    if (y == 0.0 && !immigrates) {
      path.absorbed_at = t;
      if (t < horizon) {
        path.times.push_back(horizon);
        path.values.push_back(0.0);
      }
      break;
    }
    double dt = next_step(steps, y, alpha);
    if (t + dt > horizon || horizon - (t + dt) < 1e-12 * horizon) dt = horizon - t;
    y = stepper.step(y, dt, rng, &jumps);
    t = (dt == horizon - t) ? horizon : t + dt;
    path.times.push_back(t);
    path.values.push_back(y);
    if (jumps.reproduction > 0.0)
      path.jumps.push_back({t, jumps.reproduction, JumpSource::reproduction});
    if (jumps.immigration > 0.0)
      path.jumps.push_back({t, jumps.immigration, JumpSource::immigration});
    if (y == 0.0 && !immigrates) path.absorbed_at = t;
  }
  return path;
}

PathGrid sim_feller_cbi(const FellerCase& mech, double x0, double horizon, double dt,
                        Stream& rng) {
  if (!(dt > 0.0) || horizon < dt) throw std::invalid_argument("need dt > 0 and horizon >= dt");
  const Mechanism m = Mechanism::feller(mech.sigma2, mech.beta);
  return sim_cbi(m, x0, horizon, StepControl{dt, 0.0, dt}, 0.0, rng);
}

PathGrid sim_stable_cbi(const StableCase& mech, double x0, double horizon, double dt,
                        double eps_trunc, Stream& rng) {
  if (!(dt > 0.0) || horizon < dt) throw std::invalid_argument("need dt > 0 and horizon >= dt");
  if (!(eps_trunc > 0.0 && eps_trunc < 1.0))
    throw std::invalid_argument("eps_trunc must lie in (0, 1)");
  const Mechanism m = Mechanism::stable(mech.alpha, mech.c, mech.cprime);
  return sim_cbi(m, x0, horizon, StepControl{dt, 0.0, dt}, eps_trunc, rng);
}

PathGrid FlowPath::total_mass_path() const {
  PathGrid p;
  p.times = times;
  p.values.reserve(measures.size());
  for (std::size_t i = 0; i < measures.size(); ++i) {
    p.values.push_back(measures[i].total_mass());
    if (!p.absorbed_at && p.values.back() == 0.0) p.absorbed_at = times[i];
  }
  return p;
}

FlowPath sim_flow(const Mechanism& mech, const FlowOptions& opts, Stream& rng) {
  if (opts.cells < 1) throw std::invalid_argument("flow needs at least one cell");
  validate_steps(opts.steps);
  const CbiStepper immigrant(mech, opts.eps_trunc);
  const CbiStepper founder(mech.without_immigration(), opts.eps_trunc);
  const double alpha = mech.clock_exponent();
  const int k = opts.cells;

  std::vector<Stream> streams;
  streams.reserve(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j)
    streams.emplace_back(rng.seed(), derive_stream_id(rng.stream_id(), static_cast<std::uint64_t>(j)));

  AtomicMeasure m;
  m.immigrant_mass = 0.0;
  for (int j = 0; j < k; ++j)
    m.cells.push_back({static_cast<double>(j + 1) / k, 1.0 / k});

  FlowPath flow;
  flow.clock_exponent = alpha;
  flow.times.push_back(0.0);
  flow.measures.push_back(m);
  flow.clock.push_back(0.0);

  double t = 0.0;
  double z = m.total_mass();
  double clock = 0.0;
  while (t < opts.horizon) {
    if (opts.stop_clock > 0.0 && clock >= opts.stop_clock) {
      flow.reached_stop_clock = true;
      if (t >= opts.min_time) break;
    }
    double dt = next_step(opts.steps, z, alpha);
    if (t + dt >= opts.horizon) dt = opts.horizon - t;
    m.immigrant_mass = immigrant.step(m.immigrant_mass, dt, streams[0], nullptr, z);
    for (int j = 0; j < k; ++j)
      m.cells[j].mass = founder.step(m.cells[j].mass, dt, streams[j + 1], nullptr, z);
    const double znew = m.total_mass();
    clock += 0.5 * (clock_rate(z, alpha) + clock_rate(znew, alpha)) * dt;
    t = (dt == opts.horizon - t) ? opts.horizon : t + dt;
    z = znew;
    flow.times.push_back(t);
    flow.measures.push_back(m);
    flow.clock.push_back(clock);
    if (z == 0.0) break;
  }
  if (opts.stop_clock > 0.0 && clock >= opts.stop_clock) flow.reached_stop_clock = true;
  return flow;
}

std::vector<double> cumulative_clock(const PathGrid& path, double alpha) {
  std::vector<double> out(path.times.size(), 0.0);
  double c = 0.0;
  for (std::size_t i = 1; i < path.times.size(); ++i) {
    const double dt = path.times[i] - path.times[i - 1];
    c += 0.5 * (clock_rate(path.values[i - 1], alpha) + clock_rate(path.values[i], alpha)) * dt;
    out[i] = c;
  }
  return out;
}

double time_change_C(const PathGrid& path, double alpha, double t) {
  if (path.times.empty()) throw std::invalid_argument("empty path");
  if (t < 0.0) throw std::domain_error("time_change_C: t must be >= 0");
  if (path.absorbed_at && t >= *path.absorbed_at) return kInf;
  if (t > path.horizon() * (1.0 + 1e-12))
    throw std::out_of_range("time_change_C: t beyond the simulated horizon");
  const auto clock = cumulative_clock(path, alpha);
  const auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
  if (it == path.times.end()) return clock.back();
  const std::size_t i = static_cast<std::size_t>(it - path.times.begin());
  if (i == 0) return 0.0;
  const double t0 = path.times[i - 1], t1 = path.times[i];
  const double w = (t - t0) / (t1 - t0);
  if (!std::isfinite(clock[i])) return w == 0.0 ? clock[i - 1] : kInf;
  return clock[i - 1] + w * (clock[i] - clock[i - 1]);
}

std::optional<std::size_t> inverse_clock_index(const std::vector<double>& clock, double s) {
  const auto it = std::lower_bound(clock.begin(), clock.end(), s);
  if (it == clock.end()) return std::nullopt;
  return static_cast<std::size_t>(it - clock.begin());
}

double inverse_C(const PathGrid& path, double alpha, double s) {
  if (s < 0.0) throw std::domain_error("inverse_C: s must be >= 0");
  const auto clock = cumulative_clock(path, alpha);
  const auto idx = inverse_clock_index(clock, s);
  if (!idx) throw std::out_of_range("inverse_C: s beyond C(horizon); extend the horizon");
  return path.times[*idx];
}

std::vector<std::optional<AtomicMeasure>> ratio_process(
    const std::vector<AtomicMeasure>& measures) {
  std::vector<std::optional<AtomicMeasure>> out;
  out.reserve(measures.size());
  bool dead = false;
  for (const auto& m : measures) {
    if (!dead && m.total_mass() > 0.0) {
      out.push_back(m.normalized());
    } else {
      dead = true;
      out.push_back(std::nullopt);
    }
  }
  return out;
}

HittingStats hitting_zero_stats(const Mechanism& mech, const HittingOptions& opts) {
  if (!(opts.eps_abs > 0.0)) throw std::invalid_argument("eps_abs must be > 0");
  if (opts.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  const CbiStepper stepper(mech, opts.eps_trunc);
  const double alpha = mech.clock_exponent();
  const StepControl sc{opts.dt, opts.clock_increment, 1e-12};

  std::vector<char> hit(static_cast<std::size_t>(opts.n_paths), 0);
  parallel_for(hit.size(), [&](std::size_t i) {
    Stream rng(opts.seed, derive_stream_id(kHittingTag, i));
    double t = 0.0;
    double y = opts.x0;
    while (t < opts.horizon) {
      double dt = next_step(sc, y, alpha);
      if (y == 0.0 || (y < opts.eps_abs && stepper.immigration_median(dt) < opts.eps_abs)) {
        hit[i] = 1;
        return;
      }
      if (t + dt > opts.horizon) dt = opts.horizon - t;
      y = stepper.step(y, dt, rng);
      t += dt;
    }
  });

  HittingStats out;
  out.n_paths = opts.n_paths;
  for (char h : hit) out.hits += h;
  const double n = static_cast<double>(opts.n_paths);
  out.frequency = static_cast<double>(out.hits) / n;
  const double half = kZ99 * std::sqrt(out.frequency * (1.0 - out.frequency) / n);
  out.ci_low = std::max(0.0, out.frequency - half);
  out.ci_high = std::min(1.0, out.frequency + half);
  return out;
}

void write_path_csv(std::ostream& os, const std::vector<PathGrid>& paths, bool header) {
  if (header) os << "path_id,time,value,absorbed\n";
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& g = paths[p];
    for (std::size_t i = 0; i < g.times.size(); ++i) {
      const bool absorbed = g.absorbed_at && g.times[i] >= *g.absorbed_at;
      os << p << ',' << format_double(g.times[i]) << ',' << format_double(g.values[i]) << ','
         << (absorbed ? 1 : 0) << '\n';
    }
  }
}

void write_measure_csv(std::ostream& os, const std::vector<FlowPath>& flows, bool header) {
  if (header) os << "path_id,time,atom_label,mass\n";
  for (std::size_t p = 0; p < flows.size(); ++p) {
    const auto& f = flows[p];
    for (std::size_t i = 0; i < f.times.size(); ++i) {
      const auto& m = f.measures[i];
      const std::string t = format_double(f.times[i]);
      os << p << ',' << t << ",0," << format_double(m.immigrant_mass) << '\n';
      for (const auto& c : m.cells)
        os << p << ',' << t << ',' << format_double(c.label) << ',' << format_double(c.mass)
           << '\n';
    }
  }
}

}  // namespace fvlab
