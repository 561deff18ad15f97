#pragma once

#include "fvlab/mechanisms.hpp"
#include "fvlab/rng.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace fvlab {

enum class JumpSource { reproduction, immigration };

struct JumpRecord {
  double time = 0.0;
  double size = 0.0;
  JumpSource source = JumpSource::reproduction;
};

/// Sampled scalar trajectory. Jumps are aggregated per step and stamped with
/// the step's end time, so jump times are grid times.
struct PathGrid {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<JumpRecord> jumps;
  std::optional<double> absorbed_at;

  double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

/// Finite measure on [0,1]: an atom at 0 (immigrant mass) plus labelled cells.
struct AtomicMeasure {
  struct Cell {
    double label = 0.0;  // in (0, 1]
    double mass = 0.0;
  };
  double immigrant_mass = 0.0;
  std::vector<Cell> cells;

  double total_mass() const noexcept;
  /// eta / |eta|, or nullopt (the cemetery) when the total mass is 0.
  std::optional<AtomicMeasure> normalized() const;
};

/// Step-size policy. With clock_increment > 0 the step is
/// clamp(clock_increment * y^(alpha-1), min_dt, dt), which bounds the increment
/// of C per step and makes the stable scheme's work per step scale-free.
struct StepControl {
  double dt = 1e-3;
  double clock_increment = 0.0;
  double min_dt = 1e-9;
};

/// One-component transition kernel.
///
/// Feller case: exact. Y_{t+dt} = Gamma(N, u) + Gamma(2 beta / sigma2, u) with
/// u = sigma2 dt / 2 and N ~ Poisson(y / u).
///
/// Stable case: the step is split into substeps h with m(cut) * h <= kappa,
/// where cut = eps * max(scale, scale_floor) (scale defaults to the current y,
/// which keeps the scheme scale-free; the floor lets paths reach 0 in finitely
/// many steps) and m(cut) = c cut^(1-alpha) / (alpha - 1) is the
/// compensator of the jumps above cut. Each substep is the symmetric product
///   I(h/2) A(h/2) J(h) A(h/2) I(h/2)
/// with I the exact one-sided stable(alpha - 1) immigration increment, A the
/// subcritical Feller branching Psi(q) = m q + s2 q^2 / 2 (small jumps by
/// matched variance plus the compensator, Poisson-Gamma exact), and J the
/// pure-jump branching flow of the jumps above cut, simulated event by event.
class CbiStepper {
 public:
  struct StepJumps {
    double reproduction = 0.0;
    double immigration = 0.0;
  };

  CbiStepper(const Mechanism& mech, double eps_trunc, double kappa = 0.05,
             double scale_floor = 1e-8);

  double step(double y, double dt, Stream& rng, StepJumps* jumps = nullptr,
              double scale = 0.0) const;

  /// Median of the immigration increment over a step of length dt.
  double immigration_median(double dt) const;

  const Mechanism& mechanism() const noexcept { return mech_; }
  double eps_trunc() const noexcept { return eps_; }

 private:
  double feller_exact(double y, double dt, double sigma2, double beta, Stream& rng) const;
  double compensated_small_jumps(double y, double dt, double cut, Stream& rng) const;
  double large_jumps(double y, double dt, double cut, Stream& rng) const;
  double immigration_increment(double dt, Stream& rng) const;

  Mechanism mech_;
  double eps_;
  double kappa_;
  double floor_;
};

PathGrid sim_feller_cbi(const FellerCase& mech, double x0, double horizon, double dt,
                        Stream& rng);

PathGrid sim_stable_cbi(const StableCase& mech, double x0, double horizon, double dt,
                        double eps_trunc, Stream& rng);

/// General driver: any mechanism, any step policy.
PathGrid sim_cbi(const Mechanism& mech, double x0, double horizon, const StepControl& steps,
                 double eps_trunc, Stream& rng);

struct FlowOptions {
  int cells = 10;
  double horizon = 1.0;
  StepControl steps;
  double eps_trunc = 1e-3;
  /// > 0: stop as soon as the clock C of the total mass reaches this value
  /// and t >= min_time.
  double stop_clock = 0.0;
  double min_time = 0.0;
};

/// Flow of CBIs sampled on a common grid: immigrant atom Y_t(0) (a CBI started
/// at 0) plus `cells` independent CBs started at 1/cells, one per cell of (0,1].
struct FlowPath {
  std::vector<double> times;
  std::vector<AtomicMeasure> measures;
  /// Cumulative clock of the total mass at each grid time (+inf once absorbed).
  std::vector<double> clock;
  double clock_exponent = 2.0;
  bool reached_stop_clock = false;

  PathGrid total_mass_path() const;
};

FlowPath sim_flow(const Mechanism& mech, const FlowOptions& opts, Stream& rng);

/// C(t) = int_0^t Y_s^(1 - alpha) ds by the trapezoid rule on the grid,
/// linearly interpolated inside a step. +inf at or after absorption.
double time_change_C(const PathGrid& path, double alpha, double t);

/// Cumulative clock at every grid time.
std::vector<double> cumulative_clock(const PathGrid& path, double alpha);

/// Smallest grid time t with C(t) >= s.
double inverse_C(const PathGrid& path, double alpha, double s);

/// Index of the smallest grid time whose clock value is >= s, or nullopt.
std::optional<std::size_t> inverse_clock_index(const std::vector<double>& clock, double s);

/// Per-time normalisation; nullopt is the cemetery state.
std::vector<std::optional<AtomicMeasure>> ratio_process(
    const std::vector<AtomicMeasure>& measures);

struct HittingOptions {
  double x0 = 1.0;
  double horizon = 20.0;
  double dt = 0.05;
  double eps_abs = 1e-4;
  double eps_trunc = 1e-2;
  double clock_increment = 0.01;
  std::int64_t n_paths = 10000;
  std::uint64_t seed = 1;
};

struct HittingStats {
  double frequency = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t hits = 0;
  std::int64_t n_paths = 0;
};

/// Fraction of paths declared absorbed before the horizon: Y < eps_abs and the
/// median immigration increment over the next step is also below eps_abs.
HittingStats hitting_zero_stats(const Mechanism& mech, const HittingOptions& opts);

void write_path_csv(std::ostream& os, const std::vector<PathGrid>& paths, bool header = true);
void write_measure_csv(std::ostream& os, const std::vector<FlowPath>& flows, bool header = true);

}  // namespace fvlab
