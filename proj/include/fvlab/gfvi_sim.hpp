#pragma once

#include "fvlab/mechanisms.hpp"
#include "fvlab/rng.hpp"
#include "fvlab/stats.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace fvlab {

/// Draws from the law proportional to r^gamma (1 - r)^delta on (eps, 1],
/// delta > -1, by rejection from a two-piece power proposal.
class TruncatedPowerSampler {
 public:
  TruncatedPowerSampler(double gamma, double delta, double eps);
  double operator()(Stream& s) const;

 private:
  double gamma_, delta_, eps_;
  double split_;
  double bound_left_ = 0.0, bound_right_ = 0.0;
  double weight_left_ = 0.0;
};

enum class GfviEventKind { king_rep, king_imm, big_rep, big_imm };

struct GfviEvent {
  double time = 0.0;
  GfviEventKind kind = GfviEventKind::king_rep;
  double r = 0.0;  // event size; 0 for the Kingman kinds
};

struct GfviOptions {
  int n = 1000;
  double horizon = 1.0;
  double eps_trunc = 1e-3;
  /// Times at which the state is recorded (sorted, within [0, horizon]).
  std::vector<double> observe_times{0.5, 1.0};
  /// 0: all initial types distinct, (i + 1) / n. k > 0: k equal groups with
  /// labels (j + 1) / k.
  int initial_cells = 0;
  bool keep_types = false;
  bool record_events = false;
};

/// Moran embedding of the M-GFVI. Kingman reproduction: each unordered pair at
/// rate c1_eff, one member copies the other. Kingman immigration: each particle
/// becomes type 0 at rate c0_eff. Big events from nu_1 and nu_0 restricted to
/// r > eps_trunc: every particle independently adopts the type of a uniform
/// parent (resp. type 0) with probability r. Events with r <= eps_trunc are
/// folded into c1_eff = c1 + int_0^eps r^2 nu_1(dr), c0_eff = c0 + int_0^eps r nu_0(dr).
struct GfviRates {
  double c1_eff = 0.0;
  double c0_eff = 0.0;
  double big_rep = 0.0;  // nu_1((eps, 1])
  double big_imm = 0.0;  // nu_0((eps, 1])
};

GfviRates gfvi_rates(const CoalescentM& m, double eps_trunc);

struct GfviTrajectory {
  std::vector<double> times;
  std::vector<double> frac_type0;
  std::vector<int> distinct_types;
  std::vector<std::vector<double>> types;  // filled when keep_types is set
  std::vector<GfviEvent> events;
  std::int64_t event_count = 0;
};

GfviTrajectory sim_gfvi(const CoalescentM& m, const GfviOptions& opts, Stream& rng);

/// Same, from an explicit initial configuration (types in [0, 1]).
GfviTrajectory sim_gfvi(const CoalescentM& m, const GfviOptions& opts,
                        std::vector<double> initial, Stream& rng);

/// Independent replicates; replicate i uses stream (seed, derived id i).
std::vector<GfviTrajectory> gfvi_replicates(const CoalescentM& m, const GfviOptions& opts,
                                            std::int64_t reps, std::uint64_t seed);

/// f(x_1..x_p) = prod 1{lo <= x_i <= hi}; {0, 0} is the all-zero functional.
struct IndicatorSet {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  bool is_zero_atom() const noexcept { return lo == 0.0 && hi == 0.0; }
};

/// Mean over replicates of <f, rho_t^p> = rho_t(A)^p, i.e. the expectation of
/// the p-sample product under with-replacement sampling from rho_t, evaluated
/// exactly per replicate. Requires p <= n / 10 and t among the observed times.
Estimate moment_estimate(const std::vector<GfviTrajectory>& trajs, double t, int p,
                         const IndicatorSet& a, int n);

void write_gfvi_csv(std::ostream& os, const std::vector<GfviTrajectory>& trajs,
                    bool header = true);

}  // namespace fvlab
