#pragma once

#include "fvlab/cbi_sim.hpp"
#include "fvlab/mechanisms.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fvlab {

/// phi(x) = piecewise-linear interpolation of `nodes` on a 16-cell grid of
/// [0, 1] plus b1 x + b2 x^2.
struct PhiFn {
  static constexpr int kCells = 16;
  std::array<double, kCells + 1> nodes{};
  double b1 = 0.0;
  double b2 = 0.0;

  static PhiFn constant(double c);
  static PhiFn identity();
  double operator()(double x) const;
  double sup_norm() const;
};

/// psi in F(eta) = psi(|eta|) <phi, rho>^m, with stable differences.
struct PsiFn {
  enum class Kind { one, exp, rational };
  Kind kind = Kind::one;
  double q = 0.0;

  static PsiFn one() { return {}; }
  static PsiFn exp(double q) { return {Kind::exp, q}; }        // exp(-q z)
  static PsiFn rational(double q) { return {Kind::rational, q}; }  // 1 / (1 + q z)

  double value(double z) const;
  double d1(double z) const;
  double d2(double z) const;
  /// psi(z + h) - psi(z)
  double diff1(double z, double h) const;
  /// psi(z + h) - psi(z) - h psi'(z)
  double rem2(double z, double h) const;
};

struct TestFunctional {
  PhiFn phi;
  int m = 1;
  PsiFn psi;

  double value(const AtomicMeasure& eta) const;
};

/// Atoms of an AtomicMeasure as (location, mass), the immigrant atom first.
struct Atom {
  double x = 0.0;
  double w = 0.0;
};
std::vector<Atom> atoms_of(const AtomicMeasure& eta);

/// F'(eta; a) in closed form.
double gateaux(const TestFunctional& f, const AtomicMeasure& eta, double a);
/// F''(eta; a, b) in closed form.
double gateaux2(const TestFunctional& f, const AtomicMeasure& eta, double a, double b);
/// Central difference (F(eta + e delta_a) - F(eta - e delta_a)) / 2e, e = rel * |eta|.
double gateaux_fd(const TestFunctional& f, const AtomicMeasure& eta, double a, double rel = 1e-6);

/// Terms (1)-(4) of the measure-valued generator: sigma2 / 2 int F''(a, a) eta(da)
/// + beta F'(0) + the compensated nu_hat_1 integral + the nu_hat_0 integral.
/// The jump terms are integrated in r = h / (z + h).
double apply_L(const Mechanism& mech, const TestFunctional& f, const AtomicMeasure& eta);

/// Terms (1')-(4') of the GFVI generator on G_f, f = phi^(x m) (psi is ignored).
double apply_Fgen(const CoalescentM& m, const TestFunctional& g, const AtomicMeasure& rho);

/// The same value from the block-counting identity
/// sum_j C(m,j) lambda(m,j) (P^(m-j) M_j - P^m) + sum_j C(m,j) r(m,j) (P^(m-j) phi(0)^j - P^m),
/// with M_j = <phi^j, rho> and closed-form rates.
double apply_Fgen_by_rates(const CoalescentM& m, const TestFunctional& g,
                           const AtomicMeasure& rho);

/// Natural size of (generator G_f)(rho): total jump rate of m lineages times
/// max(|phi(0)|, max over atoms |phi(a)|)^m. Both generator forms are bounded by 2x this.
double generator_scale(const CoalescentM& m, const TestFunctional& g, const AtomicMeasure& rho);

/// |a - b| / max(|a|, |b|, floor).
double relative_deviation(double a, double b, double floor = 1e-12);

struct RandomSuiteOptions {
  int samples = 50;
  int max_atoms = 10;
  int max_m = 4;
  double mass_lo = 0.1;
  double mass_hi = 5.0;
  std::uint64_t seed = 1;
};

struct GenlabSample {
  AtomicMeasure eta;
  TestFunctional f;
};

/// Random atomic measures (atom count uniform on 1..max_atoms, locations uniform,
/// an atom pinned at 0 half the time, log-uniform masses) paired with random
/// test functionals (random node values and monomial weights in [0, 1], m
/// uniform on 1..max_m).
std::vector<GenlabSample> random_suite(const RandomSuiteOptions& opts);

/// max over samples of relative_deviation(z^(alpha-1) L F, (generator G_f)(rho)) with
/// F(eta) = <phi, rho>^m and M = theorem1_correspondence(mech). The
/// denominator is floored at 1e-8 generator_scale, so samples where both sides
/// vanish (one atom, constant phi) measure roundoff against the right scale.
double factorization_check(const Mechanism& mech, const std::vector<GenlabSample>& samples);

/// Polynomial sum_k coeffs[k] r^k.
struct Polynomial {
  std::vector<double> coeffs;
  double operator()(double r) const;
  /// Index of the lowest non-zero coefficient (coeffs.size() if none).
  int order() const;
};

struct PushforwardResult {
  double max_deviation = 0.0;
  std::vector<double> h_side;  // nu_hat_1 entries, then nu_hat_0 entries
  std::vector<double> r_side;
};

/// For each z and g: int g(h/(h+z)) nu_hat_1(dh) against
/// z^(-alpha) int g(r) r^-2 c Beta(2-alpha, alpha)(dr), and
/// int g(h/(h+z)) nu_hat_0(dh) against
/// z^(1-alpha) int g(r) r^-1 c' Beta(2-alpha, alpha-1)(dr).
/// Throws std::invalid_argument if g has order < 2 (nu_hat_1 side) or < 1.
PushforwardResult pushforward_check(const StableCase& mech, const std::vector<double>& zs,
                                    const std::vector<Polynomial>& polys);

struct GenlabCheck {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GenlabReport {
  std::vector<GenlabCheck> checks;
  bool all_passed() const;
};

struct GenlabConfig {
  RandomSuiteOptions suite;
  double feller_sigma2 = 2.0;
  double feller_beta = 1.0;
  double alpha = 1.5;
  double c = 1.0;
  double cprime = 1.0;
  std::vector<double> pushforward_z{0.5, 1.0, 2.0};
};

/// Gateaux finite differences, the int F' d eta = 0 identity, both
/// factorizations, the total-mass generator and the pushforward lemma.
GenlabReport run_genlab(const GenlabConfig& cfg);

}  // namespace fvlab
