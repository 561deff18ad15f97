#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fvlab {

/// Feller branching diffusion with linear immigration:
/// Psi(q) = sigma2 q^2 / 2, Phi(q) = beta q.
struct FellerCase {
  double sigma2 = 0.0;
  double beta = 0.0;
};

/// Stable branching with stable(alpha - 1) immigration:
/// nu_hat_1(dh) = c h^(-1-alpha) dh, nu_hat_0(dh) = cprime h^(-alpha) dh,
/// Psi(q) = d q^alpha, Phi(q) = dprime alpha q^(alpha-1).
struct StableCase {
  double alpha = 1.5;
  double c = 0.0;
  double cprime = 0.0;

  double d() const;
  double dprime() const;
};

/// Gamma(2 - alpha) / (alpha (alpha - 1)), the factor between c and d.
double stable_scale(double alpha);

class Mechanism {
 public:
  static Mechanism feller(double sigma2, double beta);
  static Mechanism stable(double alpha, double c, double cprime);
  static Mechanism stable_from_d(double alpha, double d, double dprime);

  bool is_feller() const noexcept { return std::holds_alternative<FellerCase>(p_); }
  bool is_stable() const noexcept { return std::holds_alternative<StableCase>(p_); }
  const FellerCase& feller_params() const;
  const StableCase& stable_params() const;

  /// alpha in the stable case, 2 in the Feller case. Exponent of the clock
  /// C(t) = int Y^(1 - alpha).
  double clock_exponent() const noexcept;

  /// Same branching mechanism with the immigration switched off.
  Mechanism without_immigration() const;

  std::string describe() const;

 private:
  explicit Mechanism(FellerCase f) : p_(f) {}
  explicit Mechanism(StableCase s) : p_(s) {}
  std::variant<FellerCase, StableCase> p_;
};

double psi(const Mechanism& mech, double q);
double phi(const Mechanism& mech, double q);

/// Solution of dv/dt = -Psi(v), v_0 = q.
double flow_v(const Mechanism& mech, double t, double q);

/// int_0^t Phi(v_s(q)) ds in closed form.
double phi_integral(const Mechanism& mech, double t, double q);

/// E_x[exp(-q Y_t)] = exp(-x v_t(q) - int_0^t Phi(v_s(q)) ds).
double cbi_laplace(const Mechanism& mech, double x, double t, double q);

struct ConservativityReport {
  bool conservative = true;        // critical mechanisms always are
  bool numeric_divergence = true;  // observed growth of int_delta^eps dq / Psi
  std::vector<double> cutoffs;     // lower limits delta
  std::vector<double> integrals;   // int_delta^eps dq / Psi(q)
};

ConservativityReport conservativity_report(const Mechanism& mech, double eps = 1.0);
bool conservativity_check(const Mechanism& mech);

/// scale * Beta(a, b)(dr): the non-Dirac part of a Lambda measure.
struct BetaLambda {
  double a = 1.0;
  double b = 1.0;
  double scale = 0.0;

  double total_mass() const;
};

/// M = (Lambda_0, Lambda_1) with
///   Lambda_0 = c0 delta_0 + nu0,   nu_0(dr) = r^-1 Lambda_0(dr) on (0,1],
///   Lambda_1 = c1 delta_0 + nu1,   nu_1(dr) = r^-2 Lambda_1(dr) on (0,1].
struct CoalescentM {
  double c0 = 0.0;
  double c1 = 0.0;
  std::optional<BetaLambda> nu0;
  std::optional<BetaLambda> nu1;

  void validate() const;
  double lambda0_mass() const;
  double lambda1_mass() const;

  /// Density of nu_0 (resp. nu_1) at r in (0, 1).
  double nu0_density(double r) const;
  double nu1_density(double r) const;

  /// nu_0((eps, 1]) and nu_1((eps, 1]).
  double nu0_mass_above(double eps) const;
  double nu1_mass_above(double eps) const;

  /// int_0^eps r nu_0(dr) and int_0^eps r^2 nu_1(dr): the small events folded
  /// into c0 and c1 by truncated simulators.
  double nu0_small_first_moment(double eps) const;
  double nu1_small_second_moment(double eps) const;

  std::string describe() const;
};

CoalescentM theorem1_correspondence(const Mechanism& mech);

}  // namespace fvlab
