#include "fvlab/mechanisms.hpp"

#include "fvlab/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fvlab {
namespace {

void require_nonneg(double q, const char* what) {
  if (!(q >= 0.0)) throw std::domain_error(std::string(what) + ": argument must be >= 0");
}

// int_eps^1 r^gamma (1 - r)^delta dr, delta > -1.
double power_law_mass(double gamma, double delta, double eps) {
  if (eps >= 1.0) return 0.0;
  QuadratureOptions opts;
  opts.rel_tol = 1e-13;
  double total = 0.0;
  const double split = std::max(eps, 0.5);
  if (eps < 0.5) {
    total += integrate(
                 [&](double s) {
                   const double r = std::exp(s);
                   return std::pow(r, gamma + 1.0) * std::pow(1.0 - r, delta);
                 },
                 std::log(eps), std::log(0.5), opts)
                 .value;
  }
  // Reflected, s = 1 - r, so the (1 - r)^delta factor is evaluated exactly.
  opts.left_power = endpoint_power(delta);
  total += integrate([&](double s) { return std::pow(1.0 - s, gamma) * std::pow(s, delta); },
                     0.0, 1.0 - split, opts)
               .value;
  return total;
}

}  // namespace

double stable_scale(double alpha) {
  return boost::math::tgamma(2.0 - alpha) / (alpha * (alpha - 1.0));
}

double StableCase::d() const { return stable_scale(alpha) * c; }
double StableCase::dprime() const { return stable_scale(alpha) * cprime; }

Mechanism Mechanism::feller(double sigma2, double beta) {
  if (!(sigma2 >= 0.0) || !(beta >= 0.0))
    throw std::invalid_argument("feller mechanism: sigma2 and beta must be >= 0");
  if (!(sigma2 > 0.0 || beta > 0.0))
    throw std::invalid_argument("feller mechanism: need sigma2 > 0 or beta > 0");
  return Mechanism(FellerCase{sigma2, beta});
}

Mechanism Mechanism::stable(double alpha, double c, double cprime) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::invalid_argument("stable mechanism: alpha must lie strictly inside (1, 2)");
  if (!(c >= 0.0) || !(cprime >= 0.0))
    throw std::invalid_argument("stable mechanism: c and cprime must be >= 0");
  return Mechanism(StableCase{alpha, c, cprime});
}

Mechanism Mechanism::stable_from_d(double alpha, double d, double dprime) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::invalid_argument("stable mechanism: alpha must lie strictly inside (1, 2)");
  const double k = stable_scale(alpha);
  return stable(alpha, d / k, dprime / k);
}

const FellerCase& Mechanism::feller_params() const {
  if (!is_feller()) throw std::logic_error("mechanism is not in the Feller case");
  return std::get<FellerCase>(p_);
}

const StableCase& Mechanism::stable_params() const {
  if (!is_stable()) throw std::logic_error("mechanism is not in the stable case");
  return std::get<StableCase>(p_);
}

double Mechanism::clock_exponent() const noexcept {
  return is_feller() ? 2.0 : std::get<StableCase>(p_).alpha;
}

Mechanism Mechanism::without_immigration() const {
  if (is_feller()) {
    Mechanism m = *this;
    std::get<FellerCase>(m.p_).beta = 0.0;
    return m;
  }
  Mechanism m = *this;
  std::get<StableCase>(m.p_).cprime = 0.0;
  return m;
}

std::string Mechanism::describe() const {
  std::ostringstream os;
  if (is_feller()) {
    const auto& f = feller_params();
    os << "feller(sigma2=" << f.sigma2 << ", beta=" << f.beta << ")";
  } else {
    const auto& s = stable_params();
    os << "stable(alpha=" << s.alpha << ", c=" << s.c << ", cprime=" << s.cprime << ")";
  }
  return os.str();
}

double psi(const Mechanism& mech, double q) {
  require_nonneg(q, "psi");
  if (mech.is_feller()) return 0.5 * mech.feller_params().sigma2 * q * q;
  const auto& s = mech.stable_params();
  return s.d() * std::pow(q, s.alpha);
}

double phi(const Mechanism& mech, double q) {
  require_nonneg(q, "phi");
  if (mech.is_feller()) return mech.feller_params().beta * q;
  const auto& s = mech.stable_params();
  if (q == 0.0) return 0.0;
  return s.dprime() * s.alpha * std::pow(q, s.alpha - 1.0);
}

double flow_v(const Mechanism& mech, double t, double q) {
  require_nonneg(t, "flow_v");
  if (!(q > 0.0)) throw std::domain_error("flow_v: q must be > 0");
  if (mech.is_feller()) {
    const double s2 = mech.feller_params().sigma2;
    return q / (1.0 + 0.5 * s2 * q * t);
  }
  const auto& s = mech.stable_params();
  const double a1 = s.alpha - 1.0;
  return std::pow(std::pow(q, -a1) + a1 * s.d() * t, -1.0 / a1);
}

double phi_integral(const Mechanism& mech, double t, double q) {
  require_nonneg(t, "phi_integral");
  if (!(q > 0.0)) throw std::domain_error("phi_integral: q must be > 0");
  if (mech.is_feller()) {
    const auto& f = mech.feller_params();
    if (f.sigma2 == 0.0) return f.beta * q * t;
    return 2.0 * f.beta / f.sigma2 * std::log1p(0.5 * f.sigma2 * q * t);
  }
  const auto& s = mech.stable_params();
  const double a1 = s.alpha - 1.0;
  const double d = s.d();
  const double dp = s.dprime();
  if (d == 0.0) return dp * s.alpha * std::pow(q, a1) * t;
  return dp * s.alpha / (d * a1) * std::log1p(a1 * d * t * std::pow(q, a1));
}

double cbi_laplace(const Mechanism& mech, double x, double t, double q) {
  require_nonneg(x, "cbi_laplace");
  return std::exp(-x * flow_v(mech, t, q) - phi_integral(mech, t, q));
}

ConservativityReport conservativity_report(const Mechanism& mech, double eps) {
  ConservativityReport rep;
  rep.conservative = true;
  const bool degenerate =
      mech.is_feller() ? mech.feller_params().sigma2 == 0.0 : mech.stable_params().c == 0.0;
  for (int k = 2; k <= 8; ++k) rep.cutoffs.push_back(std::pow(10.0, -k) * eps);
  if (degenerate) {
    rep.integrals.assign(rep.cutoffs.size(), INFINITY);
    rep.numeric_divergence = true;
    return rep;
  }
  QuadratureOptions opts;
  opts.rel_tol = 1e-10;
  for (double delta : rep.cutoffs) {
    const auto r = integrate(
        [&](double s) {
          const double q = std::exp(s);
          return q / psi(mech, q);
        },
        std::log(delta), std::log(eps), opts);
    rep.integrals.push_back(r.value);
  }
  // Decade increments of a convergent integral shrink geometrically; those of
  // int dq / q^p with p >= 1 stay level or grow.
  bool growing = true;
  for (std::size_t i = 2; i < rep.integrals.size(); ++i) {
    const double prev = rep.integrals[i - 1] - rep.integrals[i - 2];
    const double cur = rep.integrals[i] - rep.integrals[i - 1];
    if (!(cur >= 0.999 * prev)) growing = false;
  }
  rep.numeric_divergence = growing;
  return rep;
}

bool conservativity_check(const Mechanism& mech) {
  return conservativity_report(mech).conservative;
}

double BetaLambda::total_mass() const { return scale == 0.0 ? 0.0 : scale * beta_fn(a, b); }

void CoalescentM::validate() const {
  if (!(c0 >= 0.0) || !(c1 >= 0.0))
    throw std::invalid_argument("coalescent M: c0 and c1 must be >= 0");
  for (const auto* part : {&nu0, &nu1}) {
    if (!*part) continue;
    const auto& b = **part;
    if (!(b.a > 0.0) || !(b.b > 0.0) || !(b.scale >= 0.0))
      throw std::invalid_argument("coalescent M: Beta parameters must be > 0, scale >= 0");
  }
}

double CoalescentM::lambda0_mass() const { return c0 + (nu0 ? nu0->total_mass() : 0.0); }
double CoalescentM::lambda1_mass() const { return c1 + (nu1 ? nu1->total_mass() : 0.0); }

double CoalescentM::nu0_density(double r) const {
  if (!nu0 || nu0->scale == 0.0) return 0.0;
  return nu0->scale * std::pow(r, nu0->a - 2.0) * std::pow(1.0 - r, nu0->b - 1.0);
}

double CoalescentM::nu1_density(double r) const {
  if (!nu1 || nu1->scale == 0.0) return 0.0;
  return nu1->scale * std::pow(r, nu1->a - 3.0) * std::pow(1.0 - r, nu1->b - 1.0);
}

double CoalescentM::nu0_mass_above(double eps) const {
  if (!nu0 || nu0->scale == 0.0) return 0.0;
  return nu0->scale * power_law_mass(nu0->a - 2.0, nu0->b - 1.0, eps);
}

double CoalescentM::nu1_mass_above(double eps) const {
  if (!nu1 || nu1->scale == 0.0) return 0.0;
  return nu1->scale * power_law_mass(nu1->a - 3.0, nu1->b - 1.0, eps);
}

double CoalescentM::nu0_small_first_moment(double eps) const {
  if (!nu0 || nu0->scale == 0.0) return 0.0;
  return nu0->scale * incomplete_beta(nu0->a, nu0->b, eps);
}

double CoalescentM::nu1_small_second_moment(double eps) const {
  if (!nu1 || nu1->scale == 0.0) return 0.0;
  return nu1->scale * incomplete_beta(nu1->a, nu1->b, eps);
}

std::string CoalescentM::describe() const {
  std::ostringstream os;
  os << "M(c0=" << c0 << ", c1=" << c1;
  if (nu0) os << ", Lambda0 += " << nu0->scale << "*Beta(" << nu0->a << "," << nu0->b << ")";
  if (nu1) os << ", Lambda1 += " << nu1->scale << "*Beta(" << nu1->a << "," << nu1->b << ")";
  os << ")";
  return os.str();
}

CoalescentM theorem1_correspondence(const Mechanism& mech) {
  CoalescentM m;
  if (mech.is_feller()) {
    m.c0 = mech.feller_params().beta;
    m.c1 = mech.feller_params().sigma2;
    return m;
  }
  const auto& s = mech.stable_params();
  m.nu0 = BetaLambda{2.0 - s.alpha, s.alpha - 1.0, s.cprime};
  m.nu1 = BetaLambda{2.0 - s.alpha, s.alpha, s.c};
  return m;
}

}  // namespace fvlab
