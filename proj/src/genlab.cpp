#include "fvlab/genlab.hpp"

#include "fvlab/coalescent.hpp"
#include "fvlab/quadrature.hpp"
#include "fvlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fvlab {
namespace {

double binom(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// x^k with x^0 = 1 for every x (including 0) and k >= 0.
double ipow(double x, int k) { return k <= 0 ? 1.0 : std::pow(x, k); }

QuadratureOptions fine_options(double left_power) {
  QuadratureOptions o;
  o.left_power = left_power;
  o.max_depth = 30;
  return o;
}

// int_0^1 g(r, 1 - r) dr for an integrand behaving like r^e0 near 0 and
// (1 - r)^e1 near 1: [0, 1/2] directly and [1/2, 1] reflected, so both
// singular endpoints sit at an exactly representable 0.
double integrate_unit(const std::function<double(double, double)>& g, double e0, double e1) {
  const double left =
      integrate([&](double r) { return g(r, 1.0 - r); }, 0.0, 0.5, fine_options(endpoint_power(e0)))
          .value;
  const double right =
      integrate([&](double s) { return g(1.0 - s, s); }, 0.0, 0.5, fine_options(endpoint_power(e1)))
          .value;
  return left + right;
}

struct Summary {
  double z = 0.0;
  double p = 0.0;   // <phi, rho>
  double m2 = 0.0;  // <phi^2, rho>
};

Summary summarize(const TestFunctional& f, const std::vector<Atom>& atoms) {
  Summary s;
  for (const auto& a : atoms) {
    const double v = f.phi(a.x);
    s.z += a.w;
    s.p += a.w * v;
    s.m2 += a.w * v * v;
  }
  if (!(s.z > 0.0)) throw std::invalid_argument("measure must have positive total mass");
  s.p /= s.z;
  s.m2 /= s.z;
  return s;
}

double value_of(const TestFunctional& f, const std::vector<Atom>& atoms) {
  const Summary s = summarize(f, atoms);
  return f.psi.value(s.z) * ipow(s.p, f.m);
}

// eta + e delta_a as an atom list (a merged into an existing atom when present).
std::vector<Atom> perturbed(const std::vector<Atom>& atoms, double a, double e) {
  auto out = atoms;
  for (auto& at : out)
    if (at.x == a) {
      at.w += e;
      return out;
    }
  out.push_back({a, e});
  return out;
}

// sum_{j >= lo} C(m, j) P^(m-j) x^j
double binomial_tail(int m, double p, double x, int lo) {
  double s = 0.0;
  for (int j = lo; j <= m; ++j) s += binom(m, j) * ipow(p, m - j) * ipow(x, j);
  return s;
}

double log_uniform(Stream& s, double lo, double hi) {
  return lo * std::exp(uniform_open(s) * std::log(hi / lo));
}

GenlabCheck make_check(std::string name, double dev, double tol) {
  return {std::move(name), dev, tol, dev <= tol};
}

}  // namespace

PhiFn PhiFn::constant(double c) {
  PhiFn f;
  f.nodes.fill(c);
  return f;
}

PhiFn PhiFn::identity() {
  PhiFn f;
  f.b1 = 1.0;
  return f;
}

double PhiFn::operator()(double x) const {
  const double u = std::clamp(x, 0.0, 1.0) * kCells;
  const int i = std::min(static_cast<int>(u), kCells - 1);
  const double t = u - i;
  const auto k = static_cast<std::size_t>(i);
  return nodes[k] + t * (nodes[k + 1] - nodes[k]) + b1 * x + b2 * x * x;
}

double PhiFn::sup_norm() const {
  double s = 0.0;
  for (int i = 0; i <= 256; ++i) s = std::max(s, std::abs((*this)(i / 256.0)));
  return s;
}

double PsiFn::value(double z) const {
  switch (kind) {
    case Kind::one: return 1.0;
    case Kind::exp: return std::exp(-q * z);
    case Kind::rational: return 1.0 / (1.0 + q * z);
  }
  return 0.0;
}

double PsiFn::d1(double z) const {
  switch (kind) {
    case Kind::one: return 0.0;
    case Kind::exp: return -q * std::exp(-q * z);
    case Kind::rational: return -q / ((1.0 + q * z) * (1.0 + q * z));
  }
  return 0.0;
}

double PsiFn::d2(double z) const {
  switch (kind) {
    case Kind::one: return 0.0;
    case Kind::exp: return q * q * std::exp(-q * z);
    case Kind::rational: return 2.0 * q * q / std::pow(1.0 + q * z, 3);
  }
  return 0.0;
}

double PsiFn::diff1(double z, double h) const {
  switch (kind) {
    case Kind::one: return 0.0;
    case Kind::exp: return std::exp(-q * z) * std::expm1(-q * h);
    case Kind::rational: {
      const double a = 1.0 + q * z, b = q * h;
      return -b / (a * (a + b));
    }
  }
  return 0.0;
}

double PsiFn::rem2(double z, double h) const {
  switch (kind) {
    case Kind::one: return 0.0;
    case Kind::exp: {
      const double x = q * h;
      double r;
      if (x < 0.5) {
        // e^-x - 1 + x = sum_{k >= 2} (-x)^k / k!
        double term = x * x / 2.0;
        r = 0.0;
        for (int k = 2; k < 30 && term != 0.0; ++k) {
          r += term;
          term *= -x / (k + 1);
        }
      } else {
        r = std::exp(-x) - 1.0 + x;
      }
      return std::exp(-q * z) * r;
    }
    case Kind::rational: {
      const double a = 1.0 + q * z, b = q * h;
      return b * b / (a * a * (a + b));
    }
  }
  return 0.0;
}

std::vector<Atom> atoms_of(const AtomicMeasure& eta) {
  std::vector<Atom> out;
  if (eta.immigrant_mass != 0.0) out.push_back({0.0, eta.immigrant_mass});
  for (const auto& c : eta.cells)
    if (c.mass != 0.0) out.push_back({c.label, c.mass});
  return out;
}

double TestFunctional::value(const AtomicMeasure& eta) const { return value_of(*this, atoms_of(eta)); }

double gateaux(const TestFunctional& f, const AtomicMeasure& eta, double a) {
  const Summary s = summarize(f, atoms_of(eta));
  const int m = f.m;
  const double da = f.phi(a) - s.p;
  return f.psi.d1(s.z) * ipow(s.p, m) + f.psi.value(s.z) * m * ipow(s.p, m - 1) * da / s.z;
}

double gateaux2(const TestFunctional& f, const AtomicMeasure& eta, double a, double b) {
  const Summary s = summarize(f, atoms_of(eta));
  const int m = f.m;
  const double z = s.z, p = s.p;
  const double da = f.phi(a) - p, db = f.phi(b) - p;
  const double pm1 = ipow(p, m - 1);
  return f.psi.d2(z) * ipow(p, m) + f.psi.d1(z) * m * pm1 * (da + db) / z +
         f.psi.value(z) * (m / (z * z)) *
             ((m - 1) * ipow(p, m - 2) * da * db - pm1 * db - pm1 * da);
}

double gateaux_fd(const TestFunctional& f, const AtomicMeasure& eta, double a, double rel) {
  const auto atoms = atoms_of(eta);
  const double e = rel * eta.total_mass();
  return (value_of(f, perturbed(atoms, a, e)) - value_of(f, perturbed(atoms, a, -e))) / (2.0 * e);
}

double apply_L(const Mechanism& mech, const TestFunctional& f, const AtomicMeasure& eta) {
  const auto atoms = atoms_of(eta);
  const Summary s = summarize(f, atoms);
  const int m = f.m;
  const double z = s.z, p = s.p;
  const PsiFn& psi = f.psi;

  if (mech.is_feller()) {
    const auto& fp = mech.feller_params();
    const double diffusion =
        z * psi.d2(z) * ipow(p, m) + psi.value(z) * m * (m - 1) * ipow(p, m - 2) * (s.m2 - p * p) / z;
    return fp.sigma2 / 2.0 * diffusion + fp.beta * gateaux(f, eta, 0.0);
  }

  const auto& sp = mech.stable_params();
  const double alpha = sp.alpha;
  std::vector<double> d;
  for (const auto& at : atoms) d.push_back(f.phi(at.x) - p);
  const double pm = ipow(p, m);

  double jumps = 0.0;
  if (sp.c > 0.0) {
    // int nu_hat_1(dh) int eta(da) [F(eta + h delta_a) - F(eta) - h F'(eta; a)];
    // the first-order parts cancel exactly because sum_a w_a D_a = 0.
    const auto g = [&](double r, double sr) {
      const double h = z * r / sr;
      double inner = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i)
        inner += atoms[i].w * binomial_tail(m, p, r * d[i], 2);
      const double val = psi.value(z + h) * inner + z * pm * psi.rem2(z, h);
      return sp.c * std::pow(z, -alpha) * std::pow(r, -1.0 - alpha) * std::pow(sr, alpha - 1.0) * val;
    };
    jumps += integrate_unit(g, 1.0 - alpha, alpha - 2.0);
  }
  if (sp.cprime > 0.0) {
    const double d0 = f.phi(0.0) - p;
    const auto g = [&](double r, double sr) {
      const double h = z * r / sr;
      const double val = psi.value(z + h) * binomial_tail(m, p, r * d0, 1) + pm * psi.diff1(z, h);
      return sp.cprime * std::pow(z, 1.0 - alpha) * std::pow(r, -alpha) *
             std::pow(sr, alpha - 2.0) * val;
    };
    jumps += integrate_unit(g, 1.0 - alpha, alpha - 2.0);
  }
  return jumps;
}

double apply_Fgen(const CoalescentM& mc, const TestFunctional& g, const AtomicMeasure& rho) {
  mc.validate();
  const auto atoms = atoms_of(rho);
  const Summary s = summarize(g, atoms);
  const int m = g.m;
  const double p = s.p, phi0 = g.phi(0.0);
  double out = mc.c1 * binom(m, 2) * (ipow(p, m - 2) * s.m2 - ipow(p, m)) +
               mc.c0 * m * (phi0 * ipow(p, m - 1) - ipow(p, m));

  if (mc.nu1 && mc.nu1->scale > 0.0 && m >= 2) {
    const auto& b = *mc.nu1;
    std::vector<double> d;
    for (const auto& at : atoms) d.push_back(g.phi(at.x) - p);
    const auto f = [&](double r, double sr) {
      double inner = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i)
        inner += atoms[i].w * binomial_tail(m, p, r * d[i], 2);
      return b.scale * std::pow(r, b.a - 3.0) * std::pow(sr, b.b - 1.0) * inner / s.z;
    };
    out += integrate_unit(f, b.a - 1.0, b.b - 1.0);
  }
  if (mc.nu0 && mc.nu0->scale > 0.0) {
    const auto& b = *mc.nu0;
    const double d0 = phi0 - p;
    const auto f = [&](double r, double sr) {
      return b.scale * std::pow(r, b.a - 2.0) * std::pow(sr, b.b - 1.0) *
             binomial_tail(m, p, r * d0, 1);
    };
    out += integrate_unit(f, b.a - 1.0, b.b - 1.0);
  }
  return out;
}

double apply_Fgen_by_rates(const CoalescentM& mc, const TestFunctional& g, const AtomicMeasure& rho) {
  const auto atoms = atoms_of(rho);
  const Summary s = summarize(g, atoms);
  const int m = g.m;
  const auto table = rates(mc, std::max(m, 2));
  const double p = s.p, pm = ipow(p, m), phi0 = g.phi(0.0);
  double out = 0.0;
  for (int j = 2; j <= m; ++j) {
    double mj = 0.0;
    for (const auto& at : atoms) mj += at.w * ipow(g.phi(at.x), j);
    mj /= s.z;
    out += binom(m, j) * table.lambda(m, j) * (ipow(p, m - j) * mj - pm);
  }
  for (int j = 1; j <= m; ++j)
    out += binom(m, j) * table.r(m, j) * (ipow(p, m - j) * ipow(phi0, j) - pm);
  return out;
}

double generator_scale(const CoalescentM& mc, const TestFunctional& g, const AtomicMeasure& rho) {
  double top = std::abs(g.phi(0.0));
  for (const auto& at : atoms_of(rho)) top = std::max(top, std::abs(g.phi(at.x)));
  const int m = std::max(g.m, 2);
  return rates(mc, m).total_rate(g.m) * ipow(top, g.m);
}

double relative_deviation(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

std::vector<GenlabSample> random_suite(const RandomSuiteOptions& opts) {
  if (opts.samples < 1 || opts.max_atoms < 1 || opts.max_m < 1)
    throw std::invalid_argument("suite sizes must be positive");
  if (!(opts.mass_lo > 0.0 && opts.mass_hi >= opts.mass_lo))
    throw std::invalid_argument("mass range must satisfy 0 < lo <= hi");
  Stream s(opts.seed, 0x67656e6c6162ull);
  std::vector<GenlabSample> out;
  for (int k = 0; k < opts.samples; ++k) {
    GenlabSample g;
    const int n_atoms = 1 + static_cast<int>(uniform_open(s) * opts.max_atoms);
    const bool pinned = uniform_open(s) < 0.5;
    for (int i = 0; i < n_atoms; ++i) {
      const double w = log_uniform(s, opts.mass_lo, opts.mass_hi);
      if (pinned && i == 0)
        g.eta.immigrant_mass = w;
      else
        g.eta.cells.push_back({uniform_open(s), w});
    }
    for (auto& v : g.f.phi.nodes) v = uniform_open(s);
    g.f.phi.b1 = uniform_open(s);
    g.f.phi.b2 = uniform_open(s);
    g.f.m = 1 + static_cast<int>(uniform_open(s) * opts.max_m);
    const double u = uniform_open(s);
    const double q = 0.2 + 1.8 * uniform_open(s);
    g.f.psi = u < 1.0 / 3.0 ? PsiFn::one() : u < 2.0 / 3.0 ? PsiFn::exp(q) : PsiFn::rational(q);
    out.push_back(std::move(g));
  }
  return out;
}

double factorization_check(const Mechanism& mech, const std::vector<GenlabSample>& samples) {
  const CoalescentM mc = theorem1_correspondence(mech);
  const double alpha = mech.clock_exponent();
  double worst = 0.0;
  for (const auto& smp : samples) {
    TestFunctional f = smp.f;
    f.psi = PsiFn::one();
    const double z = smp.eta.total_mass();
    const double lhs = std::pow(z, alpha - 1.0) * apply_L(mech, f, smp.eta);
    const auto rho = *smp.eta.normalized();
    const double rhs = apply_Fgen(mc, f, rho);
    worst = std::max(worst, relative_deviation(lhs, rhs, 1e-8 * generator_scale(mc, f, rho)));
  }
  return worst;
}

double Polynomial::operator()(double r) const {
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * r + *it;
  return v;
}

int Polynomial::order() const {
  for (std::size_t k = 0; k < coeffs.size(); ++k)
    if (coeffs[k] != 0.0) return static_cast<int>(k);
  return static_cast<int>(coeffs.size());
}

PushforwardResult pushforward_check(const StableCase& sp, const std::vector<double>& zs,
                                    const std::vector<Polynomial>& polys) {
  const double alpha = sp.alpha;
  if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (1, 2)");
  for (const auto& g : polys)
    if (g.order() < 1) throw std::invalid_argument("test polynomials need order >= 1");
  for (double z : zs)
    if (!(z > 0.0)) throw std::invalid_argument("z must be positive");

  PushforwardResult res;
  for (int side = 1; side >= 0; --side) {
    // side 1: nu_hat_1 = c h^(-1-alpha); side 0: nu_hat_0 = c' h^(-alpha)
    const double scale = side == 1 ? sp.c : sp.cprime;
    const double hexp = side == 1 ? -1.0 - alpha : -alpha;
    for (double z : zs)
      for (const auto& g : polys) {
        const int k = g.order();
        if (side == 1 && k < 2)
          throw std::invalid_argument("nu_hat_1 test polynomials need order >= 2");
        const auto fh = [&](double h) {
          return g(h / (h + z)) * scale * std::pow(h, hexp);
        };
        const double lhs =
            integrate_to_infinity(fh, 0.0, z, fine_options(endpoint_power(k + hexp)),
                                  endpoint_power(-hexp - 2.0))
                .value;
        // dh = z / (1 - r)^2 dr, h = z r / (1 - r)
        const auto fr = [&](double r, double sr) {
          return g(r) * scale * std::pow(z, hexp + 1.0) * std::pow(r, hexp) *
                 std::pow(sr, -hexp - 2.0);
        };
        const double rhs = integrate_unit(fr, k + hexp, -hexp - 2.0);
        res.h_side.push_back(lhs);
        res.r_side.push_back(rhs);
        res.max_deviation = std::max(res.max_deviation, std::abs(lhs - rhs));
      }
  }
  return res;
}

bool GenlabReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const GenlabCheck& c) { return c.passed; });
}

GenlabReport run_genlab(const GenlabConfig& cfg) {
  const auto suite = random_suite(cfg.suite);
  const Mechanism feller = Mechanism::feller(cfg.feller_sigma2, cfg.feller_beta);
  const Mechanism stable = Mechanism::stable(cfg.alpha, cfg.c, cfg.cprime);
  Stream s(cfg.suite.seed, 0x6761746561ull);
  GenlabReport rep;

  // Gateaux derivatives against central differences, relative to the scale |F| / |eta|.
  double dev1 = 0.0, dev2 = 0.0, dev13 = 0.0;
  for (const auto& smp : suite) {
    const double z = smp.eta.total_mass();
    const double fval = smp.f.value(smp.eta);
    const double floor = std::max(std::abs(fval), 1e-300) / z;
    std::vector<double> points;
    for (const auto& at : atoms_of(smp.eta)) points.push_back(at.x);
    points.push_back(uniform_open(s));
    points.push_back(0.0);
    for (double a : points)
      dev1 = std::max(dev1, relative_deviation(gateaux(smp.f, smp.eta, a),
                                               gateaux_fd(smp.f, smp.eta, a), floor));
    const double a = points.front(), b = points[points.size() - 2];
    const double e = 1e-6 * z;
    AtomicMeasure plus = smp.eta, minus = smp.eta;
    const auto shift = [&](AtomicMeasure& m, double w) {
      if (b == 0.0) {
        m.immigrant_mass += w;
        return;
      }
      for (auto& c : m.cells)
        if (c.label == b) {
          c.mass += w;
          return;
        }
      m.cells.push_back({b, w});
    };
    shift(plus, e);
    shift(minus, -e);
    const double fd2 = (gateaux(smp.f, plus, a) - gateaux(smp.f, minus, a)) / (2.0 * e);
    dev2 = std::max(dev2, relative_deviation(gateaux2(smp.f, smp.eta, a, b), fd2, floor / z));

    double integral = 0.0;
    TestFunctional flat = smp.f;
    flat.psi = PsiFn::one();
    for (const auto& at : atoms_of(smp.eta)) integral += at.w * gateaux(flat, smp.eta, at.x);
    dev13 = std::max(dev13, std::abs(integral));
  }
  rep.checks.push_back(make_check("gateaux_first", dev1, 1e-6));
  rep.checks.push_back(make_check("gateaux_second", dev2, 1e-6));
  rep.checks.push_back(make_check("integral_of_derivative", dev13, 1e-10));

  rep.checks.push_back(make_check("factorization_feller", factorization_check(feller, suite), 1e-6));
  rep.checks.push_back(make_check("factorization_stable", factorization_check(stable, suite), 1e-6));

  // Quadrature generator against the block-counting rates.
  const CoalescentM mstable = theorem1_correspondence(stable);
  double dev_rates = 0.0;
  for (const auto& smp : suite) {
    const auto rho = *smp.eta.normalized();
    dev_rates = std::max(dev_rates, relative_deviation(apply_Fgen(mstable, smp.f, rho),
                                                       apply_Fgen_by_rates(mstable, smp.f, rho),
                                                       1e-6 * generator_scale(mstable, smp.f, rho)));
  }
  rep.checks.push_back(make_check("generator_rates_identity", dev_rates, 1e-8));

  // L exp(-q |eta|) = (|eta| Psi(q) - Phi(q)) exp(-q |eta|).
  double dev_mass = 0.0;
  for (const auto* mech : {&feller, &stable})
    for (const auto& smp : suite)
      for (double q : {0.5, 1.0, 2.0}) {
        TestFunctional f{PhiFn::constant(1.0), 1, PsiFn::exp(q)};
        const double z = smp.eta.total_mass();
        const double exact = (z * psi(*mech, q) - phi(*mech, q)) * std::exp(-q * z);
        dev_mass = std::max(dev_mass, relative_deviation(apply_L(*mech, f, smp.eta), exact));
      }
  rep.checks.push_back(make_check("total_mass_generator", dev_mass, 1e-8));

  // Feller: L F = [z sigma2/2 psi'' + beta psi'] P^m + psi / z * F G_f.
  const CoalescentM mfeller = theorem1_correspondence(feller);
  double dev_dec = 0.0;
  for (const auto& smp : suite) {
    const double z = smp.eta.total_mass();
    const auto rho = *smp.eta.normalized();
    TestFunctional flat = smp.f;
    flat.psi = PsiFn::one();
    const double pm = flat.value(smp.eta);
    const auto& psi_f = smp.f.psi;
    const double branching =
        (z * cfg.feller_sigma2 / 2.0 * psi_f.d2(z) + cfg.feller_beta * psi_f.d1(z)) * pm;
    const double expected = branching + psi_f.value(z) / z * apply_Fgen(mfeller, flat, rho);
    const double scale =
        std::abs(branching) + std::abs(psi_f.value(z)) / z * generator_scale(mfeller, flat, rho);
    dev_dec = std::max(dev_dec, relative_deviation(apply_L(feller, smp.f, smp.eta), expected,
                                                   1e-8 * scale));
  }
  rep.checks.push_back(make_check("feller_decomposition", dev_dec, 1e-6));

  // r^2, r^3, r^2 (1 - r)
  const std::vector<Polynomial> polys{
      {{0.0, 0.0, 1.0}}, {{0.0, 0.0, 0.0, 1.0}}, {{0.0, 0.0, 1.0, -1.0}}};
  const auto pf = pushforward_check(stable.stable_params(), cfg.pushforward_z, polys);
  rep.checks.push_back(make_check("pushforward", pf.max_deviation, 1e-8));
  return rep;
}

}  // namespace fvlab
