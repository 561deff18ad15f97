#include "fvlab/samplers.hpp"

#include "fvlab/quadrature.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <cmath>
#include <stdexcept>

namespace fvlab {

std::int64_t sample_poisson(Stream& s, double mean) {
  if (!(mean > 0.0)) return 0;
  boost::random::poisson_distribution<std::int64_t, double> dist(mean);
  return dist(s);
}

double sample_gamma(Stream& s, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) return 0.0;
  boost::random::gamma_distribution<double> dist(shape, scale);
  return dist(s);
}

double sample_exponential(Stream& s, double rate) { return -std::log(uniform_open(s)) / rate; }

double sample_normal(Stream& s) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(s);
}

std::int64_t sample_binomial(Stream& s, std::int64_t n, double p) {
  if (n <= 0 || !(p > 0.0)) return 0;
  if (p >= 1.0) return n;
  boost::random::binomial_distribution<std::int64_t, double> dist(n, p);
  return dist(s);
}

double sample_positive_stable(Stream& s, double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("positive stable index must lie in (0, 1)");
  const double u = boost::math::constants::pi<double>() * uniform_open(s);
  const double e = -std::log(uniform_open(s));
  const double head = std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta);
  return head * std::pow(std::sin((1.0 - beta) * u) / e, (1.0 - beta) / beta);
}

double positive_stable_cdf(double beta, double x) {
  if (!(x > 0.0)) return 0.0;
  const double pi = boost::math::constants::pi<double>();
  const double expo = beta / (1.0 - beta);
  QuadratureOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  const auto r = integrate(
      [&](double u) {
        const double head = std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta);
        const double arg = std::sin((1.0 - beta) * u) * std::pow(head / x, expo);
        return std::exp(-arg);
      },
      0.0, pi, opts);
  return r.value / pi;
}

double positive_stable_quantile(double beta, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
  double lo = 1e-12, hi = 1.0;
  while (positive_stable_cdf(beta, hi) < p) hi *= 4.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (positive_stable_cdf(beta, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace fvlab
