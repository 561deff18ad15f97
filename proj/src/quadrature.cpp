#include "fvlab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fvlab {
namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 61>;

QuadratureResult unit_interval(const std::function<double(double)>& g,
                               const QuadratureOptions& opts) {
  double err = 0.0;
  double l1 = 0.0;
  const double value =
      Kronrod::integrate(g, 0.0, 1.0, opts.max_depth, opts.rel_tol, &err, &l1);
  return {value, err};
}

void check(const QuadratureResult& r, const QuadratureOptions& opts, double a,
           double b) {
  if (!std::isfinite(r.value) ||
      r.error_estimate > std::max(opts.abs_tol, opts.rel_tol * std::abs(r.value))) {
    std::ostringstream os;
    os << "quadrature did not converge on [" << a << ", " << b << "]: value "
       << r.value << ", error estimate " << r.error_estimate;
    throw QuadratureError(os.str(), r.value, r.error_estimate);
  }
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, const QuadratureOptions& opts) {
  if (!(b > a)) return {};
  if (!(opts.left_power > 0.0 && opts.right_power > 0.0))
    throw std::invalid_argument("substitution powers must be > 0");
  QuadratureResult total;
  if (opts.left_power == 1.0 && opts.right_power == 1.0) {
    const double len = b - a;
    total = unit_interval([&](double u) { return len * f(a + len * u); }, opts);
  } else {
    const double mid = 0.5 * (a + b);
    const double half = mid - a;
    const double p = opts.left_power;
    const double q = opts.right_power;
    const auto left = unit_interval(
        [&](double u) {
          const double up = std::pow(u, p - 1);
          return p * up * half * f(a + half * up * u);
        },
        opts);
    const auto right = unit_interval(
        [&](double u) {
          const double uq = std::pow(u, q - 1);
          return q * uq * half * f(b - half * uq * u);
        },
        opts);
    total = {left.value + right.value, left.error_estimate + right.error_estimate};
  }
  check(total, opts, a, b);
  return total;
}

QuadratureResult integrate_to_infinity(const std::function<double(double)>& f,
                                       double a, double split,
                                       const QuadratureOptions& opts,
                                       double tail_power) {
  const auto head = integrate(f, a, split, opts);
  if (!(tail_power > 0.0)) throw std::invalid_argument("tail_power must be > 0");
  const double p = tail_power;
  const auto tail = unit_interval(
      [&](double t) {
        const double tp = std::pow(t, p);
        return split * p * f(split / tp) / (tp * t);
      },
      opts);
  QuadratureResult total{head.value + tail.value,
                         head.error_estimate + tail.error_estimate};
  check(total, opts, a, INFINITY);
  return total;
}

double endpoint_power(double e) {
  if (e >= 0.0 && e == std::floor(e)) return 1.0;
  if (!(e > -1.0)) throw std::domain_error("endpoint exponent must be > -1");
  return std::ceil(8.0 * (e + 1.0)) / (e + 1.0);
}

double log_beta(double a, double b) {
  return boost::math::lgamma(a) + boost::math::lgamma(b) -
         boost::math::lgamma(a + b);
}

double beta_fn(double a, double b) { return std::exp(log_beta(a, b)); }

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return beta_fn(a, b);
  return boost::math::beta(a, b, x);
}

}  // namespace fvlab
