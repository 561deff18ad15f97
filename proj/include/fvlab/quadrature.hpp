#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace fvlab {

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double value, double error)
      : std::runtime_error(what), value_(value), error_(error) {}
  double value() const noexcept { return value_; }
  double error_estimate() const noexcept { return error_; }

 private:
  double value_;
  double error_;
};

struct QuadratureOptions {
  double abs_tol = 1e-14;
  double rel_tol = 1e-12;
  unsigned max_depth = 24;
  /// Power p of the substitution x = a + (mid - a) u^p on the left half.
  /// For f ~ (x - a)^e, p = 1 / (e + 1) makes the transformed integrand
  /// regular at a; this also covers non-integer e > 0.
  double left_power = 1.0;
  /// Same for the right endpoint: x = b - (b - mid) u^p. Points that close to
  /// b lose their distance to rounding, so strong singularities at b are
  /// better reflected onto a.
  double right_power = 1.0;
};

/// Substitution power for an endpoint factor (x - a)^e: 1 for non-negative
/// integers, otherwise p = m / (e + 1) with m the smallest integer giving p >= 8,
/// so the factor becomes u^(m-1) and the rest of the integrand, a function of
/// u^p, stays smooth to high order.
double endpoint_power(double e);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Adaptive 61-point Gauss-Kronrod on [a, b]. Endpoints are never evaluated.
/// Substitution powers must be > 0.
/// Throws QuadratureError when the error estimate misses both tolerances.
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, const QuadratureOptions& opts = {});

/// Integral over [a, inf) with split point s > a: [a, s] as above and the tail
/// through x = s / t^p, t in (0, 1]. For f ~ x^(-g) near infinity, p = 1/(g-1)
/// makes the tail integrand constant.
QuadratureResult integrate_to_infinity(const std::function<double(double)>& f,
                                       double a, double split,
                                       const QuadratureOptions& opts = {},
                                       double tail_power = 1.0);

/// log B(a, b) through log-Gamma.
double log_beta(double a, double b);
/// B(a, b) = exp(lgamma(a) + lgamma(b) - lgamma(a + b)).
double beta_fn(double a, double b);
/// Unnormalised lower incomplete beta: int_0^x t^(a-1) (1-t)^(b-1) dt.
double incomplete_beta(double a, double b, double x);

}  // namespace fvlab
