#pragma once

#include "fvlab/rng.hpp"

#include <cmath>
#include <cstdint>

namespace fvlab {

std::int64_t sample_poisson(Stream& s, double mean);
/// Gamma(shape, scale); 0 when shape == 0.
double sample_gamma(Stream& s, double shape, double scale);
double sample_exponential(Stream& s, double rate);
double sample_normal(Stream& s);
std::int64_t sample_binomial(Stream& s, std::int64_t n, double p);

/// Positive stable variable with E[exp(-q S)] = exp(-q^beta), beta in (0, 1),
/// via Kanter's representation.
double sample_positive_stable(Stream& s, double beta);

/// P(S <= x) for the variable above (one-dimensional quadrature).
double positive_stable_cdf(double beta, double x);
/// Quantile of the same law by bisection on the CDF.
double positive_stable_quantile(double beta, double p);

/// Pareto tail: P(H > h) = (h / xmin)^(-index), h >= xmin.
inline double sample_pareto(Stream& s, double xmin, double index) {
  return xmin * std::pow(uniform_open(s), -1.0 / index);
}

}  // namespace fvlab
