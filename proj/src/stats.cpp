#include "fvlab/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fvlab {

void RunningStats::push(double x) noexcept {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) noexcept {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double delta = o.mean_ - mean_;
  mean_ += delta * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double RunningStats::variance() const noexcept {
  return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double RunningStats::std_error() const noexcept {
  return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

Estimate estimate(const RunningStats& s) noexcept {
  return {s.mean(), s.std_error(), s.count()};
}

Estimate estimate(std::span<const double> xs) noexcept {
  RunningStats s;
  for (double x : xs) s.push(x);
  return estimate(s);
}

bool within_sigma(const Estimate& a, const Estimate& b, double k) {
  const double se = std::hypot(a.std_error, b.std_error);
  return std::abs(a.mean - b.mean) <= k * se;
}

bool within_sigma(const Estimate& a, double exact, double k) {
  return std::abs(a.mean - exact) <= k * a.std_error;
}

Correlation pearson(std::span<const double> x, std::span<const double> y, double z) {
  if (x.size() != y.size() || x.size() < 4)
    throw std::invalid_argument("pearson: need equal-length samples of size >= 4");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return {0.0, -1.0, 1.0};
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0 + 1e-15, 1.0 - 1e-15);
  const double fz = std::atanh(r);
  const double half = z / std::sqrt(n - 3.0);
  return {r, std::tanh(fz - half), std::tanh(fz + half)};
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

ChiSquare2x2 median_split_chi2(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("median_split_chi2: need equal-length samples");
  const double mx = median(x);
  const double my = median(y);
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < x.size(); ++i)
    table[x[i] > mx ? 1 : 0][y[i] > my ? 1 : 0] += 1.0;
  const double n = static_cast<double>(x.size());
  const double rows[2] = {table[0][0] + table[0][1], table[1][0] + table[1][1]};
  const double cols[2] = {table[0][0] + table[1][0], table[0][1] + table[1][1]};
  ChiSquare2x2 out;
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) {
    out.degenerate = true;
    return out;
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / n;
      out.statistic += (table[i][j] - expected) * (table[i][j] - expected) / expected;
    }
  const boost::math::chi_squared dist(1.0);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace fvlab
