#pragma once

#include <cstddef>
#include <span>

namespace fvlab {

/// Two-sided normal critical values.
inline constexpr double kZ99 = 2.5758293035489004;
inline constexpr double kThreeSigma = 3.0;

/// Welford accumulator.
class RunningStats {
 public:
  void push(double x) noexcept;
  void merge(const RunningStats& other) noexcept;

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;  // unbiased
  double std_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;

  double ci_low(double z = kZ99) const noexcept { return mean - z * std_error; }
  double ci_high(double z = kZ99) const noexcept { return mean + z * std_error; }
};

Estimate estimate(const RunningStats& s) noexcept;
Estimate estimate(std::span<const double> xs) noexcept;

/// |a - b| <= k * sqrt(se_a^2 + se_b^2).
bool within_sigma(const Estimate& a, const Estimate& b, double k = kThreeSigma);
/// Comparison against an exact value.
bool within_sigma(const Estimate& a, double exact, double k = kThreeSigma);

struct Correlation {
  double r = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Pearson correlation with a Fisher-z confidence interval at level z.
Correlation pearson(std::span<const double> x, std::span<const double> y,
                    double z = kZ99);

struct ChiSquare2x2 {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

/// Median-split 2x2 contingency test of independence (df = 1).
ChiSquare2x2 median_split_chi2(std::span<const double> x, std::span<const double> y);

double median(std::span<const double> xs);

}  // namespace fvlab
