#pragma once

#include "fvlab/mechanisms.hpp"
#include "fvlab/rng.hpp"
#include "fvlab/stats.hpp"

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace fvlab {

/// Partition of {0, ..., n} with blocks ordered by least element, so block 0
/// always holds the integer 0 (the distinguished, immigrant block).
class Partition0 {
 public:
  /// 0_[n]: all singletons.
  static Partition0 singletons(int n);
  /// From explicit blocks; throws std::invalid_argument unless they form a
  /// disjoint cover of {0, ..., n}.
  static Partition0 from_blocks(std::vector<std::vector<int>> blocks);
  /// From a block-index word alpha(0) ... alpha(n); canonicalised.
  static Partition0 from_word(std::vector<int> word);

  int n() const noexcept { return static_cast<int>(block_of_.size()) - 1; }
  int block_count() const noexcept { return blocks_; }
  int outside_blocks() const noexcept { return blocks_ - 1; }
  /// alpha_pi(k): index of the block containing k.
  int block_of(int k) const { return block_of_.at(static_cast<std::size_t>(k)); }
  const std::vector<int>& word() const noexcept { return block_of_; }
  std::vector<std::vector<int>> blocks() const;

  /// Dot-separated block-index word, e.g. "0.1.1.0".
  std::string encoding() const;
  /// Restriction to {0, ..., m}.
  Partition0 restrict_to(int m) const;

  /// Merges the listed non-distinguished blocks (indices >= 1) into one, or into
  /// block 0 when into_distinguished is set.
  void merge(const std::vector<int>& block_indices, bool into_distinguished);

  bool operator==(const Partition0& o) const noexcept { return block_of_ == o.block_of_; }

 private:
  explicit Partition0(std::vector<int> word);
  void canonicalize();

  std::vector<int> block_of_;
  int blocks_ = 0;
};

/// lambda(n, k), 2 <= k <= n, and r(n, k), 1 <= k <= n, for n <= n_max.
class RateTable {
 public:
  RateTable() = default;
  RateTable(int n_max, std::vector<double> lambda, std::vector<double> r);

  int n_max() const noexcept { return n_max_; }
  double lambda(int n, int k) const;
  double r(int n, int k) const;

  /// sum_k C(b, k) lambda(b, k) + sum_k C(b, k) r(b, k).
  double total_rate(int b) const;

 private:
  std::size_t index(int n, int k) const;
  int n_max_ = 0;
  std::vector<double> lambda_;
  std::vector<double> r_;
};

/// Closed forms: lambda(n,k) = c1 [k=2] + s1 B(k-2+a1, n-k+b1),
/// r(n,k) = c0 [k=1] + s0 B(k-1+a0, n-k+b0).
RateTable rates(const CoalescentM& m, int n_max = 64);

/// The defining integrals int x^(k-2) (1-x)^(n-k) Lambda_1(dx) and
/// int x^(k-1) (1-x)^(n-k) Lambda_0(dx), evaluated by adaptive quadrature.
double lambda_by_quadrature(const CoalescentM& m, int n, int k);
double r_by_quadrature(const CoalescentM& m, int n, int k);

struct LambdaEquivalence {
  bool equivalent = false;
  double max_deviation = 0.0;
};

/// Compares lambda(n, k) from Lambda_1 with int x^(k-2) (1-x)^(n-k+1) Lambda_0(dx)
/// for 2 <= k <= n <= n_max.
LambdaEquivalence lambda_equivalence(const CoalescentM& m, int n_max, double tol = 1e-10);

struct GillespieStep {
  double waiting_time = std::numeric_limits<double>::infinity();
  Partition0 next;
  bool immigration = false;
  int merged = 0;  // number of non-distinguished blocks involved
};

/// One jump of the restricted M-coalescent. Event type and size k are chosen
/// with weights C(b, k) rate(b, k); the k blocks are then a uniform subset.
/// With no outside blocks (or zero total rate) the waiting time is infinite.
GillespieStep gillespie_step(const Partition0& state, const RateTable& table, Stream& rng);

struct CoalescentPath {
  std::vector<double> times;
  std::vector<Partition0> states;
};

/// Runs from 0_[n] until the horizon or until no jump is possible.
CoalescentPath simulate_coalescent(int n, const RateTable& table, double horizon, Stream& rng);

/// P(all p non-distinguished singletons of 0_[p] have joined block 0 by time t),
/// from the exact block-count chain via a matrix exponential.
double absorption_chain(int p, const RateTable& table, double t);

/// Same probability by Monte Carlo over coalescent paths.
Estimate absorption_monte_carlo(int p, const RateTable& table, double t, std::int64_t reps,
                                std::uint64_t seed);

void write_coalescent_csv(std::ostream& os, const std::vector<CoalescentPath>& paths,
                          bool header = true);

}  // namespace fvlab
