#include "fvlab/coalescent.hpp"

#include "fvlab/io.hpp"
#include "fvlab/parallel.hpp"
#include "fvlab/quadrature.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/special_functions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fvlab {
namespace {

constexpr std::uint64_t kCoalescentTag = 0x636f616c65736365ull;

double choose(int n, int k) {
  return boost::math::binomial_coefficient<double>(static_cast<unsigned>(n),
                                                   static_cast<unsigned>(k));
}

std::size_t uniform_index(Stream& s, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform_open(s) * static_cast<double>(n));
  return std::min(i, n - 1);
}

// int_0^1 x^(e0) (1-x)^(e1) scale x^(a-1) (1-x)^(b-1) dx by quadrature. The
// upper half is reflected so both singular endpoints sit at 0, where the
// substitution power is chosen from the combined exponent.
double beta_part_by_quadrature(const BetaLambda& part, int e0, int e1) {
  if (part.scale == 0.0) return 0.0;
  const double left = e0 + part.a - 1.0;
  const double right = e1 + part.b - 1.0;
  const auto half = [](double near, double far) {
    QuadratureOptions opts;
    opts.rel_tol = 1e-13;
    opts.abs_tol = 0.0;
    opts.max_depth = 30;
    opts.left_power = endpoint_power(near);
    return integrate([&](double x) { return std::pow(x, near) * std::pow(1.0 - x, far); }, 0.0,
                     0.5, opts)
        .value;
  };
  return part.scale * (half(left, right) + half(right, left));
}

void check_nk(int n, int k, int k_min) {
  if (n < 1 || k < k_min || k > n) {
    std::ostringstream os;
    os << "rate index out of range: n=" << n << ", k=" << k;
    throw std::out_of_range(os.str());
  }
}

}  // namespace

Partition0::Partition0(std::vector<int> word) : block_of_(std::move(word)) {
  canonicalize();
}

Partition0 Partition0::singletons(int n) {
  if (n < 0) throw std::invalid_argument("partition size must be >= 0");
  std::vector<int> w(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) w[static_cast<std::size_t>(i)] = i;
  return Partition0(std::move(w));
}

Partition0 Partition0::from_word(std::vector<int> word) {
  if (word.empty()) throw std::invalid_argument("empty block-index word");
  for (int v : word)
    if (v < 0) throw std::invalid_argument("block indices must be >= 0");
  return Partition0(std::move(word));
}

Partition0 Partition0::from_blocks(std::vector<std::vector<int>> blocks) {
  int n = -1;
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("empty block");
    for (int x : b) n = std::max(n, x);
    total += b.size();
  }
  if (n < 0 || total != static_cast<std::size_t>(n) + 1)
    throw std::invalid_argument("blocks do not form a cover of {0..n}");
  std::vector<int> w(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (int x : blocks[i]) {
      if (x < 0 || w[static_cast<std::size_t>(x)] != -1)
        throw std::invalid_argument("blocks are not disjoint");
      w[static_cast<std::size_t>(x)] = static_cast<int>(i);
    }
  }
  return Partition0(std::move(w));
}

void Partition0::canonicalize() {
  std::vector<int> relabel;
  int next = 0;
  for (auto& v : block_of_) {
    if (static_cast<std::size_t>(v) >= relabel.size()) relabel.resize(static_cast<std::size_t>(v) + 1, -1);
    auto& slot = relabel[static_cast<std::size_t>(v)];
    if (slot < 0) slot = next++;
    v = slot;
  }
  blocks_ = next;
}

std::vector<std::vector<int>> Partition0::blocks() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(blocks_));
  for (std::size_t k = 0; k < block_of_.size(); ++k)
    out[static_cast<std::size_t>(block_of_[k])].push_back(static_cast<int>(k));
  return out;
}

std::string Partition0::encoding() const {
  std::string s;
  for (std::size_t k = 0; k < block_of_.size(); ++k) {
    if (k) s += '.';
    s += std::to_string(block_of_[k]);
  }
  return s;
}

Partition0 Partition0::restrict_to(int m) const {
  if (m < 0 || m > n()) throw std::out_of_range("restriction size out of range");
  return Partition0(std::vector<int>(block_of_.begin(), block_of_.begin() + m + 1));
}

void Partition0::merge(const std::vector<int>& idx, bool into_distinguished) {
  if (idx.empty()) return;
  for (int i : idx)
    if (i < 1 || i >= blocks_) throw std::out_of_range("merge: not an outside block index");
  const int target = into_distinguished ? 0 : *std::min_element(idx.begin(), idx.end());
  for (auto& v : block_of_)
    if (std::find(idx.begin(), idx.end(), v) != idx.end()) v = target;
  canonicalize();
}

RateTable::RateTable(int n_max, std::vector<double> lambda, std::vector<double> r)
    : n_max_(n_max), lambda_(std::move(lambda)), r_(std::move(r)) {}

std::size_t RateTable::index(int n, int k) const {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n_max_ + 1) +
         static_cast<std::size_t>(k);
}

double RateTable::lambda(int n, int k) const {
  check_nk(n, k, 2);
  if (n > n_max_) throw std::out_of_range("rate table does not cover n");
  return lambda_[index(n, k)];
}

double RateTable::r(int n, int k) const {
  check_nk(n, k, 1);
  if (n > n_max_) throw std::out_of_range("rate table does not cover n");
  return r_[index(n, k)];
}

double RateTable::total_rate(int b) const {
  double total = 0.0;
  for (int k = 2; k <= b; ++k) total += choose(b, k) * lambda(b, k);
  for (int k = 1; k <= b; ++k) total += choose(b, k) * r(b, k);
  return total;
}

RateTable rates(const CoalescentM& m, int n_max) {
  if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");
  m.validate();
  const std::size_t w = static_cast<std::size_t>(n_max) + 1;
  std::vector<double> lam(w * w, 0.0), r(w * w, 0.0);
  for (int n = 1; n <= n_max; ++n) {
    for (int k = 1; k <= n; ++k) {
      const std::size_t i = static_cast<std::size_t>(n) * w + static_cast<std::size_t>(k);
      if (k >= 2) {
        double v = k == 2 ? m.c1 : 0.0;
        if (m.nu1 && m.nu1->scale > 0.0)
          v += m.nu1->scale * beta_fn(k - 2 + m.nu1->a, n - k + m.nu1->b);
        lam[i] = v;
      }
      double v = k == 1 ? m.c0 : 0.0;
      if (m.nu0 && m.nu0->scale > 0.0)
        v += m.nu0->scale * beta_fn(k - 1 + m.nu0->a, n - k + m.nu0->b);
      r[i] = v;
    }
  }
  return RateTable(n_max, std::move(lam), std::move(r));
}

double lambda_by_quadrature(const CoalescentM& m, int n, int k) {
  check_nk(n, k, 2);
  double v = k == 2 ? m.c1 : 0.0;
  if (m.nu1) v += beta_part_by_quadrature(*m.nu1, k - 2, n - k);
  return v;
}

double r_by_quadrature(const CoalescentM& m, int n, int k) {
  check_nk(n, k, 1);
  double v = k == 1 ? m.c0 : 0.0;
  if (m.nu0) v += beta_part_by_quadrature(*m.nu0, k - 1, n - k);
  return v;
}

LambdaEquivalence lambda_equivalence(const CoalescentM& m, int n_max, double tol) {
  if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");
  const RateTable t = rates(m, n_max);
  LambdaEquivalence out;
  for (int n = 2; n <= n_max; ++n) {
    for (int k = 2; k <= n; ++k) {
      // int x^(k-2) (1-x)^(n-k+1) Lambda_0(dx)
      double from0 = k == 2 ? m.c0 : 0.0;
      if (m.nu0 && m.nu0->scale > 0.0)
        from0 += m.nu0->scale * beta_fn(k - 2 + m.nu0->a, n - k + 1 + m.nu0->b);
      const double from1 = t.lambda(n, k);
      const double scale = std::max(std::abs(from0), std::abs(from1));
      const double dev = scale == 0.0 ? 0.0 : std::abs(from0 - from1) / scale;
      out.max_deviation = std::max(out.max_deviation, dev);
    }
  }
  out.equivalent = out.max_deviation <= tol;
  return out;
}

GillespieStep gillespie_step(const Partition0& state, const RateTable& table, Stream& rng) {
  GillespieStep out{std::numeric_limits<double>::infinity(), state, false, 0};
  const int b = state.outside_blocks();
  if (b == 0) return out;
  if (b > table.n_max()) throw std::out_of_range("rate table too small for the partition");

  std::vector<double> weights;
  weights.reserve(2 * static_cast<std::size_t>(b));
  double total = 0.0;
  for (int k = 2; k <= b; ++k) {
    weights.push_back(choose(b, k) * table.lambda(b, k));
    total += weights.back();
  }
  for (int k = 1; k <= b; ++k) {
    weights.push_back(choose(b, k) * table.r(b, k));
    total += weights.back();
  }
  if (!(total > 0.0)) return out;

  out.waiting_time = -std::log(uniform_open(rng)) / total;
  double u = uniform_open(rng) * total;
  std::size_t pick = 0;
  for (; pick + 1 < weights.size(); ++pick) {
    if (u < weights[pick]) break;
    u -= weights[pick];
  }
  const bool immigration = pick >= static_cast<std::size_t>(b - 1);
  const int k = immigration ? static_cast<int>(pick) - (b - 1) + 1 : static_cast<int>(pick) + 2;

  std::vector<int> pool(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
  for (int i = 0; i < k; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) +
                          uniform_index(rng, static_cast<std::size_t>(b - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  out.next.merge(pool, immigration);
  out.immigration = immigration;
  out.merged = k;
  return out;
}

CoalescentPath simulate_coalescent(int n, const RateTable& table, double horizon, Stream& rng) {
  if (n < 1) throw std::invalid_argument("coalescent size must be >= 1");
  if (n > table.n_max()) throw std::out_of_range("rate table does not cover n");
  CoalescentPath path;
  Partition0 state = Partition0::singletons(n);
  double t = 0.0;
  path.times.push_back(0.0);
  path.states.push_back(state);
  while (true) {
    auto step = gillespie_step(state, table, rng);
    if (!(t + step.waiting_time <= horizon)) break;
    t += step.waiting_time;
    state = std::move(step.next);
    path.times.push_back(t);
    path.states.push_back(state);
  }
  return path;
}

double absorption_chain(int p, const RateTable& table, double t) {
  if (p < 1) throw std::invalid_argument("absorption_chain: p must be >= 1");
  if (t < 0.0) throw std::domain_error("absorption_chain: t must be >= 0");
  if (p > table.n_max()) throw std::out_of_range("rate table does not cover p");
  if (t == 0.0) return 0.0;
  const int dim = p + 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  for (int b = 1; b <= p; ++b) {
    for (int k = 2; k <= b; ++k) q(b, b - k + 1) += choose(b, k) * table.lambda(b, k);
    for (int k = 1; k <= b; ++k) q(b, b - k) += choose(b, k) * table.r(b, k);
    q(b, b) = 0.0;
    q(b, b) = -q.row(b).sum();
  }
  const Eigen::MatrixXd pt = (q * t).exp();
  return std::clamp(pt(p, 0), 0.0, 1.0);
}

Estimate absorption_monte_carlo(int p, const RateTable& table, double t, std::int64_t reps,
                                std::uint64_t seed) {
  if (reps < 2) throw std::invalid_argument("need at least two replicates");
  std::vector<double> hit(static_cast<std::size_t>(reps), 0.0);
  parallel_for(hit.size(), [&](std::size_t i) {
    Stream rng(seed, derive_stream_id(kCoalescentTag, i));
    const auto path = simulate_coalescent(p, table, t, rng);
    hit[i] = path.states.back().outside_blocks() == 0 ? 1.0 : 0.0;
  });
  return estimate(std::span<const double>(hit));
}

void write_coalescent_csv(std::ostream& os, const std::vector<CoalescentPath>& paths,
                          bool header) {
  if (header) os << "rep_id,time,n_blocks_outside,partition_encoding\n";
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const auto& p = paths[r];
    for (std::size_t i = 0; i < p.times.size(); ++i) {
      os << r << ',' << format_double(p.times[i]) << ',' << p.states[i].outside_blocks() << ','
         << p.states[i].encoding() << '\n';
    }
  }
}

}  // namespace fvlab
