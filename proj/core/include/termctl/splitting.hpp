#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termctl/model.hpp"

namespace termctl {

class Rng;

/// Base kernel with m0-step density access plus the minorisation that splits it.
struct SplitKernel {
  int dim_state = 1;
  int m0 = 1;
  /// One step of the base chain: y ~ P(x, .).
  std::function<void(std::span<const double> x, Rng& rng, std::span<double> y)> step;
  /// m0-step transition density p^{m0}(x, y); +inf marks an atom (e.g. a
  /// rejected Metropolis move), which never regenerates.
  std::function<double(std::span<const double> x, std::span<const double> y)> density_m0;
  MinorisationSpec mino;
  std::string certificate;  // how alpha and nu were obtained
};

/// Checks alpha nu(y) <= p^{m0}(x,y) (1 + tol) on the given sample pairs
/// with x in C. Returns the largest ratio seen.
double spot_check_minorisation(const SplitKernel& kernel,
                               const std::vector<std::pair<Vector, Vector>>& pairs,
                               double tol = 1e-9);

struct RegenerationRecord {
  int m0 = 1;
  Eigen::Index T = 0;
  bool started_from_nu = false;   // R_0 = 0 is then an epoch
  std::vector<std::uint8_t> bells;        // delta_n, n = 0 .. floor(T/m0)-1
  std::vector<Eigen::Index> epochs;       // R_k, strictly increasing, multiples of m0
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cycles;  // [R_{k-1}, R_k)
  Eigen::Index bells_drawn = 0;           // skeleton steps starting in C
  Eigen::Index skeleton_steps = 0;        // skeleton transitions simulated

  /// Fills `cycles` from `epochs`.
  void rebuild_cycles();
  std::vector<Eigen::Index> cycle_lengths() const;
};

struct SplitRun {
  RowMatrix trajectory;  // T x dim_state, row t = X_t
  RegenerationRecord record;
};

/// Simulates T states X_0..X_{T-1} from x0 (or from nu when x0 is empty).
/// After X_{(n+1)m0} = y is drawn from X_{n m0} = x in C, the bell delta_n is
/// set with probability alpha nu(y)/p^{m0}(x,y) and R = (n+1) m0 becomes an
/// epoch. Every skeleton time at or after the previous epoch is eligible.
/// Throws DENSITY_VIOLATION when that probability exceeds 1 + 1e-9.
SplitRun simulate_split(const SplitKernel& kernel, Eigen::Index T,
                        const std::optional<Vector>& x0, std::uint64_t seed);

struct FirstBlock {
  Eigen::Index R = 0;  // first epoch after time 0
  Vector sum;          // sum of X_t over [0, R)
};

/// Runs the split chain from x0 (or from nu) only until its first epoch
/// R > 0. Draws are consumed in the same order as simulate_split, so R equals
/// the first positive epoch of simulate_split with the same seed. Returns
/// nullopt when no bell rings before max_T.
std::optional<FirstBlock> first_regeneration(const SplitKernel& kernel,
                                             const std::optional<Vector>& x0,
                                             std::uint64_t seed, Eigen::Index max_T);

struct CycleSums {
  std::vector<Vector> xi;               // one per complete cycle
  std::vector<Eigen::Index> lengths;
  Vector head;                          // rows [0, R_first)
  Vector tail;                          // rows [R_last, T)
  Vector centre;                        // pi(f) used
  bool centre_estimated = false;        // grand mean used in place of pi(f)
};

/// Block sums of f - pi(f) over [R_{k-1}, R_k). With no pi_f the run's grand
/// mean is used and flagged.
CycleSums extract_cycles(const ChainOutput& output, const RegenerationRecord& rec,
                         const std::optional<Vector>& pi_f = std::nullopt);

/// (sum over complete cycles of f_i) / (sum of their lengths).
/// Throws TOO_FEW_CYCLES with fewer than two complete cycles.
double kac_estimate(const ChainOutput& output, const RegenerationRecord& rec, Eigen::Index i);

/// Lag-k sample autocorrelation; 0 for a constant series.
double lag_autocorrelation(std::span<const double> x, std::size_t lag);

struct IndependenceTest {
  double lag1_corr = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
  std::string note;
};

/// Lag-1 autocorrelation of cycle lengths with a two-sided permutation
/// p-value (1 + #{|r_perm| >= |r_obs|})/(1 + B). Needs >= 30 lengths.
IndependenceTest cycle_independence_test(std::span<const double> lengths,
                                         std::uint64_t seed = 0, std::size_t permutations = 1000);
IndependenceTest cycle_independence_test(const RegenerationRecord& rec, std::uint64_t seed = 0,
                                         std::size_t permutations = 1000);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace termctl
