#include "termctl/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "termctl/error.hpp"
#include "termctl/random.hpp"
#include "termctl/special.hpp"

namespace termctl {

namespace {

std::span<const double> cspan(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double spot_check_minorisation(const SplitKernel& kernel,
                               const std::vector<std::pair<Vector, Vector>>& pairs,
                               double tol) {
  double worst = 0.0;
  for (const auto& [x, y] : pairs) {
    if (!kernel.mino.small_set.contains(cspan(x))) continue;
    const double lower = kernel.mino.alpha * kernel.mino.nu.density(cspan(y));
    const double p = kernel.density_m0(cspan(x), cspan(y));
    const double ratio = lower / p;
    worst = std::max(worst, ratio);
    require(ratio <= 1.0 + tol, ErrorCode::DensityViolation,
            fmt::format("alpha nu(y) / p(x,y) = {} exceeds 1", ratio));
  }
  return worst;
}

void RegenerationRecord::rebuild_cycles() {
  cycles.clear();
  for (std::size_t k = 1; k < epochs.size(); ++k) cycles.emplace_back(epochs[k - 1], epochs[k]);
}

std::vector<Eigen::Index> RegenerationRecord::cycle_lengths() const {
  std::vector<Eigen::Index> out;
  out.reserve(cycles.size());
  for (const auto& [a, b] : cycles) out.push_back(b - a);
  return out;
}

SplitRun simulate_split(const SplitKernel& kernel, Eigen::Index T,
                        const std::optional<Vector>& x0, std::uint64_t seed) {
  require(T >= 1, ErrorCode::Precondition, "T must be >= 1");
  require(kernel.m0 >= 1, ErrorCode::Precondition, "m0 must be >= 1");
  require(kernel.step && kernel.density_m0 && kernel.mino.small_set.contains &&
              kernel.mino.nu.density && kernel.mino.nu.sample,
          ErrorCode::Precondition, "split kernel is missing a component");
  const int n = kernel.dim_state;
  const int m0 = kernel.m0;
  const double alpha = kernel.mino.alpha;
  Rng rng(seed);

  SplitRun run;
  run.trajectory.resize(T, n);
  auto& rec = run.record;
  rec.m0 = m0;
  rec.T = T;
  rec.bells.assign(static_cast<std::size_t>(T / m0), 0);

  Vector x(n);
  if (x0) {
    require(x0->size() == n, ErrorCode::Precondition, "x0 has the wrong dimension");
    x = *x0;
  } else {
    kernel.mino.nu.sample(rng, std::span<double>(x.data(), static_cast<std::size_t>(n)));
    rec.started_from_nu = true;
    rec.epochs.push_back(0);
  }
  run.trajectory.row(0) = x.transpose();

  Vector cur(n), nxt(n), skel(n);
  for (Eigen::Index t = 1; t < T; ++t) {
    cur = run.trajectory.row(t - 1).transpose();
    kernel.step(cspan(cur), rng, std::span<double>(nxt.data(), static_cast<std::size_t>(n)));
    run.trajectory.row(t) = nxt.transpose();

    if (t % m0 != 0) continue;
    // skeleton transition X_{t-m0} -> X_t is complete
    ++rec.skeleton_steps;
    skel = run.trajectory.row(t - m0).transpose();
    if (!kernel.mino.small_set.contains(cspan(skel))) continue;
    ++rec.bells_drawn;
    const double p = kernel.density_m0(cspan(skel), cspan(nxt));
    double prob = 0.0;
    if (std::isfinite(p)) {
      require(p > 0.0, ErrorCode::DensityViolation, "transition density vanished at a drawn pair");
      prob = alpha * kernel.mino.nu.density(cspan(nxt)) / p;
      require(prob <= 1.0 + 1e-9, ErrorCode::DensityViolation,
              fmt::format("regeneration probability {} > 1 at t = {}", prob, t));
    }
    if (rng.uniform() < prob) {
      rec.bells[static_cast<std::size_t>(t / m0 - 1)] = 1;
      rec.epochs.push_back(t);
    }
  }
  rec.rebuild_cycles();
  return run;
}

std::optional<FirstBlock> first_regeneration(const SplitKernel& kernel,
                                             const std::optional<Vector>& x0,
                                             std::uint64_t seed, Eigen::Index max_T) {
  require(max_T >= 1, ErrorCode::Precondition, "max_T must be >= 1");
  require(kernel.m0 >= 1, ErrorCode::Precondition, "m0 must be >= 1");
  const int n = kernel.dim_state;
  const int m0 = kernel.m0;
  Rng rng(seed);
  // ring buffer holding X_{t-m0}, ..., X_{t-1}
  std::vector<Vector> ring(static_cast<std::size_t>(m0), Vector(n));
  Vector x(n);
  if (x0) {
    require(x0->size() == n, ErrorCode::Precondition, "x0 has the wrong dimension");
    x = *x0;
  } else {
    kernel.mino.nu.sample(rng, std::span<double>(x.data(), static_cast<std::size_t>(n)));
  }
  FirstBlock out;
  out.sum = x;
  ring[0] = x;
  Vector nxt(n);
  for (Eigen::Index t = 1; t < max_T; ++t) {
    const Vector& cur = ring[static_cast<std::size_t>((t - 1) % m0)];
    kernel.step(cspan(cur), rng, std::span<double>(nxt.data(), static_cast<std::size_t>(n)));
    const auto slot = static_cast<std::size_t>(t % m0);
    if (t % m0 == 0) {
      const Vector& skel = ring[slot];  // X_{t-m0}, about to be overwritten
      if (kernel.mino.small_set.contains(cspan(skel))) {
        const double p = kernel.density_m0(cspan(skel), cspan(nxt));
        double prob = 0.0;
        if (std::isfinite(p)) {
          require(p > 0.0, ErrorCode::DensityViolation,
                  "transition density vanished at a drawn pair");
          prob = kernel.mino.alpha * kernel.mino.nu.density(cspan(nxt)) / p;
          require(prob <= 1.0 + 1e-9, ErrorCode::DensityViolation,
                  fmt::format("regeneration probability {} > 1 at t = {}", prob, t));
        }
        if (rng.uniform() < prob) {
          out.R = t;
          return out;
        }
      }
    }
    ring[slot] = nxt;
    out.sum += nxt;
  }
  return std::nullopt;
}

CycleSums extract_cycles(const ChainOutput& output, const RegenerationRecord& rec,
                         const std::optional<Vector>& pi_f) {
  const auto& v = output.values();
  const Eigen::Index d = output.d();
  CycleSums out;
  if (pi_f) {
    require(pi_f->size() == d, ErrorCode::Precondition, "pi(f) has the wrong dimension");
    out.centre = *pi_f;
  } else {
    out.centre = output.mean();
    out.centre_estimated = true;
  }
  const auto block = [&](Eigen::Index a, Eigen::Index b) -> Vector {
    Vector s = Vector::Zero(d);
    for (Eigen::Index t = a; t < b; ++t) s += v.row(t).transpose() - out.centre;
    return s;
  };
  for (std::size_t k = 1; k < rec.epochs.size(); ++k)
    require(rec.epochs[k] > rec.epochs[k - 1], ErrorCode::Precondition,
            "epochs must be strictly increasing");
  if (!rec.epochs.empty())
    require(rec.epochs.back() <= output.T(), ErrorCode::Precondition,
            "epochs run past the end of the output");

  const Eigen::Index first = rec.epochs.empty() ? output.T() : rec.epochs.front();
  const Eigen::Index last = rec.epochs.empty() ? output.T() : rec.epochs.back();
  out.head = block(0, first);
  for (std::size_t k = 1; k < rec.epochs.size(); ++k) {
    out.xi.push_back(block(rec.epochs[k - 1], rec.epochs[k]));
    out.lengths.push_back(rec.epochs[k] - rec.epochs[k - 1]);
  }
  out.tail = block(last, output.T());
  return out;
}

double kac_estimate(const ChainOutput& output, const RegenerationRecord& rec, Eigen::Index i) {
  require(i >= 0 && i < output.d(), ErrorCode::Precondition, "feature index out of range");
  require(rec.epochs.size() >= 3, ErrorCode::TooFewCycles,
          "the ratio estimator needs at least two complete cycles");
  require(rec.epochs.back() <= output.T(), ErrorCode::Precondition,
          "epochs run past the end of the output");
  const auto col = output.values().col(i);
  const Eigen::Index a = rec.epochs.front();
  const Eigen::Index b = rec.epochs.back();
  return col.segment(a, b - a).sum() / static_cast<double>(b - a);
}

double lag_autocorrelation(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size();
  if (n <= lag + 1) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double den = 0.0;
  for (double v : x) den += (v - mean) * (v - mean);
  if (den <= 0.0) return 0.0;
  double num = 0.0;
  for (std::size_t k = 0; k + lag < n; ++k) num += (x[k] - mean) * (x[k + lag] - mean);
  return num / den;
}

IndependenceTest cycle_independence_test(std::span<const double> lengths, std::uint64_t seed,
                                         std::size_t permutations) {
  require(lengths.size() >= 30, ErrorCode::TooFewCycles,
          fmt::format("independence test needs >= 30 cycles, got {}", lengths.size()));
  IndependenceTest out;
  out.permutations = permutations;
  const auto [mn, mx] = std::minmax_element(lengths.begin(), lengths.end());
  if (*mn == *mx) {
    out.note = "all cycle lengths equal; correlation undefined, reported as 0";
    return out;
  }
  out.lag1_corr = lag_autocorrelation(lengths, 1);
  const double obs = std::abs(out.lag1_corr);
  std::vector<double> perm(lengths.begin(), lengths.end());
  Rng rng(seed);
  std::size_t extreme = 0;
  for (std::size_t b = 0; b < permutations; ++b) {
    // Fisher-Yates with the library's unbiased integer draw
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(i + 1))]);
    if (std::abs(lag_autocorrelation(perm, 1)) >= obs - 1e-15) ++extreme;
  }
  out.p_value = (1.0 + static_cast<double>(extreme)) / (1.0 + static_cast<double>(permutations));
  return out;
}

IndependenceTest cycle_independence_test(const RegenerationRecord& rec, std::uint64_t seed,
                                         std::size_t permutations) {
  const auto lengths = rec.cycle_lengths();
  std::vector<double> x(lengths.begin(), lengths.end());
  return cycle_independence_test(x, seed, permutations);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::Precondition, "KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  KsResult out;
  out.statistic = d;
  out.p_value = special::kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
  return out;
}

}  // namespace termctl
