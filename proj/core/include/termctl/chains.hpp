#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "termctl/model.hpp"
#include "termctl/splitting.hpp"
#include "termctl/termination.hpp"

/// Reference chains with known stationary laws and certified drift /
/// minorisation constants. The feature map is always the identity.

namespace termctl {

class Rng;

/// Registry entry. Unused fields are ignored by each kernel.
struct ChainSpec {
  std::string kind = "ar1";   // ar1 | rwm-gauss | rwm-heavy | ar1-split
  int d = 1;
  double rho = 0.5;           // ar1, ar1-split
  double step = 2.4;          // rwm-gauss, rwm-heavy proposal scale
  double tail_index = 4.0;    // rwm-heavy: pi(x) ~ (1+|x|)^{-(d+r)}
  double drift_power = 5.0;   // rwm-heavy: V(x) = (1+|x|)^s
  double half_width = 1.0;    // small set [-h,h]^d for the split kernels
  int m0 = 1;                 // ar1-split skeleton length
};

std::vector<std::string> kernel_names();
bool is_known_kernel(const std::string& kind);

/// One Markov transition with a stateless interface.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual int dim() const = 0;
  virtual void step(std::span<const double> x, Rng& rng, std::span<double> y) const = 0;
  /// A draw from the stationary law when it is cheap, else a fixed start.
  virtual Vector initial_state(Rng& rng) const = 0;
};

std::unique_ptr<Kernel> make_kernel(const ChainSpec& spec);

/// X_{t+1} = rho X_t + sqrt(1 - rho^2) Z coordinatewise; stationary N(0, I_d).
class Ar1Kernel : public Kernel {
 public:
  Ar1Kernel(int d, double rho);
  int dim() const override { return d_; }
  void step(std::span<const double> x, Rng& rng, std::span<double> y) const override;
  Vector initial_state(Rng& rng) const override;
  double rho() const { return rho_; }
  double innovation_sd() const { return sd_; }

 private:
  int d_;
  double rho_;
  double sd_;
};

/// Random-walk Metropolis with N(0, step^2 I) proposals.
class RwmKernel : public Kernel {
 public:
  enum class Target { Gaussian, HeavyTail };
  RwmKernel(int d, double step, Target target, double tail_index = 4.0);
  int dim() const override { return d_; }
  void step(std::span<const double> x, Rng& rng, std::span<double> y) const override;
  Vector initial_state(Rng& rng) const override;

  double log_target(std::span<const double> x) const;
  /// Metropolis acceptance probability min(1, pi(y)/pi(x)).
  double acceptance(std::span<const double> x, std::span<const double> y) const;
  double proposal_sd() const { return step_; }
  Target target() const { return target_; }

  /// Acceptances / proposals over every step() call on this object.
  double acceptance_rate() const;

 private:
  int d_;
  double step_;
  Target target_;
  double tail_index_;
  mutable std::uint64_t proposed_ = 0;
  mutable std::uint64_t accepted_ = 0;
};

/// Runs a kernel for T steps and returns the identity features.
ChainOutput run_chain(const ChainSpec& spec, Eigen::Index T, std::uint64_t seed,
                      const std::optional<Vector>& x0 = std::nullopt);

/// Same trajectory as run_chain, produced lazily.
class KernelStream : public ChainStream {
 public:
  KernelStream(const ChainSpec& spec, std::uint64_t seed,
               const std::optional<Vector>& x0 = std::nullopt);
  ~KernelStream() override;
  Eigen::Index dim() const override;
  void next(std::span<double> row) override;

 private:
  std::unique_ptr<Kernel> kernel_;
  std::unique_ptr<Rng> rng_;
  Vector state_;
  Vector scratch_;
  bool started_ = false;
};

/// Acceptance rate of RWM over a run of length T (diagnostic).
double rwm_acceptance_rate(const ChainSpec& spec, Eigen::Index T, std::uint64_t seed);

enum class SigmaSource { Analytic, OracleMc };

struct SigmaF {
  Matrix sigma;
  Vector pi_f;
  SigmaSource source = SigmaSource::Analytic;
};

/// Asymptotic covariance of the identity feature. Closed form for AR(1);
/// otherwise truncated autocovariance sums (lag ceil(T^{1/3})) over a run of
/// length oracle_T, tagged ORACLE_MC. Unknown kernels throw UNKNOWN.
SigmaF analytic_sigma_f(const ChainSpec& spec, Eigen::Index oracle_T = 10'000'000,
                        std::uint64_t seed = 20240601);

/// Truncated autocovariance sum Gamma_0 + sum_{k=1}^{L} (Gamma_k + Gamma_k').
Matrix truncated_autocov_sum(const ChainOutput& output, Eigen::Index max_lag);

/// Drift and minorisation certificate bundled with the check that backs it.
struct Certificate {
  DriftSpec drift;
  MinorisationSpec mino;     // alpha, m0 (set and measure filled for split kernels)
  double pi_C = 0.0;         // stationary mass of C where known
  double max_violation = 0.0;  // largest (PV - rhs) seen on the verification grid
  bool verified = false;
  std::string description;
  std::function<double(std::span<const double>)> V;
};

/// AR(1) with V = 1 + |x|^2, lambda = (1 + rho^2)/2, b = (d+1)(1-rho^2),
/// C = {V <= 2b/(1-lambda)}.
Certificate ar1_level_set_certificate(int d, double rho);

/// AR(1) with the box C = [-h,h]^d, V = 1 + |x|^2,
/// lambda = max((1+rho^2)/2, (1 + d sigma^2 + rho^2 h^2)/(1 + h^2)),
/// b = 1 - lambda + d sigma^2. Requires h^2 > d.
Certificate ar1_box_certificate(int d, double rho, double h, int m0 = 1);

/// Heavy-tailed RWM, d = 1: V = (1+|x|)^s, eta = 1 - 2/s, c and b from
/// quadrature of PV on a radial grid, C = [-h,h].
Certificate heavy_tail_certificate(const ChainSpec& spec);

/// Split kernel for ar1-split (box small set) and rwm-heavy (d = 1).
/// alpha comes from trapezoid quadrature of the pointwise-minimum density.
SplitKernel make_split_kernel(const ChainSpec& spec);

/// Regime for the reference chain, with moment order p and the certified drift.
RegimeParams reference_regime(const ChainSpec& spec, double p = 100.0);

}  // namespace termctl
