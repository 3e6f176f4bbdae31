#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "termctl/chains.hpp"
#include "termctl/io.hpp"

/// Seeded Monte Carlo experiments. Replicate i always uses
/// derive_seed(root, i), so any subset of replicates can be rerun alone.

namespace termctl {

/// Library version plus the source revision captured at configure time.
std::string version_string();

/// Worker count: explicit value if positive, else TERMCTL_JOBS, else 1.
int resolve_jobs(int requested);

/// Calls fn(i) for i in [0, n) on `jobs` threads. Exceptions are rethrown
/// for the lowest failing index after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

double median(std::vector<double> values);

// ---------------------------------------------------------------- coverage

struct CoverageConfig {
  ChainSpec chain{.kind = "ar1", .d = 2};
  double alpha = 0.05;
  double epsilon = 0.15;
  int reps = 500;
  std::uint64_t seed = 12345;
  double p = 100.0;                  // moment order fed to the reference regime
  std::optional<double> t_star = 1000.0;
  Eigen::Index max_T = 10'000'000;
  Eigen::Index check_stride = 0;
};

struct CoverageRep {
  std::size_t index = 0;
  bool terminated = false;
  bool covered = false;
  Eigen::Index T1 = 0;
};

struct CoverageResult {
  double coverage = 0.0;       // over terminated replicates
  double ci_halfwidth = 0.0;   // 95% normal approximation
  double mean_T1 = 0.0;
  double median_T1 = 0.0;
  int terminated = 0;
  int not_terminated = 0;
  std::vector<CoverageRep> reps;
};

CoverageResult coverage_experiment(const CoverageConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------- scaling

struct ScalingConfig {
  ChainSpec chain{.kind = "ar1", .d = 2};
  double alpha = 0.05;
  std::vector<double> epsilons{0.4, 0.2, 0.1};
  int reps = 100;
  std::uint64_t seed = 12345;
  double p = 100.0;
  std::optional<double> t_star = 1000.0;
  Eigen::Index max_T = 10'000'000;
  Eigen::Index check_stride = 0;
};

struct ScalingRow {
  double epsilon = 0.0;
  double median_ratio = 0.0;
  double median_T1 = 0.0;
  int terminated = 0;
  int not_terminated = 0;
};

struct ScalingResult {
  double denominator = 0.0;  // c_{alpha,d}^{2/d} det(Sigma_f)^{1/d}
  SigmaSource sigma_source = SigmaSource::Analytic;
  std::vector<ScalingRow> rows;
  bool last_closest = false;  // |ratio - 1| smallest at the last grid point
};

ScalingResult termination_scaling_experiment(const ScalingConfig& cfg, int jobs = 1);

/// epsilon^2 T1 / denominator.
double scaling_ratio(double epsilon, double T1, double denominator);

/// c_{alpha,d}^{2/d} det(sigma)^{1/d}; PRECONDITION when det(sigma) <= 0.
double scaling_denominator(const Matrix& sigma, double alpha);

// ---------------------------------------------------------------- covariance

struct CovarianceConfig {
  ChainSpec chain{.kind = "ar1", .d = 3};
  std::vector<Eigen::Index> Ts{10'000, 100'000, 1'000'000};
  BatchMode mode = BatchMode::Table56;
  Eigen::Index user_batch_size = 0;
  // USER mode with power > 0 uses l = floor(T^power)
  double user_batch_power = 0.0;
  double delta_bar = 1.0;
  int reps = 10;
  std::uint64_t seed = 12345;
  double p = 100.0;
};

struct CovarianceRow {
  Eigen::Index T = 0;
  Eigen::Index batch_size = 0;
  Eigen::Index num_batches = 0;
  double median_error = 0.0;  // Frobenius
};

struct CovarianceResult {
  SigmaSource sigma_source = SigmaSource::Analytic;
  std::vector<CovarianceRow> rows;
  double loglog_slope = 0.0;       // least squares of log error on log T
  bool strictly_decreasing = false;
  bool low_power = false;          // reps < 2
};

CovarianceResult covariance_convergence_experiment(const CovarianceConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------- bounds

struct BoundsConfig {
  ChainSpec chain{.kind = "ar1-split", .d = 1, .half_width = 2.0};
  int reps = 20'000;
  std::uint64_t seed = 12345;
  double r = 1.03;  // argument of the hitting-time generating function
  Eigen::Index max_T = 10'000'000;
};

struct BoundCheck {
  std::string name;
  double empirical = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

struct BoundsResult {
  Certificate certificate;
  std::vector<BoundCheck> checks;
  int censored = 0;  // replicates with no regeneration before max_T
};

BoundsResult bound_validation_experiment(const BoundsConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------- regeneration

struct RegenerationConfig {
  ChainSpec chain{.kind = "ar1-split", .d = 1, .half_width = 1.0};
  Eigen::Index T = 100'000;
  int reps = 100;
  std::uint64_t seed = 12345;
  double level = 0.01;
  std::size_t permutations = 1000;
};

struct RegenerationRep {
  std::size_t index = 0;
  double ks_p_min = 1.0;  // smallest per-coordinate KS p-value
  bool ks_pass = false;
  double lag1_p = 1.0;
  bool lag1_pass = false;
  double rate = 0.0;      // bells per skeleton step
  std::size_t epochs = 0;
};

struct RegenerationResult {
  double alpha = 0.0;
  double pi_C = 0.0;
  double expected_rate = 0.0;
  double mean_rate = 0.0;
  double rate_se = 0.0;
  int ks_passes = 0;
  int lag1_passes = 0;
  std::vector<RegenerationRep> reps;
};

RegenerationResult regeneration_experiment(const RegenerationConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------- reports

/// One experiment's persisted form: JSON document and CSV table whose first
/// line is a `#` comment describing the columns.
struct Report {
  Json json;
  std::string csv;
};

/// Runs `kind` (coverage | scaling | covariance | bounds | regeneration)
/// from a JSON config; unknown keys are rejected with PRECONDITION.
Report run_experiment(const std::string& kind, const Json& config, int jobs,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

/// Writes results.json and results.csv under `dir` (created if needed).
void write_report(const std::string& dir, const Report& report);

ChainSpec chain_spec_from_json(const Json& j, ChainSpec base = {});
Json chain_spec_to_json(const ChainSpec& spec);

}  // namespace termctl
