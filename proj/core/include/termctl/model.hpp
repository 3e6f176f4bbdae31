#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace termctl {

class Rng;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature evaluations f(X_1), ..., f(X_T) of one run, one row per step.
class ChainOutput {
 public:
  /// Throws PRECONDITION on an empty matrix or non-finite entries.
  explicit ChainOutput(RowMatrix values, std::uint64_t seed = 0, std::string label = {});

  const RowMatrix& values() const { return values_; }
  Eigen::Index T() const { return values_.rows(); }
  Eigen::Index d() const { return values_.cols(); }
  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  /// Column means, the empirical average of f over the run.
  Vector mean() const { return values_.colwise().mean().transpose(); }

 private:
  RowMatrix values_;
  std::uint64_t seed_;
  std::string label_;
};

/// P^{m0} V <= lambda V + b 1_C.
struct GeometricDriftSpec {
  double lambda = 0.5;
  double b = 1.0;
  double upsilon_C = 1.0;  // sup_{x in C} V(x)
  int m0 = 1;

  static GeometricDriftSpec make(double lambda, double b, double upsilon_C, int m0 = 1);
};

/// P^{m0} V <= V - c V^eta + b 1_C.
struct PolynomialDriftSpec {
  double c = 1.0;
  double b = 1.0;
  double eta = 0.5;
  double upsilon_C = 1.0;
  int m0 = 1;

  static PolynomialDriftSpec make(double c, double b, double eta, double upsilon_C, int m0 = 1);
};

using DriftSpec = std::variant<GeometricDriftSpec, PolynomialDriftSpec>;

/// Small set C given by a membership predicate, plus an optional bounding box.
struct SmallSet {
  std::function<bool(std::span<const double>)> contains;
  std::optional<std::pair<Vector, Vector>> box;  // (lower, upper)
};

/// Small measure nu: density accessor and exact sampler.
struct SmallMeasure {
  std::function<double(std::span<const double>)> density;
  std::function<void(Rng&, std::span<double>)> sample;
};

/// P^{m0}(x, .) >= alpha 1_C(x) nu(.).
/// The set and measure descriptors are optional: rate calculators only need
/// (alpha, m0); the splitting engine needs both.
struct MinorisationSpec {
  double alpha = 0.5;
  int m0 = 1;
  SmallSet small_set;
  SmallMeasure nu;

  static MinorisationSpec make(double alpha, int m0 = 1);
};

enum class MomentClass { PolynomialMoments, ExponentialMoments, Bounded };

struct MomentSpec {
  double p = 4.0;
  double epsilon = 0.25;
  double M = 1.0;  // bound on sup_i pi(|f_i|^{p+epsilon})
  MomentClass moment_class = MomentClass::PolynomialMoments;
  bool M_estimated = false;  // true when M came from chain output

  static MomentSpec make(double p, double epsilon, double M,
                         MomentClass moment_class = MomentClass::PolynomialMoments);
};

/// Everything the rate, threshold and batch-size calculators need to know
/// about one sampler / feature combination.
struct RegimeParams {
  DriftSpec drift = GeometricDriftSpec{};
  MinorisationSpec minorisation;
  MomentSpec moments;
  int dim_state = 1;    // N
  int dim_feature = 1;  // d
  double a = 1.0;       // psi_d = d^a
  double trace_ratio = 1.0;  // tr(Sigma_f) / sigma0
  double sigma0 = 1.0;
  double theta0 = 0.25;
  double eps_bar = 0.0;  // 0 selects the midpoint of the admissible interval

  bool geometric() const { return std::holds_alternative<GeometricDriftSpec>(drift); }
  bool one_step() const { return minorisation.m0 == 1; }
  double psi_d() const;
};

/// One entry per violated invariant; empty when the bundle is usable.
/// Never throws.
std::vector<std::string> validate_regime(const RegimeParams& params);

/// Throws PRECONDITION listing every violation.
void require_valid(const RegimeParams& params);

enum class EstimateKind { BatchMeans, SampleCov, Analytic };

/// Symmetric d x d covariance matrix with provenance.
class CovarianceEstimate {
 public:
  /// Rejects non-finite or asymmetric (relative 1e-12) input.
  CovarianceEstimate(Matrix matrix, Eigen::Index batch_size, Eigen::Index num_batches,
                     Eigen::Index T, EstimateKind kind, double jitter = 0.0);

  static CovarianceEstimate analytic(Matrix matrix);

  const Matrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  Eigen::Index batch_size() const { return batch_size_; }
  Eigen::Index num_batches() const { return num_batches_; }
  Eigen::Index T() const { return T_; }
  EstimateKind kind() const { return kind_; }
  double jitter() const { return jitter_; }

  CovarianceEstimate with_jitter(double zeta) const;

 private:
  Matrix matrix_;
  Eigen::Index batch_size_;
  Eigen::Index num_batches_;
  Eigen::Index T_;
  EstimateKind kind_;
  double jitter_;
};

/// Empirical max_i mean(|f_i|^{p+eps}); used when M is unknown.
double estimate_moment_bound(const ChainOutput& output, double p, double epsilon);

}  // namespace termctl
