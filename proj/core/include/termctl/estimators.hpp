#pragma once

#include <string>
#include <vector>

#include "termctl/model.hpp"
#include "termctl/rates.hpp"

namespace termctl {

enum class BatchMode { Eq22, Table56, User };

std::string batch_mode_name(BatchMode mode);
BatchMode batch_mode_from_name(const std::string& name);

/// Non-overlapping batch layout: num_batches = floor(T / batch_size).
struct BatchPlan {
  Eigen::Index batch_size = 1;
  Eigen::Index num_batches = 1;
  double exponent_used = 0.0;
  BatchMode mode = BatchMode::User;
};

/// Checks T >= 2 batch_size and batch_size >= ceil(log T).
/// Throws PLAN_INFEASIBLE on violation.
BatchPlan make_plan(Eigen::Index T, Eigen::Index batch_size, double exponent_used,
                    BatchMode mode);

/// Batch size for a run of length T.
///   EQ22:    max(ceil(d^{-(p0-2)/(2 p0 (1+delta_bar))} T^alpha), ceil(log T))
///   TABLE56: max(ceil(T^alpha), ceil(log T)) with the dimension-negligible exponent
///   USER:    user_batch_size after validation
/// The result is clamped to floor(T/2). Throws TOO_FEW_BATCHES when T < 2
/// and PLAN_INFEASIBLE when ceil(log T) > floor(T/2).
BatchPlan select_batch_size(Eigen::Index T, const RegimeParams& regime, double delta_bar,
                            BatchMode mode, Eigen::Index user_batch_size = 0);

/// Batch-means covariance with batches {(i-1)l+1, ..., il}, trailing
/// observations dropped, centred on the mean of batch means, scaled l/(k-1).
CovarianceEstimate batch_means_cov(const ChainOutput& output, const BatchPlan& plan);
CovarianceEstimate batch_means_cov(const ChainOutput& output, Eigen::Index batch_size);

/// Sample covariance with divisor T.
CovarianceEstimate sample_cov(const ChainOutput& output);

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
/// Throws SINGULAR_SIGMA when the factorization fails or a pivot is not positive.
double log_det_spd(const Matrix& m);

/// T (det gamma / det sigma)^{1/d}, ratio taken in log space. A positive
/// jitter adds jitter*I to sigma first. Throws SINGULAR_SIGMA when sigma is
/// not positive definite. A singular gamma gives 0.
double ess(Eigen::Index T, const CovarianceEstimate& gamma, const CovarianceEstimate& sigma,
           double jitter = 0.0);

struct SpectralDiagnostic {
  double min_eig = 0.0;
  double max_eig = 0.0;
  double condition_number = 0.0;  // +inf when min_eig <= 0
  bool pd = false;
  bool below_sigma0 = false;      // min_eig < sigma0
};

SpectralDiagnostic spectral_check(const CovarianceEstimate& est, double sigma0);

/// Left-hand sides of the two growth conditions for batch-means consistency,
/// evaluated at a given T and batch length. Both should be small.
struct ConsistencyTerms {
  double batch_term = 0.0;  // rate * log T / sqrt(batch length)
  double time_term = 0.0;   // rate^2 * log T / T
};

struct ConsistencyReport {
  double T = 0.0;
  double batch_size = 0.0;
  ConsistencyTerms covariance;  // weight d
  ConsistencyTerms ess;         // weight d^{3/2} sigma_d/sigma0, sigma_d bounded by the trace
};

ConsistencyReport consistency_terms(const RegimeParams& regime, double T, double batch_size);

/// Prefix sums of the rows of a growing stream, centred on the first row.
/// Any batch-means estimate over the first t rows costs O(k d^2).
class PrefixBatchMeans {
 public:
  explicit PrefixBatchMeans(Eigen::Index d);

  void push(const double* row);
  Eigen::Index size() const { return count_; }
  Eigen::Index dim() const { return d_; }

  /// Mean of the first t rows.
  Vector mean(Eigen::Index t) const;

  /// Batch-means estimate over the first t rows with the given batch size.
  Matrix covariance(Eigen::Index t, Eigen::Index batch_size) const;

 private:
  Eigen::Index d_;
  Eigen::Index count_ = 0;
  std::vector<double> origin_;
  std::vector<double> sums_;  // (count_+1) x d, row 0 is zero
};

}  // namespace termctl
