#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termctl/estimators.hpp"
#include "termctl/model.hpp"

namespace termctl {

/// (1-alpha)-quantile of chi^2_d, by bisection on the regularized lower
/// incomplete gamma function to absolute tolerance 1e-9 or better.
double chi_square_quantile(int d, double alpha);

/// {x : (center - x)' shape^{-1} (center - x) < radius_sq}, radius_sq = q_alpha / T.
struct Ellipsoid {
  Vector center;
  Matrix shape;
  double radius_sq = 0.0;
  double q_alpha = 0.0;

  double quadratic_form(const Vector& x) const;
  /// Strict inequality: boundary points are outside.
  bool contains(const Vector& x) const;
};

/// Throws SINGULAR_SIGMA when sigma is not positive definite.
Ellipsoid confidence_ellipsoid(const Vector& mean, const CovarianceEstimate& sigma,
                               Eigen::Index T, double alpha);

/// T^{-d/2} q^{d/2} (2 pi^{d/2}/(d Gamma(d/2))) det(sigma)^{1/2}.
double ellipsoid_volume(const CovarianceEstimate& sigma, double T, double q_alpha, int d);

/// Natural log of the same volume, from a precomputed log det(sigma).
double log_ellipsoid_volume(double log_det_sigma, double T, double q_alpha, int d);

/// q_alpha^{d/2} times the volume of the unit d-ball.
double c_alpha_d(double alpha, int d);

/// 1{t < T*} + 1/t.
double lambda_guard(Eigen::Index t, double T_star);

/// Incremental supplier of feature rows f(X_1), f(X_2), ...
class ChainStream {
 public:
  virtual ~ChainStream() = default;
  virtual Eigen::Index dim() const = 0;
  /// Writes the next row into `row` (length dim()).
  virtual void next(std::span<double> row) = 0;
};

/// Replays a recorded ChainOutput; throws NOT_TERMINATED past its end.
class RecordedStream : public ChainStream {
 public:
  explicit RecordedStream(const ChainOutput& output) : output_(output) {}
  Eigen::Index dim() const override { return output_.d(); }
  void next(std::span<double> row) override;

 private:
  const ChainOutput& output_;
  Eigen::Index pos_ = 0;
};

enum class BatchPrefactor {
  Unit,    // l_t = t^{exponent}
  Theorem  // l_t = psi_N psi_d t^{exponent}
};

struct FvsrConfig {
  Eigen::Index check_stride = 0;  // 0 selects the default schedule
  Eigen::Index max_T = 10'000'000;
  double delta1 = 1.0;
  double delta2 = 0.1;
  std::optional<double> t_star;   // overrides the regime-derived threshold
  BatchPrefactor prefactor = BatchPrefactor::Unit;
  bool record_trace = true;
};

/// Default checkpoint stride: 1 when T* <= 1e4, else ceil(T*/1000).
Eigen::Index default_check_stride(double T_star);

enum class FvsrStatus { Terminated, NotTerminated };

struct TracePoint {
  Eigen::Index t = 0;
  double vol_root = 0.0;  // Vol^{1/d}; NaN when sigma was singular
  double ess = 0.0;       // NaN when sigma was singular
  Eigen::Index batch_size = 0;
};

struct TerminationReport {
  FvsrStatus status = FvsrStatus::NotTerminated;
  Eigen::Index T1 = 0;  // last t consumed when not terminated
  double epsilon = 0.0;
  double alpha = 0.0;
  Ellipsoid final_ellipsoid;
  std::vector<TracePoint> volume_trace;
  double ess_at_T1 = 0.0;
  double T_star_used = 0.0;
  std::string T_star_source;  // "THEOREM" or "USER"
  Eigen::Index check_stride = 1;
  Eigen::Index batch_size_at_T1 = 0;
  double batch_exponent = 0.0;
  double batch_prefactor = 1.0;
  int singular_checkpoints = 0;
  std::string note;
};

/// Batch size at checkpoint t: prefactor * t^exponent clamped to [ceil(log t), floor(t/2)].
Eigen::Index stopping_batch_size(Eigen::Index t, double prefactor, double exponent);

/// First checkpoint t >= T* (multiples of stride, t <= max_T) with
/// vol_root(t) + epsilon Lambda(t) < epsilon. vol_root returns nullopt when
/// the volume is undefined at t; such checkpoints are skipped.
std::optional<Eigen::Index> first_passage(
    const std::function<std::optional<double>(Eigen::Index)>& vol_root, double epsilon,
    double T_star, Eigen::Index stride, Eigen::Index max_T);

/// Fixed-volume stopping rule driven by a stream.
TerminationReport fvsr_run(ChainStream& source, double epsilon, const RegimeParams& regime,
                           double alpha, const FvsrConfig& config);

}  // namespace termctl
