#include "termctl/termination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "termctl/error.hpp"
#include "termctl/rates.hpp"
#include "termctl/special.hpp"

namespace termctl {

double chi_square_quantile(int d, double alpha) {
  require(d >= 1, ErrorCode::Precondition, "degrees of freedom must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::Precondition, "alpha must lie in (0,1)");
  const double target = 1.0 - alpha;
  const double a = 0.5 * d;
  const auto cdf = [a](double x) { return special::gamma_p(a, 0.5 * x); };

  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(d));
  while (cdf(hi) < target) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double Ellipsoid::quadratic_form(const Vector& x) const {
  const Vector diff = center - x;
  return diff.dot(shape.llt().solve(diff));
}

bool Ellipsoid::contains(const Vector& x) const { return quadratic_form(x) < radius_sq; }

Ellipsoid confidence_ellipsoid(const Vector& mean, const CovarianceEstimate& sigma,
                               Eigen::Index T, double alpha) {
  require(T >= 1, ErrorCode::Precondition, "T must be >= 1");
  require(mean.size() == sigma.dim(), ErrorCode::Precondition,
          "mean and covariance dimensions differ");
  log_det_spd(sigma.matrix());  // throws SINGULAR_SIGMA
  Ellipsoid e;
  e.center = mean;
  e.shape = sigma.matrix();
  e.q_alpha = chi_square_quantile(static_cast<int>(sigma.dim()), alpha);
  e.radius_sq = e.q_alpha / static_cast<double>(T);
  return e;
}

double log_ellipsoid_volume(double log_det_sigma, double T, double q_alpha, int d) {
  require(T > 0.0 && q_alpha > 0.0 && d >= 1, ErrorCode::Precondition,
          "volume needs T > 0, q > 0, d >= 1");
  const double dd = d;
  const double log_ball =
      std::log(2.0) + 0.5 * dd * std::log(std::numbers::pi) - std::log(dd) - std::lgamma(0.5 * dd);
  return -0.5 * dd * std::log(T) + 0.5 * dd * std::log(q_alpha) + log_ball + 0.5 * log_det_sigma;
}

double ellipsoid_volume(const CovarianceEstimate& sigma, double T, double q_alpha, int d) {
  require(sigma.dim() == d, ErrorCode::Precondition, "covariance dimension differs from d");
  return std::exp(log_ellipsoid_volume(log_det_spd(sigma.matrix()), T, q_alpha, d));
}

double c_alpha_d(double alpha, int d) {
  return std::pow(chi_square_quantile(d, alpha), 0.5 * d) * special::unit_ball_volume(d);
}

double lambda_guard(Eigen::Index t, double T_star) {
  require(t >= 1, ErrorCode::Precondition, "t must be >= 1");
  const double td = static_cast<double>(t);
  return (td < T_star ? 1.0 : 0.0) + 1.0 / td;
}

void RecordedStream::next(std::span<double> row) {
  require(pos_ < output_.T(), ErrorCode::NotTerminated, "recorded chain exhausted");
  for (Eigen::Index j = 0; j < output_.d(); ++j)
    row[static_cast<std::size_t>(j)] = output_.values()(pos_, j);
  ++pos_;
}

Eigen::Index default_check_stride(double T_star) {
  if (T_star <= 1e4) return 1;
  return static_cast<Eigen::Index>(std::ceil(T_star / 1000.0));
}

Eigen::Index stopping_batch_size(Eigen::Index t, double prefactor, double exponent) {
  const Eigen::Index cap = t / 2;
  const Eigen::Index lo = static_cast<Eigen::Index>(std::ceil(std::log(static_cast<double>(t))));
  const double raw = prefactor * std::pow(static_cast<double>(t), exponent);
  if (!(raw < static_cast<double>(cap))) return cap;
  const auto ell = static_cast<Eigen::Index>(std::ceil(raw * (1.0 - 1e-12)));
  return std::min(std::max({ell, lo, Eigen::Index{1}}), cap);
}

std::optional<Eigen::Index> first_passage(
    const std::function<std::optional<double>(Eigen::Index)>& vol_root, double epsilon,
    double T_star, Eigen::Index stride, Eigen::Index max_T) {
  require(stride >= 1, ErrorCode::Precondition, "check stride must be >= 1");
  require(epsilon > 0.0, ErrorCode::Precondition, "epsilon must be positive");
  if (!(T_star <= static_cast<double>(max_T))) return std::nullopt;
  const auto release = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(T_star)));
  Eigen::Index t = ((release + stride - 1) / stride) * stride;
  for (; t <= max_T; t += stride) {
    const auto v = vol_root(t);
    if (!v) continue;
    if (*v + epsilon * lambda_guard(t, T_star) < epsilon) return t;
  }
  return std::nullopt;
}

namespace {

class Driver {
 public:
  Driver(ChainStream& source, Eigen::Index d) : source_(source), prefix_(d), row_(d), m2_(d, d) {
    m2_.setZero();
  }

  void advance_to(Eigen::Index t) {
    while (prefix_.size() < t) {
      source_.next(std::span<double>(row_.data(), static_cast<std::size_t>(row_.size())));
      if (prefix_.size() == 0) origin_ = row_;
      const Vector c = row_ - origin_;
      m2_.noalias() += c * c.transpose();
      prefix_.push(row_.data());
    }
  }

  Eigen::Index consumed() const { return prefix_.size(); }
  const PrefixBatchMeans& prefix() const { return prefix_; }

  // sample covariance (divisor t) of everything consumed so far
  Matrix gamma() const {
    const double t = static_cast<double>(prefix_.size());
    const Vector m = prefix_.mean(prefix_.size()) - origin_;
    Matrix g = m2_ / t - m * m.transpose();
    return 0.5 * (g + g.transpose());
  }

 private:
  ChainStream& source_;
  PrefixBatchMeans prefix_;
  Vector row_;
  Vector origin_;
  Matrix m2_;
};

double ess_from(Eigen::Index t, const Matrix& gamma, double log_det_sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) return 0.0;
  const double d = static_cast<double>(gamma.rows());
  return static_cast<double>(t) *
         std::exp((eig.eigenvalues().array().log().sum() - log_det_sigma) / d);
}

}  // namespace

TerminationReport fvsr_run(ChainStream& source, double epsilon, const RegimeParams& regime,
                           double alpha, const FvsrConfig& config) {
  require(epsilon > 0.0, ErrorCode::Precondition, "epsilon must be positive");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::Precondition, "alpha must lie in (0,1)");
  require(config.max_T >= 4, ErrorCode::Precondition, "max_T must be >= 4");
  const Eigen::Index d = source.dim();
  require(d >= 1, ErrorCode::Precondition, "stream dimension must be >= 1");

  TerminationReport rep;
  rep.epsilon = epsilon;
  rep.alpha = alpha;
  if (config.t_star) {
    require(*config.t_star >= 1.0, ErrorCode::Precondition, "T* override must be >= 1");
    rep.T_star_used = *config.t_star;
    rep.T_star_source = "USER";
  } else {
    rep.T_star_used =
        min_simulation_threshold(regime, epsilon, config.delta1, config.delta2);
    rep.T_star_source = "THEOREM";
  }
  rep.check_stride =
      config.check_stride > 0 ? config.check_stride : default_check_stride(rep.T_star_used);
  rep.batch_exponent = stopping_batch_exponent(regime);
  rep.batch_prefactor = config.prefactor == BatchPrefactor::Theorem
                            ? state_dimension_factor(regime) * regime.psi_d()
                            : 1.0;

  const double q = chi_square_quantile(static_cast<int>(d), alpha);
  const int di = static_cast<int>(d);
  Driver drv(source, d);
  double last_log_det = std::numeric_limits<double>::quiet_NaN();
  Eigen::Index last_good = 0;
  Eigen::Index last_ell = 0;
  Matrix last_sigma;

  const auto vol_root = [&](Eigen::Index t) -> std::optional<double> {
    drv.advance_to(t);
    const Eigen::Index ell = stopping_batch_size(t, rep.batch_prefactor, rep.batch_exponent);
    TracePoint tp;
    tp.t = t;
    tp.batch_size = ell;
    std::optional<double> out;
    Matrix sigma;
    double log_det = 0.0;
    bool ok = ell >= 1 && t / ell >= 2;
    if (ok) {
      sigma = drv.prefix().covariance(t, ell);
      try {
        log_det = log_det_spd(sigma);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (ok) {
      out = std::exp(log_ellipsoid_volume(log_det, static_cast<double>(t), q, di) / d);
      tp.vol_root = *out;
      last_log_det = log_det;
      last_good = t;
      last_ell = ell;
      last_sigma = std::move(sigma);
      const bool stops = *out + epsilon * lambda_guard(t, rep.T_star_used) < epsilon;
      tp.ess = (config.record_trace || stops) ? ess_from(t, drv.gamma(), log_det)
                                              : std::numeric_limits<double>::quiet_NaN();
    } else {
      ++rep.singular_checkpoints;
      tp.vol_root = std::numeric_limits<double>::quiet_NaN();
      tp.ess = std::numeric_limits<double>::quiet_NaN();
    }
    if (config.record_trace) rep.volume_trace.push_back(tp);
    return out;
  };

  const auto hit = first_passage(vol_root, epsilon, rep.T_star_used, rep.check_stride,
                                 config.max_T);
  if (hit) {
    rep.status = FvsrStatus::Terminated;
    rep.T1 = *hit;
  } else {
    rep.status = FvsrStatus::NotTerminated;
    rep.T1 = drv.consumed();
    rep.note = rep.T_star_used > static_cast<double>(config.max_T)
                   ? fmt::format("T* = {:.6g} exceeds max_T = {}", rep.T_star_used, config.max_T)
                   : "budget max_T exhausted before the stopping condition held";
  }

  if (last_good > 0) {
    rep.batch_size_at_T1 = last_ell;
    rep.final_ellipsoid.center = drv.prefix().mean(last_good);
    rep.final_ellipsoid.shape = last_sigma;
    rep.final_ellipsoid.q_alpha = q;
    rep.final_ellipsoid.radius_sq = q / static_cast<double>(last_good);
    rep.ess_at_T1 = drv.consumed() == last_good ? ess_from(last_good, drv.gamma(), last_log_det)
                                                : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace termctl
