#include "termctl/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "termctl/error.hpp"

namespace termctl {

std::string batch_mode_name(BatchMode mode) {
  switch (mode) {
    case BatchMode::Eq22: return "EQ22";
    case BatchMode::Table56: return "TABLE56";
    case BatchMode::User: return "USER";
  }
  return "USER";
}

BatchMode batch_mode_from_name(const std::string& name) {
  if (name == "EQ22" || name == "eq22" || name == "theorem") return BatchMode::Eq22;
  if (name == "TABLE56" || name == "table56" || name == "table") return BatchMode::Table56;
  if (name == "USER" || name == "user") return BatchMode::User;
  throw Error(ErrorCode::Precondition, "unknown batch mode '" + name + "'");
}

namespace {

Eigen::Index ceil_log(Eigen::Index T) {
  return static_cast<Eigen::Index>(std::ceil(std::log(static_cast<double>(T))));
}

// ceil with a relative guard so that exact powers such as 10^4^0.5 land on 100
Eigen::Index guarded_ceil(double x) {
  return static_cast<Eigen::Index>(std::ceil(x * (1.0 - 1e-12)));
}

}  // namespace

BatchPlan make_plan(Eigen::Index T, Eigen::Index batch_size, double exponent_used,
                    BatchMode mode) {
  require(T >= 2, ErrorCode::TooFewBatches, "need T >= 2 to form two batches");
  require(batch_size >= 1, ErrorCode::PlanInfeasible, "batch size must be >= 1");
  require(T >= 2 * batch_size, ErrorCode::PlanInfeasible,
          fmt::format("T = {} < 2 * batch size {}", T, batch_size));
  require(batch_size >= ceil_log(T), ErrorCode::PlanInfeasible,
          fmt::format("batch size {} < ceil(log T) = {}", batch_size, ceil_log(T)));
  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.num_batches = T / batch_size;
  plan.exponent_used = exponent_used;
  plan.mode = mode;
  return plan;
}

BatchPlan select_batch_size(Eigen::Index T, const RegimeParams& regime, double delta_bar,
                            BatchMode mode, Eigen::Index user_batch_size) {
  require(T >= 2, ErrorCode::TooFewBatches, "need T >= 2 to form two batches");
  if (mode == BatchMode::User) {
    const double e = user_batch_size > 0 ? std::log(static_cast<double>(user_batch_size)) /
                                               std::log(static_cast<double>(T))
                                         : 0.0;
    return make_plan(T, user_batch_size, e, mode);
  }

  const Eigen::Index floor_len = ceil_log(T);
  const Eigen::Index cap = T / 2;
  require(floor_len <= cap, ErrorCode::PlanInfeasible,
          fmt::format("T = {} too small: ceil(log T) = {} exceeds floor(T/2) = {}", T,
                      floor_len, cap));

  double exponent = 0.0;
  double scale = 1.0;
  if (mode == BatchMode::Eq22) {
    exponent = optimal_batch_exponent(regime, delta_bar, BatchExponentMode::HighDimensional);
    const double p0 = effective_p0(regime);
    scale = std::pow(static_cast<double>(regime.dim_feature),
                     -(p0 - 2.0) / (2.0 * p0 * (1.0 + delta_bar)));
  } else {
    exponent = optimal_batch_exponent(regime, delta_bar, BatchExponentMode::DimensionNegligible);
  }
  const double raw = scale * std::pow(static_cast<double>(T), exponent);
  Eigen::Index ell =
      raw >= static_cast<double>(cap) ? cap : std::max(guarded_ceil(raw), floor_len);
  ell = std::min(ell, cap);
  return make_plan(T, ell, exponent, mode);
}

CovarianceEstimate batch_means_cov(const ChainOutput& output, Eigen::Index batch_size) {
  require(batch_size >= 1, ErrorCode::Precondition, "batch size must be >= 1");
  const Eigen::Index T = output.T();
  const Eigen::Index d = output.d();
  const Eigen::Index k = T / batch_size;
  require(k >= 2, ErrorCode::TooFewBatches,
          fmt::format("only {} batch(es) of length {} fit in T = {}", k, batch_size, T));

  const auto& v = output.values();
  Matrix means(k, d);
  for (Eigen::Index i = 0; i < k; ++i)
    means.row(i) = v.middleRows(i * batch_size, batch_size).colwise().sum() /
                   static_cast<double>(batch_size);
  const Eigen::RowVectorXd grand = means.colwise().mean();
  means.rowwise() -= grand;
  Matrix sigma = (means.transpose() * means) * (static_cast<double>(batch_size) / (k - 1));
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return CovarianceEstimate(std::move(sigma), batch_size, k, T, EstimateKind::BatchMeans);
}

CovarianceEstimate batch_means_cov(const ChainOutput& output, const BatchPlan& plan) {
  require(plan.num_batches == output.T() / plan.batch_size, ErrorCode::Precondition,
          "batch plan does not match the chain length");
  return batch_means_cov(output, plan.batch_size);
}

CovarianceEstimate sample_cov(const ChainOutput& output) {
  const Eigen::Index T = output.T();
  require(T >= 2, ErrorCode::Precondition, "sample covariance needs T >= 2");
  Matrix centred = output.values();
  centred.rowwise() -= centred.colwise().mean();
  Matrix gamma = (centred.transpose() * centred) / static_cast<double>(T);
  gamma = 0.5 * (gamma + gamma.transpose()).eval();
  return CovarianceEstimate(std::move(gamma), 0, 0, T, EstimateKind::SampleCov);
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  require(llt.info() == Eigen::Success, ErrorCode::SingularSigma,
          "covariance estimate is not positive definite");
  const Vector diag = llt.matrixLLT().diagonal();
  require((diag.array() > 0.0).all(), ErrorCode::SingularSigma,
          "covariance estimate is not positive definite");
  return 2.0 * diag.array().log().sum();
}

double ess(Eigen::Index T, const CovarianceEstimate& gamma, const CovarianceEstimate& sigma,
           double jitter) {
  require(gamma.dim() == sigma.dim(), ErrorCode::Precondition,
          "gamma and sigma must have the same dimension");
  require(jitter >= 0.0, ErrorCode::Precondition, "jitter must be nonnegative");
  const double d = static_cast<double>(sigma.dim());
  const Matrix s = jitter > 0.0 ? sigma.with_jitter(jitter).matrix() : sigma.matrix();
  const double log_sigma = log_det_spd(s);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma.matrix(), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) return 0.0;
  const double log_gamma = eig.eigenvalues().array().log().sum();
  return static_cast<double>(T) * std::exp((log_gamma - log_sigma) / d);
}

SpectralDiagnostic spectral_check(const CovarianceEstimate& est, double sigma0) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(est.matrix(), Eigen::EigenvaluesOnly);
  SpectralDiagnostic out;
  out.min_eig = eig.eigenvalues().minCoeff();
  out.max_eig = eig.eigenvalues().maxCoeff();
  out.pd = out.min_eig > 0.0;
  out.condition_number =
      out.pd ? out.max_eig / out.min_eig : std::numeric_limits<double>::infinity();
  out.below_sigma0 = out.min_eig < sigma0;
  return out;
}

ConsistencyReport consistency_terms(const RegimeParams& regime, double T, double batch_size) {
  require(T > 1.0 && batch_size >= 1.0, ErrorCode::Precondition,
          "need T > 1 and batch size >= 1");
  const double d = static_cast<double>(regime.dim_feature);
  const double logT = std::log(T);
  const double rate = state_dimension_factor(regime) * regime.psi_d() * approximation_rate(regime, T);
  const auto terms = [&](double weight) {
    return ConsistencyTerms{weight * rate * logT / std::sqrt(batch_size),
                            weight * rate * rate * logT / T};
  };
  ConsistencyReport out;
  out.T = T;
  out.batch_size = batch_size;
  out.covariance = terms(d);
  out.ess = terms(std::pow(d, 1.5) * std::max(regime.trace_ratio, 1.0));
  return out;
}

PrefixBatchMeans::PrefixBatchMeans(Eigen::Index d) : d_(d), sums_(static_cast<std::size_t>(d), 0.0) {
  require(d >= 1, ErrorCode::Precondition, "dimension must be >= 1");
}

void PrefixBatchMeans::push(const double* row) {
  const auto d = static_cast<std::size_t>(d_);
  if (count_ == 0) origin_.assign(row, row + d);
  const std::size_t base = sums_.size() - d;
  for (std::size_t j = 0; j < d; ++j) sums_.push_back(sums_[base + j] + (row[j] - origin_[j]));
  ++count_;
}

Vector PrefixBatchMeans::mean(Eigen::Index t) const {
  require(t >= 1 && t <= count_, ErrorCode::Precondition, "prefix length out of range");
  Vector m(d_);
  const auto off = static_cast<std::size_t>(t * d_);
  for (Eigen::Index j = 0; j < d_; ++j)
    m(j) = origin_[static_cast<std::size_t>(j)] + sums_[off + static_cast<std::size_t>(j)] / t;
  return m;
}

Matrix PrefixBatchMeans::covariance(Eigen::Index t, Eigen::Index batch_size) const {
  require(t >= 1 && t <= count_, ErrorCode::Precondition, "prefix length out of range");
  require(batch_size >= 1, ErrorCode::Precondition, "batch size must be >= 1");
  const Eigen::Index k = t / batch_size;
  require(k >= 2, ErrorCode::TooFewBatches, "fewer than two batches");
  const auto d = static_cast<std::size_t>(d_);
  Matrix means(k, d_);
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::size_t lo = static_cast<std::size_t>(i * batch_size) * d;
    const std::size_t hi = static_cast<std::size_t>((i + 1) * batch_size) * d;
    for (std::size_t j = 0; j < d; ++j)
      means(i, static_cast<Eigen::Index>(j)) = (sums_[hi + j] - sums_[lo + j]) * inv;
  }
  const Eigen::RowVectorXd grand = means.colwise().mean();
  means.rowwise() -= grand;
  Matrix sigma = (means.transpose() * means) * (static_cast<double>(batch_size) / (k - 1));
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace termctl
