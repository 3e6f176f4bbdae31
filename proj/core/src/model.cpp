#include "termctl/model.hpp"

#include <cmath>
#include <algorithm>

#include <fmt/format.h>

#include "termctl/error.hpp"

namespace termctl {

namespace {

void join_and_throw(const std::vector<std::string>& violations, const char* what) {
  if (violations.empty()) return;
  std::string msg = what;
  msg += ": ";
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) msg += "; ";
    msg += violations[i];
  }
  throw Error(ErrorCode::Precondition, msg);
}

void check_geometric(const GeometricDriftSpec& s, std::vector<std::string>& out) {
  if (!(s.lambda > 0.0 && s.lambda < 1.0)) out.emplace_back("lambda must lie in (0,1)");
  if (!(s.b > 0.0)) out.emplace_back("b must be positive");
  if (!(s.upsilon_C > 0.0)) out.emplace_back("upsilon_C must be positive");
  if (s.m0 < 1) out.emplace_back("drift m0 must be >= 1");
}

void check_polynomial(const PolynomialDriftSpec& s, std::vector<std::string>& out) {
  if (!(s.eta > 0.0 && s.eta < 1.0)) out.emplace_back("eta must lie in (0,1)");
  if (!(s.c > 0.0)) out.emplace_back("c must be positive");
  if (!(s.b > 0.0)) out.emplace_back("b must be positive");
  if (!(s.upsilon_C > 0.0)) out.emplace_back("upsilon_C must be positive");
  if (s.m0 < 1) out.emplace_back("drift m0 must be >= 1");
}

void check_minorisation(const MinorisationSpec& s, std::vector<std::string>& out) {
  if (!(s.alpha > 0.0 && s.alpha <= 1.0)) out.emplace_back("alpha must lie in (0,1]");
  if (s.m0 < 1) out.emplace_back("minorisation m0 must be >= 1");
}

void check_moments(const MomentSpec& s, std::vector<std::string>& out) {
  if (!(s.p > 2.0)) out.emplace_back("p must exceed 2");
  if (!(s.epsilon > 0.0 && s.epsilon <= 1.0 / s.p))
    out.emplace_back("epsilon must lie in (0, 1/p]");
  if (!(s.M >= 0.0) || !std::isfinite(s.M)) out.emplace_back("M must be finite and nonnegative");
}

}  // namespace

ChainOutput::ChainOutput(RowMatrix values, std::uint64_t seed, std::string label)
    : values_(std::move(values)), seed_(seed), label_(std::move(label)) {
  require(values_.rows() >= 1 && values_.cols() >= 1, ErrorCode::Precondition,
          "chain output needs T >= 1 and d >= 1");
  require(values_.allFinite(), ErrorCode::Precondition, "chain output has non-finite entries");
}

GeometricDriftSpec GeometricDriftSpec::make(double lambda, double b, double upsilon_C, int m0) {
  GeometricDriftSpec s{lambda, b, upsilon_C, m0};
  std::vector<std::string> v;
  check_geometric(s, v);
  join_and_throw(v, "invalid geometric drift");
  return s;
}

PolynomialDriftSpec PolynomialDriftSpec::make(double c, double b, double eta, double upsilon_C,
                                              int m0) {
  PolynomialDriftSpec s{c, b, eta, upsilon_C, m0};
  std::vector<std::string> v;
  check_polynomial(s, v);
  join_and_throw(v, "invalid polynomial drift");
  return s;
}

MinorisationSpec MinorisationSpec::make(double alpha, int m0) {
  MinorisationSpec s;
  s.alpha = alpha;
  s.m0 = m0;
  std::vector<std::string> v;
  check_minorisation(s, v);
  join_and_throw(v, "invalid minorisation");
  return s;
}

MomentSpec MomentSpec::make(double p, double epsilon, double M, MomentClass moment_class) {
  MomentSpec s{p, epsilon, M, moment_class, false};
  std::vector<std::string> v;
  check_moments(s, v);
  join_and_throw(v, "invalid moment condition");
  return s;
}

double RegimeParams::psi_d() const { return std::pow(static_cast<double>(dim_feature), a); }

std::vector<std::string> validate_regime(const RegimeParams& params) {
  std::vector<std::string> out;
  std::visit(
      [&](const auto& drift) {
        using T = std::decay_t<decltype(drift)>;
        if constexpr (std::is_same_v<T, GeometricDriftSpec>)
          check_geometric(drift, out);
        else
          check_polynomial(drift, out);
      },
      params.drift);
  check_minorisation(params.minorisation, out);
  check_moments(params.moments, out);

  const int drift_m0 = std::visit([](const auto& s) { return s.m0; }, params.drift);
  if (drift_m0 != params.minorisation.m0)
    out.emplace_back("drift m0 and minorisation m0 must agree");
  if (params.dim_state < 1) out.emplace_back("dim_state must be >= 1");
  if (params.dim_feature < 1) out.emplace_back("dim_feature must be >= 1");
  if (!(params.a > 0.0)) out.emplace_back("a must be positive");
  if (!(params.trace_ratio > 0.0)) out.emplace_back("trace_ratio must be positive");
  if (!(params.sigma0 > 0.0)) out.emplace_back("sigma0 must be positive");
  if (!(params.theta0 > 0.0)) out.emplace_back("theta0 must be positive");
  if (params.eps_bar < 0.0) out.emplace_back("eps_bar must be nonnegative");

  // Cross-field requirements for the effective moment order under polynomial drift.
  if (const auto* poly = std::get_if<PolynomialDriftSpec>(&params.drift)) {
    const double p = params.moments.p;
    const double eta = poly->eta;
    if (p > 2.0 && eta > 0.0 && eta < 1.0) {
      const bool exp_class = params.moments.moment_class != MomentClass::PolynomialMoments;
      const double lower = 2.0 * p / (3.0 * p - 2.0);
      if (exp_class && eta > 0.5) {
        const double eps_max = std::min(0.5, (2.0 * eta - 1.0) / (1.0 - eta));
        if (params.eps_bar >= eps_max)
          out.push_back(fmt::format("eps_bar must lie in (0, {:.6g})", eps_max));
      } else if (!(eta > lower)) {
        out.push_back(fmt::format(
            "eta must exceed 2p/(3p-2) = {:.6g} for the polynomial-moment branch of p0", lower));
      }
    }
  }
  return out;
}

void require_valid(const RegimeParams& params) {
  join_and_throw(validate_regime(params), "invalid regime");
}

CovarianceEstimate::CovarianceEstimate(Matrix matrix, Eigen::Index batch_size,
                                       Eigen::Index num_batches, Eigen::Index T,
                                       EstimateKind kind, double jitter)
    : matrix_(std::move(matrix)),
      batch_size_(batch_size),
      num_batches_(num_batches),
      T_(T),
      kind_(kind),
      jitter_(jitter) {
  require(matrix_.rows() == matrix_.cols() && matrix_.rows() >= 1, ErrorCode::Precondition,
          "covariance must be square and non-empty");
  require(matrix_.allFinite(), ErrorCode::Precondition, "covariance has non-finite entries");
  const double scale = std::max(matrix_.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * scale, ErrorCode::Precondition, "covariance is not symmetric");
  // exact symmetry from here on
  matrix_ = 0.5 * (matrix_ + matrix_.transpose()).eval();
}

CovarianceEstimate CovarianceEstimate::analytic(Matrix matrix) {
  return CovarianceEstimate(std::move(matrix), 0, 0, 0, EstimateKind::Analytic);
}

CovarianceEstimate CovarianceEstimate::with_jitter(double zeta) const {
  Matrix m = matrix_;
  m.diagonal().array() += zeta;
  return CovarianceEstimate(std::move(m), batch_size_, num_batches_, T_, kind_, jitter_ + zeta);
}

double estimate_moment_bound(const ChainOutput& output, double p, double epsilon) {
  const double power = p + epsilon;
  double best = 0.0;
  for (Eigen::Index j = 0; j < output.d(); ++j) {
    const double m = output.values().col(j).array().abs().pow(power).mean();
    best = std::max(best, m);
  }
  return best;
}

}  // namespace termctl
