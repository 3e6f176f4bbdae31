#include "termctl/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "termctl/error.hpp"

namespace termctl {

double q_of_eta(double eta) {
  require(eta > 0.0 && eta < 1.0, ErrorCode::Precondition, "eta must lie in (0,1)");
  return eta / (1.0 - eta);
}

double compute_p0(double p, double epsilon, double eta, MomentClass moment_class,
                  double eps_bar) {
  require(p > 2.0, ErrorCode::Precondition, "p must exceed 2");
  require(epsilon > 0.0 && epsilon <= 1.0 / p, ErrorCode::Precondition,
          "epsilon must lie in (0, 1/p]");
  const double q = q_of_eta(eta);

  if (moment_class != MomentClass::PolynomialMoments && eta > 0.5) {
    const double upper = std::min(0.5, (2.0 * eta - 1.0) / (1.0 - eta));
    const double eb = eps_bar > 0.0 ? eps_bar : 0.5 * upper;
    require(eb < upper, ErrorCode::Precondition,
            fmt::format("eps_bar must lie in (0, {:.6g})", upper));
    return std::min(q - eb, p);
  }

  const double pe = p * (p + epsilon);
  if (eta > pe / (pe + epsilon)) return p;
  if (eta > 2.0 * p / (3.0 * p - 2.0)) return p * q / (p + q + epsilon);
  throw Error(ErrorCode::RegimeUnsupported,
              fmt::format("eta = {} does not exceed 2p/(3p-2) = {}; no moment branch applies",
                          eta, 2.0 * p / (3.0 * p - 2.0)));
}

bool p0_lower_bound_ambiguous(double p, double eta) {
  return eta > p / (2.0 * p - 1.0) && eta <= 2.0 * p / (3.0 * p - 2.0);
}

double effective_p0(const RegimeParams& regime) {
  if (regime.geometric()) return regime.moments.p;
  const auto& poly = std::get<PolynomialDriftSpec>(regime.drift);
  return compute_p0(regime.moments.p, regime.moments.epsilon, poly.eta,
                    regime.moments.moment_class, regime.eps_bar);
}

double psi_bar_geometric(double alpha, double lambda, double b, double p, double epsilon,
                         double M) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::Precondition, "lambda must lie in (0,1)");
  require(b > 0.0 && p > 2.0 && epsilon > 0.0 && M >= 0.0, ErrorCode::Precondition,
          "psi_bar needs b > 0, p > 2, epsilon > 0, M >= 0");
  const double log_val = -std::log(alpha) +
                         (1.0 + epsilon / p) * std::log(b / (alpha * (1.0 - lambda))) +
                         p * std::log(p / (std::log(1.0 / lambda) * std::numbers::e));
  return std::exp(log_val) * M;
}

double psi_bar_geometric_multi(double alpha, double lambda, double b, int m0, double p,
                               double epsilon, double M) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::Precondition, "lambda must lie in (0,1)");
  require(b > 0.0 && m0 >= 1 && p > 2.0 && epsilon > 0.0 && M >= 0.0,
          ErrorCode::Precondition, "invalid multi-step geometric inputs");
  return std::pow(b * m0 / (alpha * (1.0 - lambda)), epsilon / p) * M / alpha;
}

namespace {

double residual_base(double alpha, double b, double c, double upsilon_C) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(alpha < 1.0, ErrorCode::Degenerate,
          "alpha = 1 makes the residual kernel term (upsilon_C - c + b)/(1 - alpha) undefined");
  require(b > 0.0 && c > 0.0 && upsilon_C > 0.0, ErrorCode::Precondition,
          "b, c and upsilon_C must be positive");
  return 1.0 + b / (c * alpha) + (upsilon_C - c + b) / (1.0 - alpha);
}

}  // namespace

double psi_tilde_polynomial(double alpha, double b, double c, double upsilon_C, double p,
                            double epsilon, double p0, double M) {
  const double base = residual_base(alpha, b, c, upsilon_C);
  require(p > 2.0 && p0 > 1.0 && epsilon > 0.0 && M >= 0.0, ErrorCode::Precondition,
          "psi_tilde needs p > 2, p0 > 1, epsilon > 0, M >= 0");
  return std::pow(base, 1.0 + epsilon / p0) * M / alpha;
}

double psi_tilde_polynomial_multi(double alpha, double b, double c, double upsilon_C,
                                  double eta, int m0, double p, double epsilon, double p0,
                                  double M) {
  const double base = residual_base(alpha, b, c, upsilon_C);
  require(m0 >= 1 && p > 2.0 && p0 > 1.0 && epsilon > 0.0 && M >= 0.0,
          ErrorCode::Precondition, "invalid multi-step polynomial inputs");
  const double q = q_of_eta(eta);
  return std::pow(static_cast<double>(m0), q / (p0 * p0)) *
         std::pow(base, (p - p0 + epsilon) / p) * M / alpha;
}

double state_dimension_factor(const RegimeParams& regime) {
  const auto& mom = regime.moments;
  const auto& mino = regime.minorisation;
  if (const auto* g = std::get_if<GeometricDriftSpec>(&regime.drift)) {
    if (regime.one_step())
      return psi_bar_geometric(mino.alpha, g->lambda, g->b, mom.p, mom.epsilon, mom.M);
    return psi_bar_geometric_multi(mino.alpha, g->lambda, g->b, mino.m0, mom.p, mom.epsilon,
                                   mom.M);
  }
  const auto& poly = std::get<PolynomialDriftSpec>(regime.drift);
  const double p0 = effective_p0(regime);
  if (regime.one_step())
    return psi_tilde_polynomial(mino.alpha, poly.b, poly.c, poly.upsilon_C, mom.p, mom.epsilon,
                                p0, mom.M);
  return psi_tilde_polynomial_multi(mino.alpha, poly.b, poly.c, poly.upsilon_C, poly.eta,
                                    mino.m0, mom.p, mom.epsilon, p0, mom.M);
}

double approximation_rate_exponent(const RegimeParams& regime) {
  const double p0 = effective_p0(regime);
  if (regime.one_step()) return 1.0 / p0;
  return 0.25 + 1.0 / (4.0 * (p0 - 1.0));
}

double approximation_rate(const RegimeParams& regime, double T) {
  require(T >= 3.0, ErrorCode::Precondition, "approximation rate needs T >= 3");
  return std::pow(T, approximation_rate_exponent(regime)) * std::log(T);
}

namespace {

double clt_p0(const RegimeParams& regime) {
  const double p0 = effective_p0(regime);
  require(p0 > 2.0, ErrorCode::RegimeUnsupported,
          fmt::format("p0 = {} <= 2 gives no CLT guarantee", p0));
  return p0;
}

}  // namespace

double dimension_growth_exponent(const RegimeParams& regime) {
  const double p0 = clt_p0(regime);
  return regime.one_step() ? (p0 - 2.0) / (2.0 * p0) : (p0 - 2.0) / (4.0 * (p0 - 1.0));
}

double simulation_growth_exponent(const RegimeParams& regime) {
  const double p0 = clt_p0(regime);
  return regime.one_step() ? 2.0 * p0 / (p0 - 2.0) : 4.0 * (p0 - 1.0) / (p0 - 2.0);
}

double log_threshold_floor(double p0, bool one_step) {
  return one_step ? 10.0 * p0 / (p0 - 2.0) : 16.0 * (p0 - 1.0) / (p0 - 2.0);
}

double log_min_simulation_threshold(const ThresholdTerms& t) {
  require(t.delta1 > 3.0 / (3.0 + t.a), ErrorCode::Precondition,
          fmt::format("delta1 must exceed 3/(3+a) = {:.6g}", 3.0 / (3.0 + t.a)));
  require(t.delta2 > 0.0, ErrorCode::Precondition, "delta2 must be positive");
  require(t.epsilon > 0.0, ErrorCode::Precondition, "epsilon must be positive");
  require(t.base > 0.0, ErrorCode::Precondition, "threshold base must be positive");
  if (t.one_step)
    require(t.p0 > 4.0, ErrorCode::Precondition,
            "the one-step stopping threshold requires p0 > 4");
  else
    require(t.p0 > 2.0, ErrorCode::Precondition,
            "the multi-step stopping threshold requires p0 > 2");

  const double k = t.one_step ? 2.0 * t.p0 / (t.p0 - 2.0) : 4.0 * (t.p0 - 1.0) / (t.p0 - 2.0);
  const double product =
      k * (1.0 + t.delta1) * std::log(t.base) + 2.0 * k * (1.0 + t.delta2) * -std::log(t.epsilon);
  return std::max(product, log_threshold_floor(t.p0, t.one_step));
}

double min_simulation_threshold(const ThresholdTerms& terms) {
  return std::exp(log_min_simulation_threshold(terms));
}

namespace {

ThresholdTerms terms_for(const RegimeParams& regime, double epsilon, double delta1,
                         double delta2) {
  ThresholdTerms t;
  const double d = regime.dim_feature;
  t.base = state_dimension_factor(regime) * regime.trace_ratio * regime.trace_ratio * d * d *
           d * regime.psi_d();
  t.epsilon = epsilon;
  t.p0 = effective_p0(regime);
  t.one_step = regime.one_step();
  t.delta1 = delta1;
  t.delta2 = delta2;
  t.a = regime.a;
  return t;
}

}  // namespace

double min_simulation_threshold(const RegimeParams& regime, double epsilon, double delta1,
                                double delta2) {
  return min_simulation_threshold(terms_for(regime, epsilon, delta1, delta2));
}

double log_min_simulation_threshold(const RegimeParams& regime, double epsilon,
                                    double delta1, double delta2) {
  return log_min_simulation_threshold(terms_for(regime, epsilon, delta1, delta2));
}

double optimal_batch_exponent(double p0, bool one_step, double delta_bar,
                              BatchExponentMode mode) {
  require(p0 > 2.0, ErrorCode::RegimeUnsupported, "batch exponent needs p0 > 2");
  const bool full = mode == BatchExponentMode::HighDimensional;
  if (full) require(delta_bar > 0.0, ErrorCode::Precondition, "delta_bar must be positive");
  if (one_step) {
    const double mid = full ? (p0 - 2.0) / (2.0 * p0 * (1.0 + delta_bar)) : 0.0;
    return 0.5 + mid + 1.0 / p0;
  }
  const double mid = full ? (p0 - 2.0) / (4.0 * (p0 - 1.0) * (1.0 + delta_bar)) : 0.0;
  return 0.75 + 1.0 / (4.0 * (p0 - 1.0)) + mid;
}

double optimal_batch_exponent(const RegimeParams& regime, double delta_bar,
                              BatchExponentMode mode) {
  if (mode == BatchExponentMode::HighDimensional)
    require(delta_bar > 1.0 / (1.0 + regime.a), ErrorCode::Precondition,
            fmt::format("delta_bar must exceed 1/(1+a) = {:.6g}", 1.0 / (1.0 + regime.a)));
  return optimal_batch_exponent(effective_p0(regime), regime.one_step(), delta_bar, mode);
}

double stopping_batch_exponent(const RegimeParams& regime) {
  return optimal_batch_exponent(effective_p0(regime), regime.one_step(), 0.0,
                                BatchExponentMode::DimensionNegligible);
}

RateReport rate_report(const RegimeParams& regime) {
  RateReport r;
  r.p0 = effective_p0(regime);
  r.psi_N = state_dimension_factor(regime);
  r.psi_T_exponent = approximation_rate_exponent(regime);
  r.psi_T_log_power = 1;
  r.dim_growth_exponent = dimension_growth_exponent(regime);
  r.sim_growth_exponent = simulation_growth_exponent(regime);
  return r;
}

}  // namespace termctl
