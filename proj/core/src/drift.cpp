#include "termctl/drift.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "termctl/error.hpp"
#include "termctl/rates.hpp"

namespace termctl {

GeometricDriftSpec skeleton_geometric_superset(const GeometricDriftSpec& spec, double z1) {
  const double limit = spec.b / (1.0 - spec.lambda);
  require(z1 > limit, ErrorCode::Precondition,
          fmt::format("z1 must exceed b/(1-lambda) = {}", limit));
  GeometricDriftSpec out = spec;
  out.lambda = (spec.b + z1 * spec.lambda) / z1;
  return out;
}

double superset_polynomial_exponent(double eta, double b, double c, double z1) {
  require(eta > 0.0 && eta < 1.0 && c > 0.0 && b >= 0.0, ErrorCode::Precondition,
          "need eta in (0,1), c > 0, b >= 0");
  const double limit = std::pow(1.0 + b / c, 1.0 / eta);
  require(z1 > limit, ErrorCode::Precondition,
          fmt::format("z1 must exceed (1+b/c)^(1/eta) = {}", limit));
  return std::log(std::pow(z1, eta) - b / c) / std::log(z1);
}

PolynomialDriftSpec skeleton_polynomial_superset(const PolynomialDriftSpec& spec, double z1) {
  PolynomialDriftSpec out = spec;
  out.eta = superset_polynomial_exponent(spec.eta, spec.b, spec.c, z1);
  return out;
}

GeometricDriftSpec skeleton_geometric_subset(const GeometricDriftSpec& spec, double alpha,
                                             double nu_C0) {
  const double an = alpha * nu_C0;
  require(an > 0.0 && an <= 1.0, ErrorCode::Precondition, "alpha nu(C0) must lie in (0,1]");
  GeometricDriftSpec out = spec;
  out.lambda = (spec.lambda * an + spec.b) / (an + spec.b);
  out.b = spec.b + spec.b / an;
  return out;
}

namespace {

double subset_B(const PolynomialDriftSpec& spec, double alpha, double nu_C) {
  const double an = alpha * nu_C;
  require(an > 0.0 && an <= 1.0, ErrorCode::Precondition, "alpha nu(C) must lie in (0,1]");
  const double B = std::min(1.0, spec.b) / an;
  require(B > 1.0, ErrorCode::Precondition, "min(1,b)/(alpha nu(C)) must exceed 1");
  return B;
}

}  // namespace

std::pair<double, double> subset_polynomial_c_interval(const PolynomialDriftSpec& spec,
                                                       double alpha, double nu_C) {
  const double B = subset_B(spec, alpha, nu_C);
  return {spec.c / (std::pow(B, spec.eta) + 1.0), spec.c / 2.0};
}

PolynomialDriftSpec skeleton_polynomial_subset(const PolynomialDriftSpec& spec, double alpha,
                                               double nu_C, double c_hat) {
  const double B = subset_B(spec, alpha, nu_C);
  const auto [lo, hi] = subset_polynomial_c_interval(spec, alpha, nu_C);
  require(c_hat > lo && c_hat < hi, ErrorCode::Precondition,
          fmt::format("c_hat must lie in ({}, {})", lo, hi));
  PolynomialDriftSpec out = spec;
  out.c = c_hat;
  out.eta = std::log((spec.c - c_hat) / c_hat) / std::log(B);
  out.b = spec.b + B * (1.0 - alpha * nu_C);
  return out;
}

double hitting_exponent(const GeometricDriftSpec& spec, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::Precondition,
          "the hitting exponent needs alpha in (0,1)");
  const double ratio = (spec.lambda * spec.upsilon_C + spec.b - alpha) / (1.0 - alpha);
  require(ratio > 0.0, ErrorCode::Precondition,
          "lambda upsilon_C + b - alpha must be positive");
  return 1.0 + std::log(ratio) / std::log(1.0 / spec.lambda);
}

double hitting_g(const GeometricDriftSpec& spec, double r, const StartState& x) {
  return x.in_C ? x.V_x : r * (spec.lambda * spec.upsilon_C + spec.b);
}

double hitting_mgf_bound(const GeometricDriftSpec& spec, double alpha, double r,
                         HittingStart at, const StartState& x) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(r > 1.0 && r <= 1.0 / spec.lambda * (1.0 + 1e-12), ErrorCode::Precondition,
          "r must lie in (1, 1/lambda]");
  double leak = 0.0;
  if (alpha < 1.0) {
    leak = (1.0 - alpha) * std::pow(r, hitting_exponent(spec, alpha));
    require(leak < 1.0, ErrorCode::Unstable,
            fmt::format("(1-alpha) r^a = {} >= 1; the bound is vacuous, shrink r", leak));
  }
  if (at == HittingStart::FromNu) return (spec.b / (1.0 - spec.lambda)) / ((1.0 - leak) * alpha);
  return alpha * hitting_g(spec, r, x) / (1.0 - leak);
}

double hitting_poly_bound(const PolynomialDriftSpec& spec, double alpha, HittingStart at,
                          const StartState& x) {
  require(spec.eta > 0.5, ErrorCode::Precondition, "the polynomial hitting bound needs eta > 1/2");
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(alpha < 1.0, ErrorCode::Degenerate, "alpha = 1 leaves no residual kernel");
  const double residual = (spec.upsilon_C - spec.c + spec.b) / (1.0 - alpha);
  if (at == HittingStart::FromNu) return spec.b / (spec.c * alpha) + residual;
  return x.V_x + (x.in_C ? residual : 0.0);
}

double regen_mgf_max_t(const GeometricDriftSpec& spec, int m0) {
  return std::log(1.0 / spec.lambda) / m0;
}

double regen_moment_bound(const GeometricDriftSpec& spec, double alpha, int m0, double t) {
  require(m0 >= 1, ErrorCode::Precondition, "m0 must be >= 1");
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(std::abs(t) <= regen_mgf_max_t(spec, m0) * (1.0 + 1e-12), ErrorCode::Precondition,
          "|t| must not exceed ln(1/lambda)/m0");
  return spec.b / (alpha * spec.lambda * (1.0 - spec.lambda));
}

double regen_moment_bound(const PolynomialDriftSpec& spec, double alpha, int m0) {
  require(m0 >= 1, ErrorCode::Precondition, "m0 must be >= 1");
  require(spec.eta > 0.5, ErrorCode::Precondition,
          "the polynomial block bound needs eta > 1/2");
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::Precondition, "alpha must lie in (0,1]");
  require(alpha < 1.0, ErrorCode::Degenerate, "alpha = 1 leaves no residual kernel");
  const double q = q_of_eta(spec.eta);
  const double base = 1.0 + spec.b / (spec.c * alpha) +
                      (spec.upsilon_C - spec.c + spec.b) / (1.0 - alpha);
  return std::pow(2.0, q - 1.0) * std::pow(static_cast<double>(m0), q) * base;
}

double regen_moment_bound(const RegimeParams& regime) {
  const int m0 = regime.minorisation.m0;
  const double alpha = regime.minorisation.alpha;
  if (const auto* g = std::get_if<GeometricDriftSpec>(&regime.drift))
    return regen_moment_bound(*g, alpha, m0, 0.5 * regen_mgf_max_t(*g, m0));
  return regen_moment_bound(std::get<PolynomialDriftSpec>(regime.drift), alpha, m0);
}

double initial_cycle_bound_geometric(int d, double sup_fV_norm, double lambda, double b,
                                     double V_x, double log_r_term) {
  require(d >= 1, ErrorCode::Precondition, "d must be >= 1");
  require(std::isfinite(sup_fV_norm) && sup_fV_norm >= 0.0, ErrorCode::Precondition,
          "sup |f|_V must be finite");
  return d * sup_fV_norm / (1.0 - lambda) * (V_x + b * log_r_term);
}

double initial_cycle_bound_geometric(int d, double sup_fV_norm, const GeometricDriftSpec& spec,
                                     double alpha, double r, const StartState& x) {
  const double mgf = hitting_mgf_bound(spec, alpha, r, HittingStart::FromX, x);
  return initial_cycle_bound_geometric(d, sup_fV_norm, spec.lambda, spec.b, x.V_x,
                                       std::log(mgf) / std::log(r));
}

double initial_cycle_bound_polynomial(int d, double sup_fVeta_norm,
                                      const PolynomialDriftSpec& spec, double b0, double V_x) {
  require(d >= 1, ErrorCode::Precondition, "d must be >= 1");
  require(std::isfinite(sup_fVeta_norm) && sup_fVeta_norm >= 0.0, ErrorCode::Precondition,
          "sup |f|_{V^eta} must be finite");
  const double eta = spec.eta;
  const double hitting =
      (std::pow(V_x, 1.0 - eta) + std::pow(spec.b, eta) + b0) / ((1.0 - eta) * spec.c);
  return d * sup_fVeta_norm / spec.c * (V_x + hitting);
}

}  // namespace termctl
