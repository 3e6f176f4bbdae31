#pragma once

#include <utility>

#include "termctl/model.hpp"

/// Skeleton drift transforms, hitting-time and regeneration-block moment
/// bounds. Vacuous bounds throw UNSTABLE rather than being clamped.

namespace termctl {

/// Drift on a larger set C0 from drift on C, where z1 = inf_{C0 \ C} V:
/// lambda' = (b + z1 lambda)/z1. Requires z1 > b/(1-lambda).
GeometricDriftSpec skeleton_geometric_superset(const GeometricDriftSpec& spec, double z1);

/// eta' = ln(z1^eta - b/c)/ln(z1), c and b unchanged. Requires z1 > (1+b/c)^{1/eta}.
PolynomialDriftSpec skeleton_polynomial_superset(const PolynomialDriftSpec& spec, double z1);

/// The eta' formula alone; accepts b = 0.
double superset_polynomial_exponent(double eta, double b, double c, double z1);

/// Drift on a subset C0 with minorisation mass alpha nu(C0):
/// lambda' = (lambda alpha nu + b)/(alpha nu + b), b' = b + b/(alpha nu).
GeometricDriftSpec skeleton_geometric_subset(const GeometricDriftSpec& spec, double alpha,
                                             double nu_C0);

/// Admissible open interval for c' with B = min(1,b)/(alpha nu(C)):
/// (c/(B^eta + 1), c/2).
std::pair<double, double> subset_polynomial_c_interval(const PolynomialDriftSpec& spec,
                                                       double alpha, double nu_C);

/// c' = c_hat, eta' = ln((c - c')/c')/ln B, b' = b + B(1 - alpha nu(C)).
PolynomialDriftSpec skeleton_polynomial_subset(const PolynomialDriftSpec& spec, double alpha,
                                               double nu_C, double c_hat);

enum class HittingStart { FromNu, FromX };

/// Starting point for the FROM_X variants.
struct StartState {
  double V_x = 1.0;
  bool in_C = true;
};

/// Exponent a = 1 + ln((lambda upsilon_C + b - alpha)/(1 - alpha))/ln(1/lambda).
/// Requires alpha < 1.
double hitting_exponent(const GeometricDriftSpec& spec, double alpha);

/// G(r,x): V(x) on C, r(lambda upsilon_C + b) off C.
double hitting_g(const GeometricDriftSpec& spec, double r, const StartState& x);

/// Bound on E[r^tau] for the split-chain hitting time of C x {1}.
///   FROM_NU: (b/(1-lambda)) / ((1 - (1-alpha) r^a) alpha)
///   FROM_X:  alpha G(r,x) / (1 - (1-alpha) r^a)
/// Requires 1 < r <= 1/lambda. Throws UNSTABLE when (1-alpha) r^a >= 1.
double hitting_mgf_bound(const GeometricDriftSpec& spec, double alpha, double r,
                         HittingStart at, const StartState& x = {});

/// Bound on E[tau^q], q = eta/(1-eta).
///   FROM_NU: b/(c alpha) + (upsilon_C - c + b)/(1 - alpha)
///   FROM_X:  V(x) + (upsilon_C - c + b)/(1 - alpha) 1_C(x)
/// Throws PRECONDITION when eta <= 1/2 and DEGENERATE when alpha = 1.
double hitting_poly_bound(const PolynomialDriftSpec& spec, double alpha, HittingStart at,
                          const StartState& x = {});

/// Bound on the first regeneration block.
///   geometric:  E_nu[e^{t R_1}] <= b/(alpha lambda (1-lambda)) for |t| <= ln(1/lambda)/m0
///   polynomial: E_nu[R_1^q] <= 2^{q-1} m0^q (1 + b/(c alpha) + (upsilon_C - c + b)/(1 - alpha))
double regen_moment_bound(const GeometricDriftSpec& spec, double alpha, int m0, double t);
double regen_moment_bound(const PolynomialDriftSpec& spec, double alpha, int m0);

/// Dispatches on the regime's drift; the geometric case uses t = ln(1/lambda)/(2 m0).
double regen_moment_bound(const RegimeParams& regime);

/// Largest admissible t in the geometric regeneration bound.
double regen_mgf_max_t(const GeometricDriftSpec& spec, int m0);

/// Deterministic bound on |sum_{t<=R_1} f(X_t)| from x under geometric drift:
/// d |f|_V/(1-lambda) (V(x) + b log_r(alpha G(r,x)/(1 - (1-alpha) r^a))).
double initial_cycle_bound_geometric(int d, double sup_fV_norm, const GeometricDriftSpec& spec,
                                     double alpha, double r, const StartState& x);

/// Same with the log_r term supplied directly.
double initial_cycle_bound_geometric(int d, double sup_fV_norm, double lambda, double b,
                                     double V_x, double log_r_term);

/// Polynomial drift:
/// d |f|_{V^eta}/c (V(x) + (V(x)^{1-eta} + b^eta + b0)/((1-eta) c)).
double initial_cycle_bound_polynomial(int d, double sup_fVeta_norm,
                                      const PolynomialDriftSpec& spec, double b0, double V_x);

}  // namespace termctl
