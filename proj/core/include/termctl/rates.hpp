#pragma once

#include "termctl/model.hpp"

/// Closed-form rates, constants and thresholds. Every function is pure.
/// Logarithms are natural throughout.

namespace termctl {

/// Polynomial drift speed q(eta) = eta / (1 - eta).
double q_of_eta(double eta);

/// Effective moment order under polynomial drift.
///   EXPONENTIAL_MOMENTS or BOUNDED with eta > 1/2: q(eta) - eps_bar, capped at p
///   eta > p(p+eps)/(p(p+eps)+eps): p
///   2p/(3p-2) < eta: p q / (p + q + eps)
/// eps_bar = 0 picks the midpoint of (0, min{1/2, (2 eta - 1)/(1 - eta)}).
/// Throws REGIME_UNSUPPORTED when no branch applies.
double compute_p0(double p, double epsilon, double eta, MomentClass moment_class,
                  double eps_bar = 0.0);

/// True when p/(2p-1) < eta <= 2p/(3p-2): the two published lower bounds
/// of the polynomial branch disagree about such inputs.
bool p0_lower_bound_ambiguous(double p, double eta);

/// p for geometric drift, compute_p0 for polynomial drift.
double effective_p0(const RegimeParams& regime);

/// Geometric drift, one-step minorisation:
/// alpha^-1 (b/(alpha(1-lambda)))^{1+eps/p} (p/(e ln(1/lambda)))^p M.
double psi_bar_geometric(double alpha, double lambda, double b, double p, double epsilon,
                         double M);

/// Geometric drift, m0-step minorisation: alpha^-1 (b m0/(alpha(1-lambda)))^{eps/p} M.
double psi_bar_geometric_multi(double alpha, double lambda, double b, int m0, double p,
                               double epsilon, double M);

/// Polynomial drift, one-step minorisation:
/// alpha^-1 (1 + b/(c alpha) + (upsilon_C - c + b)/(1 - alpha))^{1+eps/p0} M.
/// Throws DEGENERATE at alpha = 1.
double psi_tilde_polynomial(double alpha, double b, double c, double upsilon_C, double p,
                            double epsilon, double p0, double M);

/// Polynomial drift, m0-step minorisation:
/// alpha^-1 m0^{q/p0^2} (1 + b/(c alpha) + (upsilon_C - c + b)/(1 - alpha))^{(p-p0+eps)/p} M.
double psi_tilde_polynomial_multi(double alpha, double b, double c, double upsilon_C,
                                  double eta, int m0, double p, double epsilon, double p0,
                                  double M);

/// State-dimension factor of the regime (whichever of the four forms above applies).
double state_dimension_factor(const RegimeParams& regime);

/// Exponent of T in the approximation rate; the log power is always 1.
///   one-step: 1/p0      multi-step: 1/4 + 1/(4(p0-1))
double approximation_rate_exponent(const RegimeParams& regime);

/// T^{exponent} log T. Requires T >= 3.
double approximation_rate(const RegimeParams& regime, double T);

/// Largest feature-dimension growth exponent for which the CLT still holds.
/// Throws REGIME_UNSUPPORTED when p0 <= 2.
double dimension_growth_exponent(const RegimeParams& regime);

/// Simulation-time growth exponent in d. Throws REGIME_UNSUPPORTED when p0 <= 2.
double simulation_growth_exponent(const RegimeParams& regime);

struct ThresholdTerms {
  double base = 1.0;        // psi_N (tr(Sigma_f)/sigma0)^2 d^3 psi_d
  double epsilon = 1.0;     // requested precision
  double p0 = 5.0;
  bool one_step = true;
  double delta1 = 1.0;
  double delta2 = 0.1;
  double a = 1.0;           // only used for the delta1 precondition
};

/// Natural log of the minimum simulation threshold.
///   one-step:   base^{2p0/(p0-2)(1+d1)} eps^{-4p0/(p0-2)(1+d2)} v e^{10 p0/(p0-2)}, p0 > 4
///   multi-step: base^{4(p0-1)/(p0-2)(1+d1)} eps^{-8(p0-1)/(p0-2)(1+d2)} v e^{16(p0-1)/(p0-2)}, p0 > 2
/// Throws PRECONDITION when delta1 <= 3/(3+a), delta2 <= 0 or p0 is out of range.
double log_min_simulation_threshold(const ThresholdTerms& terms);

/// exp of the above; may be +inf when the threshold overflows a double.
double min_simulation_threshold(const ThresholdTerms& terms);

/// Log of the exponential floor alone.
double log_threshold_floor(double p0, bool one_step);

/// Builds ThresholdTerms from a regime and calls min_simulation_threshold.
double min_simulation_threshold(const RegimeParams& regime, double epsilon, double delta1,
                                double delta2);
double log_min_simulation_threshold(const RegimeParams& regime, double epsilon,
                                    double delta1, double delta2);

enum class BatchExponentMode {
  HighDimensional,     // includes the d-dependent middle term
  DimensionNegligible  // 1/2 + 1/p0 (one-step), 3/4 + 1/(4(p0-1)) (multi-step)
};

/// Batch-size exponent.
///   one-step:   1/2 + (p0-2)/(2 p0 (1+delta_bar)) + 1/p0
///   multi-step: 3/4 + 1/(4(p0-1)) + (p0-2)/(4(p0-1)(1+delta_bar))
/// In HighDimensional mode delta_bar must exceed 1/(1+a).
double optimal_batch_exponent(const RegimeParams& regime, double delta_bar,
                              BatchExponentMode mode = BatchExponentMode::HighDimensional);

/// Same, from p0 and the minorisation class directly.
double optimal_batch_exponent(double p0, bool one_step, double delta_bar,
                              BatchExponentMode mode = BatchExponentMode::HighDimensional);

/// Exponent of T in the batch size used by the stopping rule:
/// 1/2 + 1/p0 (one-step) or 3/4 + 1/(4(p0-1)) (multi-step).
double stopping_batch_exponent(const RegimeParams& regime);

struct RateReport {
  double p0 = 0.0;
  double psi_N = 0.0;
  double psi_T_exponent = 0.0;
  int psi_T_log_power = 1;
  double dim_growth_exponent = 0.0;
  double sim_growth_exponent = 0.0;
};

RateReport rate_report(const RegimeParams& regime);

}  // namespace termctl
