#pragma once

/// Scalar special functions used across the library.

namespace termctl::special {

double normal_cdf(double x);

/// Inverse of the standard normal CDF on (0,1). Rational approximation
/// followed by one Halley step against erfc; relative error below 1e-15.
double normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Volume of the unit ball in R^d: pi^{d/2} / Gamma(d/2 + 1).
double unit_ball_volume(int d);

/// Survival function of the Kolmogorov distribution,
/// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

}  // namespace termctl::special
