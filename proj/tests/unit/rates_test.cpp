#include <cmath>

#include "termctl/estimators.hpp"
#include "termctl/rates.hpp"
#include "test_util.hpp"

using namespace termctl;

namespace {

RegimeParams geometric(int m0 = 1, double p = 4.0) {
  RegimeParams r;
  r.drift = GeometricDriftSpec::make(0.5, 1.0, 1.0, m0);
  r.minorisation = MinorisationSpec::make(0.5, m0);
  r.moments = MomentSpec::make(p, 0.25, 1.0);
  return r;
}

}  // namespace

TEST_SUITE("rates") {
  TEST_CASE("effective moment order branches") {
    const auto poly = MomentClass::PolynomialMoments;
    CHECK_SIG10(compute_p0(4.0, 0.25, 0.9, poly), 2.7169811320754717);
    CHECK_SIG10(compute_p0(4.0, 0.25, 0.99, poly), 4.0);
    // default eps_bar is the midpoint 0.25 of (0, min(1/2, 2))
    CHECK_SIG10(compute_p0(4.0, 0.25, 0.75, MomentClass::ExponentialMoments), 2.75);
    CHECK_SIG10(compute_p0(4.0, 0.25, 0.75, MomentClass::Bounded, 0.1), 2.9);
    CHECK_CODE(compute_p0(4.0, 0.25, 0.55, poly), RegimeUnsupported);
    CHECK_CODE(compute_p0(4.0, 0.25, 0.4, MomentClass::ExponentialMoments), RegimeUnsupported);
  }

  TEST_CASE("p0 is capped at p under exponential moments") {
    // q(0.95) = 19 would exceed p
    CHECK_SIG10(compute_p0(4.0, 0.25, 0.95, MomentClass::ExponentialMoments, 0.1), 4.0);
  }

  TEST_CASE("ambiguous band between the two lower bounds") {
    // p/(2p-1) = 0.5714... < eta <= 2p/(3p-2) = 0.8 at p = 4
    CHECK(p0_lower_bound_ambiguous(4.0, 0.7));
    CHECK(p0_lower_bound_ambiguous(4.0, 0.8));
    CHECK_FALSE(p0_lower_bound_ambiguous(4.0, 0.81));
    CHECK_FALSE(p0_lower_bound_ambiguous(4.0, 0.57));
  }

  TEST_CASE("state-dimension factors") {
    CHECK_SIG10(psi_bar_geometric(0.5, 0.5, 1.0, 4.0, 0.25, 1.0), 177.20620704994338);
    CHECK_SIG10(psi_tilde_polynomial(0.5, 1.0, 0.5, 1.0, 4.0, 0.25, 2.5, 1.0),
                19.698310613518661);
    CHECK_CODE(psi_tilde_polynomial(1.0, 1.0, 0.5, 1.0, 4.0, 0.25, 2.5, 1.0), Degenerate);
    // multi-step geometric: alpha^-1 (b m0/(alpha(1-lambda)))^{eps/p} M
    CHECK_SIG10(psi_bar_geometric_multi(0.5, 0.5, 1.0, 2, 4.0, 0.25, 1.0),
                2.0 * std::pow(8.0, 0.0625));
    CHECK_SIG10(state_dimension_factor(geometric()), 177.20620704994338);
  }

  TEST_CASE("approximation rate") {
    CHECK_SIG10(approximation_rate(geometric(), 1e4), 92.103403719761827);
    CHECK_SIG10(approximation_rate_exponent(geometric()), 0.25);
    CHECK_SIG10(approximation_rate_exponent(geometric(2)), 0.33333333333333333);
    CHECK(rate_report(geometric()).psi_T_log_power == 1);
  }

  TEST_CASE("growth exponents") {
    CHECK_SIG10(dimension_growth_exponent(geometric()), 0.25);
    CHECK_SIG10(simulation_growth_exponent(geometric()), 4.0);
    CHECK_SIG10(dimension_growth_exponent(geometric(2)), 0.16666666666666667);
    CHECK_SIG10(simulation_growth_exponent(geometric(2)), 6.0);
  }

  TEST_CASE("minimum simulation threshold floors") {
    CHECK_SIG10(log_threshold_floor(5.0, true), 50.0 / 3.0);
    CHECK_SIG10(log_threshold_floor(4.0, false), 24.0);
    ThresholdTerms one{.base = 1.0, .epsilon = 1.0, .p0 = 5.0, .one_step = true};
    CHECK_SIG10(min_simulation_threshold(one), 17307779.953367268);
    ThresholdTerms multi{.base = 1.0, .epsilon = 1.0, .p0 = 4.0, .one_step = false};
    CHECK_SIG10(min_simulation_threshold(multi), 26489122129.843472);
  }

  TEST_CASE("threshold preconditions") {
    ThresholdTerms t{.base = 1.0, .epsilon = 1.0, .p0 = 4.0, .one_step = true};
    CHECK_CODE(log_min_simulation_threshold(t), Precondition);  // one-step needs p0 > 4
    t.p0 = 5.0;
    t.delta1 = 0.75;  // must exceed 3/(3+a) = 0.75
    CHECK_CODE(log_min_simulation_threshold(t), Precondition);
    t.delta1 = 1.0;
    t.delta2 = 0.0;
    CHECK_CODE(log_min_simulation_threshold(t), Precondition);
  }

  TEST_CASE("batch exponents") {
    CHECK_SIG10(optimal_batch_exponent(4.0, true, 1.0), 0.875);
    CHECK_SIG10(optimal_batch_exponent(4.0, false, 1.0), 0.91666666666666667);
    CHECK_SIG10(optimal_batch_exponent(4.0, true, 1.0, BatchExponentMode::DimensionNegligible),
                0.75);
    CHECK_SIG10(stopping_batch_exponent(geometric()), 0.75);
    CHECK_SIG10(stopping_batch_exponent(geometric(2)), 0.75 + 1.0 / 12.0);
  }

  TEST_CASE("batch lengths at T = 1e6") {
    const auto r = geometric();
    CHECK(select_batch_size(1'000'000, r, 1.0, BatchMode::Eq22).batch_size == 177828);
    CHECK(select_batch_size(1'000'000, r, 1.0, BatchMode::Table56).batch_size == 31623);
  }
}
