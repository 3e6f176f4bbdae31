#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "termctl/chains.hpp"
#include "termctl/estimators.hpp"
#include "termctl/random.hpp"
#include "test_util.hpp"

using namespace termctl;

TEST_SUITE("chains") {
  TEST_CASE("AR(1) asymptotic covariance") {
    const auto s = analytic_sigma_f({.kind = "ar1", .d = 3, .rho = 0.5});
    CHECK(s.source == SigmaSource::Analytic);
    CHECK((s.sigma - 3.0 * Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK(analytic_sigma_f({.kind = "ar1", .d = 2, .rho = 0.0}).sigma == Matrix::Identity(2, 2));
  }

  TEST_CASE("AR(1) autocovariance decays like rho^k") {
    const auto out = run_chain({.kind = "ar1", .d = 1, .rho = 0.5}, 200'000, 17);
    const auto& x = out.values();
    const Eigen::Index T = out.T();
    for (int k = 1; k <= 3; ++k) {
      double s = 0.0;
      for (Eigen::Index t = 0; t + k < T; ++t) s += x(t, 0) * x(t + k, 0);
      CHECK(std::abs(s / (T - k) - std::pow(0.5, k)) < 0.02);
    }
  }

  TEST_CASE("runs are reproducible and streams match batch runs") {
    const ChainSpec spec{.kind = "rwm-gauss", .d = 2};
    const auto a = run_chain(spec, 500, 3);
    CHECK(a.values() == run_chain(spec, 500, 3).values());
    KernelStream stream(spec, 3);
    std::vector<double> row(2);
    for (Eigen::Index t = 0; t < 500; ++t) {
      stream.next(row);
      REQUIRE(row[0] == a.values()(t, 0));
      REQUIRE(row[1] == a.values()(t, 1));
    }
    CHECK_CODE(make_kernel({.kind = "hmc"}), Unknown);
  }

  TEST_CASE("RWM acceptance") {
    CHECK(rwm_acceptance_rate({.kind = "rwm-gauss", .d = 1, .step = 1e-4}, 10'000, 1) > 0.999);
    const RwmKernel k(1, 2.4, RwmKernel::Target::Gaussian);
    const double x[1] = {2.0}, y[1] = {0.5};
    CHECK(k.acceptance(x, y) == 1.0);
    // detailed balance for a symmetric proposal: pi(x) a(x,y) = pi(y) a(y,x)
    const double lhs = std::exp(k.log_target(x)) * k.acceptance(x, y);
    const double rhs = std::exp(k.log_target(y)) * k.acceptance(y, x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    const RwmKernel heavy(1, 2.4, RwmKernel::Target::HeavyTail, 4.0);
    CHECK(heavy.acceptance(x, y) == 1.0);
    CHECK(heavy.acceptance(y, x) < 1.0);
  }

  TEST_CASE("RWM Gaussian mean") {
    const auto out = run_chain({.kind = "rwm-gauss", .d = 1, .step = 2.4}, 100'000, 21);
    const double var = batch_means_cov(out, 316).matrix()(0, 0);
    CHECK(std::abs(out.mean()(0)) < 3.0 * std::sqrt(var / 1e5));
  }

  TEST_CASE("heavy-tailed RWM tail decay") {
    const auto out = run_chain({.kind = "rwm-heavy", .d = 1, .step = 2.4}, 1'000'000, 8);
    std::vector<double> lx, ly;
    for (double u : {2.0, 4.0, 8.0, 16.0}) {
      const double frac = (out.values().array().abs() > u).cast<double>().mean();
      REQUIRE(frac > 0.0);
      lx.push_back(std::log(1.0 + u));
      ly.push_back(std::log(frac));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    CHECK(std::abs(sxy / sxx + 4.0) <= 0.5);
  }

  TEST_CASE("AR(1) drift certificates verify") {
    const auto level = ar1_level_set_certificate(3, 0.5);
    CHECK(level.verified);
    const auto& g = std::get<GeometricDriftSpec>(level.drift);
    CHECK(g.lambda == doctest::Approx(0.625));
    CHECK(g.b == doctest::Approx(3.0));

    const auto box = ar1_box_certificate(1, 0.5, 2.0);
    CHECK(box.verified);
    CHECK_SIG10(box.mino.alpha, 0.24821307898992358);
    CHECK_SIG10(box.pi_C, 0.95449973610364159);
    CHECK_CODE(ar1_box_certificate(1, 0.5, 1.0), Precondition);
    CHECK(ar1_box_certificate(2, 0.5, 2.0 * std::sqrt(2.0)).verified);
  }

  TEST_CASE("split-kernel alpha from quadrature") {
    const auto k1 = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    CHECK(std::abs(k1.mino.alpha / 0.56370286165077303 - 1.0) < 1e-8);
    const auto k2 = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 2.0});
    CHECK(std::abs(k2.mino.alpha / 0.24821307898992358 - 1.0) < 1e-8);
    CHECK(k2.mino.small_set.contains(std::vector<double>{2.0}));
    CHECK_FALSE(k2.mino.small_set.contains(std::vector<double>{2.01}));
  }

  TEST_CASE("small measure sampler matches its density") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    Rng rng(6);
    const int n = 200'000;
    int below = 0;
    double y[1];
    for (int i = 0; i < n; ++i) {
      k.mino.nu.sample(rng, y);
      below += y[0] <= 0.5;
    }
    // P(Y <= 0.5) under nu by trapezoid on the density
    double cdf = 0.0;
    const int m = 200'000;
    const double lo = -12.0, hi = 0.5, hstep = (hi - lo) / m;
    for (int i = 0; i <= m; ++i) {
      const double v[1] = {lo + i * hstep};
      cdf += (i == 0 || i == m ? 0.5 : 1.0) * k.mino.nu.density(v);
    }
    cdf *= hstep;
    CHECK(std::abs(static_cast<double>(below) / n - cdf) < 4.0 * std::sqrt(cdf * (1 - cdf) / n));
  }

  TEST_CASE("heavy-tail certificate") {
    const auto cert = heavy_tail_certificate({.kind = "rwm-heavy", .d = 1, .half_width = 3.0});
    CHECK(cert.verified);
    const auto& p = std::get<PolynomialDriftSpec>(cert.drift);
    CHECK(p.eta == doctest::Approx(0.6));
    CHECK(p.upsilon_C == doctest::Approx(1024.0));
    CHECK(cert.pi_C == doctest::Approx(1.0 - std::pow(4.0, -4.0)));
    CHECK_CODE(heavy_tail_certificate({.kind = "rwm-heavy", .d = 1, .half_width = 1.0}),
               Precondition);
    CHECK_CODE(heavy_tail_certificate({.kind = "rwm-heavy", .d = 2, .half_width = 3.0}),
               Precondition);
  }

  TEST_CASE("oracle covariance for chains without a closed form") {
    const auto s = analytic_sigma_f({.kind = "rwm-gauss", .d = 1, .step = 2.4}, 1'000'000);
    CHECK(s.source == SigmaSource::OracleMc);
    CHECK(s.sigma(0, 0) > 1.0);
    CHECK_CODE(analytic_sigma_f({.kind = "user-defined"}), Unknown);
  }

  TEST_CASE("truncated autocovariance of iid draws") {
    const auto out = run_chain({.kind = "ar1", .d = 2, .rho = 0.0}, 200'000, 4);
    const Matrix s = truncated_autocov_sum(out, 58);
    CHECK((s - Matrix::Identity(2, 2)).norm() < 0.1);
    CHECK(truncated_autocov_sum(out, 0).isApprox(sample_cov(out).matrix(), 1e-12));
  }

  TEST_CASE("reference regimes") {
    const auto r = reference_regime({.kind = "ar1", .d = 2});
    CHECK(validate_regime(r).empty());
    CHECK(r.moments.p == 100.0);
    CHECK(std::isfinite(r.moments.M));
    CHECK(r.sigma0 == doctest::Approx(3.0));
    CHECK_CODE(reference_regime({.kind = "rwm-gauss"}), Unknown);
    const auto heavy = reference_regime({.kind = "rwm-heavy", .d = 1, .half_width = 3.0}, 3.0);
    CHECK(std::isfinite(heavy.moments.M));
    CHECK_FALSE(heavy.geometric());
  }
}
