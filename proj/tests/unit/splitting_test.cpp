#include <cmath>
#include <numbers>
#include <vector>

#include "termctl/chains.hpp"
#include "termctl/random.hpp"
#include "termctl/special.hpp"
#include "termctl/splitting.hpp"
#include "test_util.hpp"

using namespace termctl;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Kernel that ignores its state: y ~ N(0,1). With nu equal to that law and
// alpha = 1 every step regenerates.
SplitKernel iid_kernel(double nu_scale = 1.0) {
  SplitKernel k;
  k.dim_state = 1;
  k.m0 = 1;
  k.step = [](std::span<const double>, Rng& rng, std::span<double> y) { y[0] = rng.normal(); };
  k.density_m0 = [](std::span<const double>, std::span<const double> y) { return phi(y[0]); };
  k.mino = MinorisationSpec::make(1.0);
  k.mino.small_set.contains = [](std::span<const double>) { return true; };
  k.mino.nu.density = [nu_scale](std::span<const double> y) { return nu_scale * phi(y[0]); };
  k.mino.nu.sample = [](Rng& rng, std::span<double> y) { y[0] = rng.normal(); };
  return k;
}

RegenerationRecord record_with(std::vector<Eigen::Index> epochs, Eigen::Index T) {
  RegenerationRecord r;
  r.T = T;
  r.epochs = std::move(epochs);
  r.rebuild_cycles();
  return r;
}

}  // namespace

TEST_SUITE("splitting") {
  TEST_CASE("every step regenerates when the kernel is its own small measure") {
    const auto run = simulate_split(iid_kernel(), 1000, std::nullopt, 1);
    const auto& rec = run.record;
    CHECK(rec.started_from_nu);
    CHECK(rec.epochs.size() == 1000);
    for (auto len : rec.cycle_lengths()) CHECK(len == 1);
    const ChainOutput out(run.trajectory);
    CHECK(kac_estimate(out, rec, 0) ==
          doctest::Approx(out.values().topRows(999).mean()).epsilon(1e-12));
  }

  TEST_CASE("an invalid small measure is detected") {
    CHECK_CODE(simulate_split(iid_kernel(2.0), 100, std::nullopt, 1), DensityViolation);
  }

  TEST_CASE("same seed, same trajectory and bells") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    const auto a = simulate_split(k, 5000, std::nullopt, 77);
    const auto b = simulate_split(k, 5000, std::nullopt, 77);
    CHECK(a.trajectory == b.trajectory);
    CHECK(a.record.bells == b.record.bells);
    CHECK(a.record.epochs == b.record.epochs);
  }

  TEST_CASE("epochs are increasing multiples of m0") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0, .m0 = 2});
    const auto run = simulate_split(k, 20000, std::nullopt, 5);
    const auto& e = run.record.epochs;
    REQUIRE(e.size() > 10);
    for (std::size_t i = 0; i < e.size(); ++i) {
      CHECK(e[i] % 2 == 0);
      if (i) CHECK(e[i] - e[i - 1] >= 2);
    }
  }

  TEST_CASE("first regeneration matches the full simulation") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 2.0});
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto run = simulate_split(k, 2000, std::nullopt, s);
      const auto fb = first_regeneration(k, std::nullopt, s, 2000);
      REQUIRE(fb.has_value());
      REQUIRE(run.record.epochs.size() >= 2);
      CHECK(fb->R == run.record.epochs[1]);
      CHECK(fb->sum(0) == doctest::Approx(run.trajectory.topRows(fb->R).sum()).epsilon(1e-12));
    }
    Vector x0(1);
    x0 << 3.0;
    const auto run = simulate_split(k, 2000, x0, 9);
    const auto fb = first_regeneration(k, x0, 9, 2000);
    REQUIRE(fb.has_value());
    CHECK(fb->R == run.record.epochs.front());
  }

  TEST_CASE("regeneration rate matches alpha times pi(C)") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    const auto run = simulate_split(k, 200'000, std::nullopt, 31);
    const double rate = static_cast<double>(run.record.epochs.size() - 1) /
                        static_cast<double>(run.record.skeleton_steps);
    const double expected = 0.56370286165077303 * 0.6826894921370859;
    CHECK(std::abs(rate - expected) < 0.01);
  }

  TEST_CASE("cycle sums by hand") {
    RowMatrix m(4, 1);
    m << 1, 2, 3, 4;
    const ChainOutput out(m);
    Vector zero = Vector::Zero(1);
    const auto cs = extract_cycles(out, record_with({2, 4}, 4), zero);
    REQUIRE(cs.xi.size() == 1);
    CHECK(cs.xi[0](0) == 7.0);
    CHECK(cs.head(0) == 3.0);
    CHECK(cs.tail(0) == 0.0);
    CHECK_FALSE(cs.centre_estimated);
  }

  TEST_CASE("cycle partition identity") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    Vector x0(1);
    x0 << 2.5;
    const auto run = simulate_split(k, 3001, x0, 4);
    const ChainOutput out(run.trajectory);
    const auto cs = extract_cycles(out, run.record);
    CHECK(cs.centre_estimated);
    Vector total = cs.head + cs.tail;
    for (const auto& xi : cs.xi) total += xi;
    CHECK(std::abs(total(0)) < 1e-9);  // centred on the grand mean
    CHECK(cs.xi.size() == run.record.cycles.size());
  }

  TEST_CASE("zero feature gives zero cycle sums") {
    const ChainOutput out(RowMatrix::Zero(10, 2));
    const auto cs = extract_cycles(out, record_with({1, 4, 9}, 10), Vector::Zero(2));
    for (const auto& xi : cs.xi) CHECK(xi.norm() == 0.0);
  }

  TEST_CASE("ratio estimator") {
    const ChainOutput c(RowMatrix::Constant(12, 1, 2.5));
    CHECK(kac_estimate(c, record_with({1, 4, 9}, 12), 0) == 2.5);
    CHECK_CODE(kac_estimate(c, record_with({1, 4}, 12), 0), TooFewCycles);

    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    const auto run = simulate_split(k, 1'000'000, std::nullopt, 2);
    const double se = std::sqrt(3.0 / 1e6);  // asymptotic variance 3 at rho = 0.5
    CHECK(std::abs(kac_estimate(ChainOutput(run.trajectory), run.record, 0)) < 3.0 * se);
  }

  TEST_CASE("two-step skeleton cycles are uncorrelated at lag 2") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0, .m0 = 2});
    const auto run = simulate_split(k, 400'000, std::nullopt, 12);
    const auto cs = extract_cycles(ChainOutput(run.trajectory), run.record, Vector::Zero(1));
    std::vector<double> sums;
    for (const auto& xi : cs.xi) sums.push_back(xi(0));
    REQUIRE(sums.size() > 1000);
    CHECK(std::abs(lag_autocorrelation(sums, 2)) < 3.0 / std::sqrt(sums.size()));
  }

  TEST_CASE("independence test under the null") {
    int passes = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      Rng rng(derive_seed(555, s));
      std::vector<double> lengths;
      for (int i = 0; i < 200; ++i) {
        int len = 1;
        while (rng.uniform() > 0.3) ++len;
        lengths.push_back(len);
      }
      passes += cycle_independence_test(lengths, s).p_value >= 0.01;
    }
    CHECK(passes >= 98);
  }

  TEST_CASE("independence test on adversarial and degenerate lengths") {
    std::vector<double> alt;
    for (int i = 0; i < 60; ++i) alt.push_back(i % 2 ? 5.0 : 1.0);
    const auto t = cycle_independence_test(alt, 1);
    CHECK(t.p_value < 0.01);
    CHECK(t.lag1_corr < -0.9);

    const std::vector<double> flat(40, 3.0);
    const auto f = cycle_independence_test(flat, 1);
    CHECK(f.lag1_corr == 0.0);
    CHECK_FALSE(f.note.empty());

    CHECK_CODE(cycle_independence_test(std::vector<double>(29, 1.0), 1), TooFewCycles);
  }

  TEST_CASE("two-sample KS") {
    Rng rng(3);
    std::vector<double> a, b, c;
    for (int i = 0; i < 2000; ++i) {
      a.push_back(rng.normal());
      b.push_back(rng.normal());
      c.push_back(rng.normal() + 0.3);
    }
    CHECK(ks_two_sample(a, b).p_value > 0.01);
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
    CHECK(ks_two_sample({1.0, 2.0}, {1.0, 2.0}).statistic == 0.0);
  }

  TEST_CASE("spot check of the minorisation") {
    const auto k = make_split_kernel({.kind = "ar1-split", .d = 1, .half_width = 1.0});
    std::vector<std::pair<Vector, Vector>> pairs;
    for (double x : {-1.0, 0.0, 0.7, 1.0})
      for (double y : {-3.0, -0.5, 0.0, 0.4, 2.0}) pairs.emplace_back(Vector::Constant(1, x), Vector::Constant(1, y));
    CHECK(spot_check_minorisation(k, pairs) <= 1.0 + 1e-9);
  }
}
