// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   termctl_acceptance                 all criteria
//   termctl_acceptance --criterion 5   one criterion

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "../unit/cli_runner.hpp"
#include "../unit/naive_batch_means.hpp"
#include "termctl/drift.hpp"
#include "termctl/estimators.hpp"
#include "termctl/harness.hpp"
#include "termctl/random.hpp"
#include "termctl/rates.hpp"
#include "termctl/termination.hpp"

using namespace termctl;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> lines;

  void note(std::string s) { lines.push_back(std::move(s)); }
};

int g_jobs = 1;

// ------------------------------------------------------------------ 1

bool sig10(double got, double want) {
  if (want == 0.0) return std::abs(got) < 1e-10;
  return std::abs(got - want) <= 5e-11 * std::abs(want);
}

Outcome formula_exactness() {
  Outcome o;
  RegimeParams geo;
  geo.drift = GeometricDriftSpec::make(0.5, 1.0, 1.0);
  geo.minorisation = MinorisationSpec::make(0.5);
  geo.moments = MomentSpec::make(4.0, 0.25, 1.0);
  RegimeParams geo2 = geo;
  geo2.drift = GeometricDriftSpec::make(0.5, 1.0, 1.0, 2);
  geo2.minorisation = MinorisationSpec::make(0.5, 2);
  const auto g = GeometricDriftSpec::make(0.5, 1.0, 1.0);
  const auto poly = PolynomialDriftSpec::make(0.5, 1.0, 0.75, 1.0);
  const auto poly1 = PolynomialDriftSpec::make(1.0, 1.0, 0.5, 1.0);
  const auto pm = MomentClass::PolynomialMoments;

  // expected values printed by tests/oracle/derived_values.py
  const std::vector<std::tuple<std::string, std::function<double()>, double>> table{
      {"p0 polynomial branch", [&] { return compute_p0(4, 0.25, 0.9, pm); }, 2.7169811320754717},
      {"p0 full-moment branch", [&] { return compute_p0(4, 0.25, 0.99, pm); }, 4.0},
      {"p0 exponential branch",
       [&] { return compute_p0(4, 0.25, 0.75, MomentClass::ExponentialMoments); }, 2.75},
      {"psi_bar geometric", [&] { return psi_bar_geometric(0.5, 0.5, 1, 4, 0.25, 1); },
       177.20620704994338},
      {"psi_tilde polynomial",
       [&] { return psi_tilde_polynomial(0.5, 1, 0.5, 1, 4, 0.25, 2.5, 1); }, 19.698310613518661},
      {"Psi_T one-step p=4 T=1e4", [&] { return approximation_rate(geo, 1e4); },
       92.103403719761827},
      {"Psi_T exponent multi-step", [&] { return approximation_rate_exponent(geo2); },
       0.33333333333333333},
      {"dimension exponent one-step", [&] { return dimension_growth_exponent(geo); }, 0.25},
      {"simulation exponent one-step", [&] { return simulation_growth_exponent(geo); }, 4.0},
      {"dimension exponent multi-step", [&] { return dimension_growth_exponent(geo2); },
       0.16666666666666667},
      {"simulation exponent multi-step", [&] { return simulation_growth_exponent(geo2); }, 6.0},
      {"T* floor one-step p0=5",
       [&] {
         return min_simulation_threshold(ThresholdTerms{.base = 1, .epsilon = 1, .p0 = 5});
       },
       17307779.953367268},
      {"T* floor multi-step p0=4",
       [&] {
         return min_simulation_threshold(
             ThresholdTerms{.base = 1, .epsilon = 1, .p0 = 4, .one_step = false});
       },
       26489122129.843472},
      {"batch exponent one-step", [&] { return optimal_batch_exponent(4, true, 1); }, 0.875},
      {"batch exponent multi-step", [&] { return optimal_batch_exponent(4, false, 1); },
       0.91666666666666667},
      {"batch length EQ22 T=1e6",
       [&] {
         return double(select_batch_size(1'000'000, geo, 1, BatchMode::Eq22).batch_size);
       },
       177828.0},
      {"batch length TABLE56 T=1e6",
       [&] {
         return double(select_batch_size(1'000'000, geo, 1, BatchMode::Table56).batch_size);
       },
       31623.0},
      {"superset geometric lambda", [&] { return skeleton_geometric_superset(g, 3).lambda; },
       0.83333333333333333},
      {"superset polynomial eta", [&] { return skeleton_polynomial_superset(poly1, 9).eta; },
       0.31546487678572872},
      {"subset geometric lambda", [&] { return skeleton_geometric_subset(g, 1, 0.2).lambda; },
       0.91666666666666667},
      {"subset geometric b", [&] { return skeleton_geometric_subset(g, 1, 0.2).b; }, 6.0},
      {"subset polynomial c lower",
       [&] { return subset_polynomial_c_interval(poly1, 1, 0.25).first; }, 0.33333333333333333},
      {"subset polynomial eta",
       [&] { return skeleton_polynomial_subset(poly1, 1, 0.25, 0.4).eta; }, 0.29248125036057809},
      {"subset polynomial b", [&] { return skeleton_polynomial_subset(poly1, 1, 0.25, 0.4).b; },
       4.0},
      {"hitting exponent", [&] { return hitting_exponent(g, 0.5); }, 2.0},
      {"hitting mgf from nu",
       [&] { return hitting_mgf_bound(g, 0.5, 1.2, HittingStart::FromNu); },
       14.285714285714286},
      {"hitting moment from nu", [&] { return hitting_poly_bound(poly, 0.5, HittingStart::FromNu); },
       7.0},
      {"regeneration mgf", [&] { return regen_moment_bound(g, 0.5, 1, 0.5 * std::log(2.0)); },
       8.0},
      {"regeneration moment m0=1", [&] { return regen_moment_bound(poly, 0.5, 1); }, 32.0},
      {"regeneration moment m0=2", [&] { return regen_moment_bound(poly, 0.5, 2); }, 256.0},
      {"initial cycle", [&] { return initial_cycle_bound_geometric(1, 1, 0.5, 1, 2, 2); }, 8.0},
  };

  o.pass = true;
  int ok = 0;
  for (const auto& [name, fn, want] : table) {
    double got = std::nan("");
    std::string err;
    try {
      got = fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    const bool good = err.empty() && sig10(got, want);
    ok += good;
    if (!good) {
      o.pass = false;
      o.note(fmt::format("mismatch {}: got {:.17g} want {:.17g} {}", name, got, want, err));
    }
  }
  o.note(fmt::format("{}/{} closed-form values agree to 10 significant digits", ok, table.size()));
  return o;
}

// ------------------------------------------------------------------ 2

Outcome batch_means_oracle() {
  Outcome o;
  Rng rng(20240602);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index T = 4 + static_cast<Eigen::Index>(rng.below(997));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(5));
    const Eigen::Index ell = 1 + static_cast<Eigen::Index>(rng.below(T / 2));
    RowMatrix x(T, d);
    for (Eigen::Index r = 0; r < T; ++r)
      for (Eigen::Index c = 0; c < d; ++c) x(r, c) = rng.normal() * (1.0 + c) + 10.0 * c;
    const Matrix want = test::naive_batch_means(x, ell);
    const Matrix got = batch_means_cov(ChainOutput(x), ell).matrix();
    const double rel = (got - want).norm() / std::max(want.norm(), 1e-300);
    worst = std::max(worst, rel);
  }
  o.pass = worst <= 1e-10;
  o.note(fmt::format("200 random inputs, worst relative Frobenius error {:.3g}", worst));
  return o;
}

// ------------------------------------------------------------------ 3

Outcome covariance_consistency() {
  Outcome o;
  CovarianceConfig c;  // AR(1) d=3 rho=0.5, TABLE56, 10 seeds, T in {1e4,1e5,1e6}
  const auto res = covariance_convergence_experiment(c, g_jobs);
  for (const auto& r : res.rows)
    o.note(fmt::format("T={} batch={} batches={} median |err|_F={:.4f}", r.T, r.batch_size,
                       r.num_batches, r.median_error));
  const double last = res.rows.back().median_error;
  o.pass = res.strictly_decreasing && last <= 0.30;
  o.note(fmt::format("strictly decreasing: {}; error at T=1e6 {:.4f} (needs <= 0.30); slope {:.3f}",
                     res.strictly_decreasing, last, res.loglog_slope));
  return o;
}

// ------------------------------------------------------------------ 4

Outcome ess_sanity() {
  Outcome o;
  const Eigen::Index T = 100'000;
  const auto ratio_median = [&](double rho) {
    const ChainSpec spec{.kind = "ar1", .d = 3, .rho = rho};
    const auto regime = reference_regime({.kind = "ar1", .d = 3});
    const auto plan = select_batch_size(T, regime, 1.0, BatchMode::Table56);
    std::vector<double> r(10);
    parallel_for(10, g_jobs, [&](std::size_t i) {
      const auto out = run_chain(spec, T, derive_seed(12345, i));
      r[i] = ess(T, sample_cov(out), batch_means_cov(out, plan)) / static_cast<double>(T);
    });
    return std::pair{median(r), plan.batch_size};
  };
  const auto [iid, ell] = ratio_median(0.0);
  const auto [ar, ell2] = ratio_median(0.5);
  o.pass = iid >= 0.9 && iid <= 1.1 && ar >= 0.25 && ar <= 0.42;
  o.note(fmt::format("iid d=3: median ESS/T {:.4f} (needs [0.9, 1.1]), batch {}", iid, ell));
  o.note(fmt::format("AR(1) rho=0.5 d=3: median ESS/T {:.4f} (needs [0.25, 0.42]), batch {}", ar,
                     ell2));
  return o;
}

// ------------------------------------------------------------------ 5

Outcome coverage() {
  Outcome o;
  CoverageConfig c;  // AR(1) d=2, alpha 0.05, epsilon 0.15, 500 replicates, max_T 1e7
  const auto res = coverage_experiment(c, g_jobs);
  o.pass = res.coverage >= 0.92 && res.coverage <= 0.98 && res.not_terminated == 0;
  o.note(fmt::format("coverage {:.4f} +- {:.4f} over {} terminated runs (needs [0.92, 0.98])",
                     res.coverage, res.ci_halfwidth, res.terminated));
  o.note(fmt::format("not terminated {} (needs 0); mean T1 {:.1f}, median T1 {:.1f}",
                     res.not_terminated, res.mean_T1, res.median_T1));
  return o;
}

// ------------------------------------------------------------------ 6

Outcome scaling() {
  Outcome o;
  ScalingConfig c;  // epsilons {0.4, 0.2, 0.1}, 100 replicates
  const auto res = termination_scaling_experiment(c, g_jobs);
  for (const auto& r : res.rows)
    o.note(fmt::format("epsilon={} median ratio {:.4f} median T1 {:.1f} not terminated {}",
                       r.epsilon, r.median_ratio, r.median_T1, r.not_terminated));
  const double first = res.rows.front().median_ratio;
  const double last = res.rows.back().median_ratio;
  o.pass = last >= 0.85 && last <= 1.15 && std::abs(last - 1.0) < std::abs(first - 1.0);
  o.note(fmt::format("ratio at smallest epsilon {:.4f} (needs [0.85, 1.15] and closer to 1 than "
                     "{:.4f})",
                     last, first));
  return o;
}

// ------------------------------------------------------------------ 7

Outcome regeneration() {
  Outcome o;
  RegenerationConfig c;  // AR(1) split kernel, 100 runs of T = 1e5
  const auto res = regeneration_experiment(c, g_jobs);
  const double gap = std::abs(res.mean_rate - res.expected_rate);
  o.pass = res.ks_passes >= 95 && res.lag1_passes >= 95 && gap <= 3.0 * res.rate_se;
  o.note(fmt::format("KS of post-regeneration states vs small measure passes {}/100 (needs 95)",
                     res.ks_passes));
  o.note(fmt::format("cycle-length lag-1 test passes {}/100 (needs 95)", res.lag1_passes));
  o.note(fmt::format("rate {:.6f} vs alpha*pi(C) = {:.6f}, gap {:.2f} SE (needs <= 3)",
                     res.mean_rate, res.expected_rate, gap / res.rate_se));
  return o;
}

// ------------------------------------------------------------------ 8

Outcome moment_bounds() {
  Outcome o;
  o.pass = true;
  const auto run = [&](const BoundsConfig& c, const std::string& label) {
    const auto res = bound_validation_experiment(c, g_jobs);
    int checked = 0;
    for (const auto& chk : res.checks) {
      if (chk.skipped) {
        o.note(fmt::format("{} {}: skipped ({})", label, chk.name, chk.note));
        continue;
      }
      ++checked;
      o.pass = o.pass && chk.pass;
      o.note(fmt::format("{} {}: empirical {:.4g} (SE {:.3g}) vs bound {:.4g} -> {}", label,
                         chk.name, chk.empirical, chk.std_error, chk.bound,
                         chk.pass ? "ok" : "EXCEEDED"));
    }
    if (checked == 0) o.pass = false;
    if (res.censored) o.note(fmt::format("{}: {} censored replicates", label, res.censored));
  };
  BoundsConfig geo;  // AR(1) split kernel, box half width 2
  run(geo, "ar1-split");
  BoundsConfig heavy;
  heavy.chain = ChainSpec{.kind = "rwm-heavy", .d = 1, .half_width = 3.0};
  run(heavy, "rwm-heavy");
  return o;
}

// ------------------------------------------------------------------ 9

Outcome determinism() {
  Outcome o;
  o.pass = true;
  const auto dir = std::filesystem::temp_directory_path() / "termctl_acceptance_det";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto file = [&](const std::string& name) { return (dir / name).string(); };
  const auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  {
    std::ofstream(file("regime.json"))
        << R"({"drift":{"kind":"polynomial","c":0.5,"b":1,"eta":0.9,"upsilon_C":2},)"
           R"("minorisation":{"alpha":0.5},"moments":{"p":6,"epsilon":0.1,"M":2}})";
    std::ofstream(file("cov.json")) << R"({"chain":{"kind":"ar1","d":2},"Ts":[1000,5000],"reps":3})";
  }

  const auto twice = [&](const std::string& label, const std::vector<std::string>& args,
                         const std::vector<std::string>& files = {}) {
    const auto a = test::run_cli(args);
    std::vector<std::string> fa;
    for (const auto& f : files) fa.push_back(slurp(f));
    const auto b = test::run_cli(args);
    bool same = a.out == b.out && a.code == b.code && !a.out.empty();
    for (std::size_t i = 0; i < files.size(); ++i) same = same && fa[i] == slurp(files[i]);
    o.pass = o.pass && same;
    o.note(fmt::format("{}: exit {}, {} bytes, identical: {}", label, a.code, a.out.size(), same));
  };

  twice("plan", {"plan", "--regime", file("regime.json"), "--epsilon", "0.05", "--bounds",
                 "--seed", "1"});
  twice("simulate", {"simulate", "--kernel", "ar1-split", "--T", "5000", "--seed", "7", "--out",
                     file("traj.csv"), "--regen", file("regen.csv")},
        {file("traj.csv"), file("regen.csv")});
  twice("analyze", {"analyze", "--input", file("traj.csv"), "--batch-mode", "table", "--p0", "4",
                    "--seed", "1"});
  twice("run-fvsr", {"run-fvsr", "--epsilon", "0.2", "--chain", "ar1", "--d", "2", "--t-star",
                     "500", "--seed", "42", "--trace", file("trace.csv")},
        {file("trace.csv")});
  twice("run-fvsr not terminated", {"run-fvsr", "--epsilon", "0.001", "--chain", "ar1", "--d",
                                    "2", "--t-star", "100", "--max-T", "2000", "--seed", "4"});
  twice("experiment", {"experiment", "covariance", "--config", file("cov.json"), "--seed", "9",
                       "--out", file("exp")},
        {file("exp/results.json"), file("exp/results.csv")});
  std::filesystem::remove_all(dir);
  return o;
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<std::string, std::function<Outcome()>>> all{
      {1, {"closed-form formulas", formula_exactness}},
      {2, {"batch means against a naive oracle", batch_means_oracle}},
      {3, {"batch-means covariance consistency", covariance_consistency}},
      {4, {"effective sample size", ess_sanity}},
      {5, {"stopping-rule coverage", coverage}},
      {6, {"termination-time scaling", scaling}},
      {7, {"regeneration law, independence and rate", regeneration}},
      {8, {"moment-bound dominance", moment_bounds}},
      {9, {"byte-identical CLI output", determinism}},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  int jobs = 0;
  app.add_option("--criterion", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--jobs", jobs, "worker threads (default: TERMCTL_JOBS or 1)");
  CLI11_PARSE(app, argc, argv);
  g_jobs = resolve_jobs(jobs);

  bool all_pass = true;
  for (const auto& [n, entry] : criteria()) {
    if (only && n != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& l : o.lines) std::cout << "  " << l << '\n';
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << entry.first << ", "
              << fmt::format("{:.1f}", secs) << " s)" << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
