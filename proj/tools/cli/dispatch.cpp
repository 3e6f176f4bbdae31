#include "dispatch.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "termctl/chains.hpp"
#include "termctl/drift.hpp"
#include "termctl/error.hpp"
#include "termctl/estimators.hpp"
#include "termctl/harness.hpp"
#include "termctl/io.hpp"
#include "termctl/rates.hpp"
#include "termctl/splitting.hpp"
#include "termctl/termination.hpp"

namespace termctl::cli {

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool pretty = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "root seed (deterministic output for equal seeds)");
  sub->add_flag("--pretty", c.pretty, "indented JSON plus a summary on stderr");
}

struct ChainFlags {
  ChainSpec spec;
  void add(CLI::App* sub, const std::string& kind_flag) {
    sub->add_option(kind_flag, spec.kind, "kernel: ar1 | rwm-gauss | rwm-heavy | ar1-split")
        ->check(CLI::IsMember(kernel_names()));
    sub->add_option("--d", spec.d, "state dimension")->check(CLI::PositiveNumber);
    sub->add_option("--rho", spec.rho, "AR(1) coefficient");
    sub->add_option("--step", spec.step, "RWM proposal scale");
    sub->add_option("--tail-index", spec.tail_index, "heavy-tail index r");
    sub->add_option("--drift-power", spec.drift_power, "heavy-tail drift power s");
    sub->add_option("--half-width", spec.half_width, "small-set half width h");
    sub->add_option("--m0", spec.m0, "skeleton length for ar1-split");
  }
};

void emit(std::ostream& out, const Json& j, bool pretty) {
  out << dump_json(j, pretty ? 2 : -1) << '\n';
}

Json error_json(std::string_view code, const std::string& message) {
  return Json{{"error", Json{{"code", std::string(code)}, {"message", message}}}};
}

Json nullable(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <class F>
Json try_value(F&& f) {
  try {
    return Json(f());
  } catch (const Error& e) {
    return Json{{"error", std::string(code_name(e.code()))}, {"message", e.what()}};
  }
}

// ------------------------------------------------------------------ plan

struct PlanArgs {
  std::string regime;
  double epsilon = 0.05;
  double delta1 = 1.0;
  double delta2 = 0.1;
  double delta_bar = 1.0;
  bool bounds = false;
  double r = 0.0;
};

Json bounds_json(const RegimeParams& reg, double r_arg) {
  Json b;
  const double alpha = reg.minorisation.alpha;
  const int m0 = reg.minorisation.m0;
  if (const auto* g = std::get_if<GeometricDriftSpec>(&reg.drift)) {
    b["kind"] = "geometric";
    b["hitting_exponent"] = try_value([&] { return hitting_exponent(*g, alpha); });
    // default r: midpoint of (1, 1/lambda)
    const double r = r_arg > 1.0 ? r_arg : 0.5 * (1.0 + 1.0 / g->lambda);
    b["r"] = r;
    b["hitting_mgf_from_nu"] =
        try_value([&] { return hitting_mgf_bound(*g, alpha, r, HittingStart::FromNu); });
    b["regen_t"] = regen_mgf_max_t(*g, m0) / 2.0;
    b["regen_mgf"] = try_value([&] { return regen_moment_bound(reg); });
  } else {
    const auto& p = std::get<PolynomialDriftSpec>(reg.drift);
    b["kind"] = "polynomial";
    b["q"] = p.eta / (1.0 - p.eta);
    b["hitting_moment_from_nu"] =
        try_value([&] { return hitting_poly_bound(p, alpha, HittingStart::FromNu); });
    b["regen_moment"] = try_value([&] { return regen_moment_bound(reg); });
  }
  return b;
}

Json run_plan(const PlanArgs& a, const Common& c) {
  const RegimeParams reg = read_regime_file(a.regime);
  require_valid(reg);
  require(a.epsilon > 0.0, ErrorCode::Precondition, "epsilon must be positive");
  const RateReport rr = rate_report(reg);
  Json j;
  j["p0"] = rr.p0;
  j["psi_N"] = rr.psi_N;
  j["batch_exponent"] = try_value([&] {
    return optimal_batch_exponent(reg, a.delta_bar, BatchExponentMode::HighDimensional);
  });
  j["T_star"] = try_value([&] { return min_simulation_threshold(reg, a.epsilon, a.delta1, a.delta2); });
  j["dim_growth_exponent"] = rr.dim_growth_exponent;
  j["sim_growth_exponent"] = rr.sim_growth_exponent;
  j["psi_T_exponent"] = rr.psi_T_exponent;
  j["psi_T_log_power"] = rr.psi_T_log_power;
  j["batch_exponent_dimension_negligible"] = try_value([&] {
    return optimal_batch_exponent(reg, a.delta_bar, BatchExponentMode::DimensionNegligible);
  });
  j["stopping_batch_exponent"] = stopping_batch_exponent(reg);
  j["log_T_star"] =
      try_value([&] { return log_min_simulation_threshold(reg, a.epsilon, a.delta1, a.delta2); });
  if (!reg.geometric()) {
    const double eta = std::get<PolynomialDriftSpec>(reg.drift).eta;
    j["p0_lower_bound_ambiguous"] = p0_lower_bound_ambiguous(reg.moments.p, eta);
  }
  if (const double T = j["T_star"].is_number() ? j["T_star"].get<double>() : 0.0;
      T > 1.0 && std::isfinite(T) && j["batch_exponent"].is_number()) {
    const double p0 = effective_p0(reg);
    const double scale = std::pow(static_cast<double>(reg.dim_feature),
                                  -(p0 - 2.0) / (2.0 * p0 * (1.0 + a.delta_bar)));
    const double ell = std::min(
        std::max(scale * std::pow(T, j["batch_exponent"].get<double>()), std::log(T)), T / 2.0);
    const auto ct = consistency_terms(reg, T, ell);
    const auto terms = [](const ConsistencyTerms& t) {
      return Json{{"batch_term", t.batch_term}, {"time_term", t.time_term}};
    };
    j["consistency_at_T_star"] = Json{{"T", ct.T},
                                      {"batch_size", ct.batch_size},
                                      {"covariance", terms(ct.covariance)},
                                      {"ess", terms(ct.ess)}};
  }
  j["epsilon"] = a.epsilon;
  j["seed"] = c.seed;
  if (a.bounds) j["bounds"] = bounds_json(reg, a.r);
  return j;
}

// ------------------------------------------------------------------ analyze

struct AnalyzeArgs {
  std::string input;
  std::string batch_mode = "table";
  std::optional<double> p0;
  std::string regime;
  Eigen::Index batch_size = 0;
  double delta_bar = 1.0;
  std::optional<double> sigma0;
  double jitter = 0.0;
};

Json plan_json(const BatchPlan& p) {
  return Json{{"batch_size", p.batch_size},
              {"num_batches", p.num_batches},
              {"exponent_used", p.exponent_used},
              {"mode", batch_mode_name(p.mode)}};
}

Json run_analyze(const AnalyzeArgs& a, const Common& c) {
  const ChainOutput out = read_chain_csv(a.input);
  const BatchMode mode = batch_mode_from_name(a.batch_mode);
  RegimeParams reg;
  if (!a.regime.empty()) {
    reg = read_regime_file(a.regime);
  } else if (mode != BatchMode::User) {
    require(a.p0.has_value(), ErrorCode::Precondition,
            "EQ22/TABLE56 batch sizes need --p0 or --regime");
    // geometric one-step bundle whose effective moment order is the given p0
    reg.moments = MomentSpec{*a.p0, 1.0 / (2.0 * *a.p0), 1.0, MomentClass::PolynomialMoments, false};
  }
  reg.dim_feature = static_cast<int>(out.d());
  const BatchPlan plan = select_batch_size(out.T(), reg, a.delta_bar, mode, a.batch_size);
  const CovarianceEstimate sigma = batch_means_cov(out, plan);
  const CovarianceEstimate gamma = sample_cov(out);
  const double s0 = a.sigma0 ? *a.sigma0 : (a.regime.empty() ? 1.0 : reg.sigma0);
  const SpectralDiagnostic sd = spectral_check(sigma, s0);

  Json j;
  j["T"] = out.T();
  j["d"] = out.d();
  Json mean = Json::array();
  for (Eigen::Index i = 0; i < out.d(); ++i) mean.push_back(out.mean()(i));
  j["mean"] = mean;
  j["sigma_hat"] = matrix_to_json(sigma.matrix());
  j["gamma_hat"] = matrix_to_json(gamma.matrix());
  j["ess"] = try_value([&] { return ess(out.T(), gamma, sigma, a.jitter); });
  j["batch_plan"] = plan_json(plan);
  j["spectral"] = Json{{"min_eig", sd.min_eig},
                       {"max_eig", sd.max_eig},
                       {"condition_number", nullable(sd.condition_number)},
                       {"pd", sd.pd},
                       {"below_sigma0", sd.below_sigma0},
                       {"sigma0", s0}};
  j["seed"] = c.seed;
  return j;
}

// ------------------------------------------------------------------ run-fvsr

struct FvsrArgs {
  double epsilon = 0.05;
  double alpha = 0.05;
  std::string regime;
  std::string input;
  ChainFlags chain;
  double p = 100.0;
  Eigen::Index max_T = 10'000'000;
  std::optional<double> t_star;
  Eigen::Index stride = 0;
  std::string prefactor = "unit";
  double delta1 = 1.0;
  double delta2 = 0.1;
  std::string trace;
};

Json report_json(const TerminationReport& r) {
  Json j;
  j["status"] = r.status == FvsrStatus::Terminated ? "TERMINATED" : "NOT_TERMINATED";
  j["T1"] = r.T1;
  j["epsilon"] = r.epsilon;
  j["alpha"] = r.alpha;
  Json center = Json::array();
  for (Eigen::Index i = 0; i < r.final_ellipsoid.center.size(); ++i)
    center.push_back(r.final_ellipsoid.center(i));
  j["final_ellipsoid"] = Json{{"center", center},
                              {"shape", matrix_to_json(r.final_ellipsoid.shape)},
                              {"radius_sq", r.final_ellipsoid.radius_sq},
                              {"q_alpha", r.final_ellipsoid.q_alpha}};
  j["ess_at_T1"] = nullable(r.ess_at_T1);
  j["T_star_used"] = nullable(r.T_star_used);
  j["T_star_source"] = r.T_star_source;
  j["check_stride"] = r.check_stride;
  j["batch_size_at_T1"] = r.batch_size_at_T1;
  j["batch_exponent"] = r.batch_exponent;
  j["batch_prefactor"] = r.batch_prefactor;
  j["singular_checkpoints"] = r.singular_checkpoints;
  j["note"] = r.note;
  return j;
}

int run_fvsr_cmd(const FvsrArgs& a, const Common& c, std::ostream& out, std::ostream& err) {
  RegimeParams reg = a.regime.empty() ? reference_regime(a.chain.spec, a.p)
                                      : read_regime_file(a.regime);
  FvsrConfig cfg;
  cfg.max_T = a.max_T;
  cfg.t_star = a.t_star;
  cfg.check_stride = a.stride;
  cfg.delta1 = a.delta1;
  cfg.delta2 = a.delta2;
  cfg.record_trace = !a.trace.empty();
  require(a.prefactor == "unit" || a.prefactor == "theorem", ErrorCode::Precondition,
          "prefactor must be unit or theorem");
  cfg.prefactor = a.prefactor == "unit" ? BatchPrefactor::Unit : BatchPrefactor::Theorem;

  TerminationReport rep;
  if (!a.input.empty()) {
    const ChainOutput rec = read_chain_csv(a.input);
    reg.dim_feature = static_cast<int>(rec.d());
    RecordedStream stream(rec);
    cfg.max_T = std::min<Eigen::Index>(cfg.max_T, rec.T());
    rep = fvsr_run(stream, a.epsilon, reg, a.alpha, cfg);
  } else {
    KernelStream stream(a.chain.spec, c.seed);
    rep = fvsr_run(stream, a.epsilon, reg, a.alpha, cfg);
  }
  if (!a.trace.empty()) {
    std::ofstream f(a.trace, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot write " + a.trace);
    f << "t,vol,ess,batch_size\n";
    for (const auto& tp : rep.volume_trace)
      f << tp.t << ',' << format_double(tp.vol_root) << ',' << format_double(tp.ess) << ','
        << tp.batch_size << '\n';
  }
  Json j = report_json(rep);
  j["seed"] = c.seed;
  j["source"] = a.input.empty() ? Json(chain_spec_to_json(a.chain.spec)) : Json(a.input);
  if (rep.status == FvsrStatus::NotTerminated) {
    Json e = error_json(code_name(ErrorCode::NotTerminated), rep.note);
    e["report"] = std::move(j);
    emit(out, e, c.pretty);
    return 2;
  }
  emit(out, j, c.pretty);
  if (c.pretty)
    err << fmt::format("terminated at T1 = {} (T* = {:.6g}, {})\n", rep.T1, rep.T_star_used,
                       rep.T_star_source);
  return 0;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  ChainFlags chain;
  Eigen::Index T = 10'000;
  std::string out;
  std::string regen;
};

Json run_simulate(const SimulateArgs& a, const Common& c) {
  require(a.T >= 1, ErrorCode::Precondition, "T must be >= 1");
  const ChainSpec& spec = a.chain.spec;
  Json j;
  j["kernel"] = chain_spec_to_json(spec);
  j["T"] = a.T;
  j["seed"] = c.seed;
  const bool split = spec.kind == "ar1-split" || !a.regen.empty();
  std::optional<ChainOutput> traj;
  if (split) {
    const SplitKernel k = make_split_kernel(spec);
    SplitRun run = simulate_split(k, a.T, std::nullopt, c.seed);
    const auto& rec = run.record;
    const auto lengths = rec.cycle_lengths();
    j["regeneration"] = Json{{"alpha", k.mino.alpha},
                             {"m0", rec.m0},
                             {"started_from_nu", rec.started_from_nu},
                             {"epochs", rec.epochs.size()},
                             {"complete_cycles", rec.cycles.size()},
                             {"bells_drawn", rec.bells_drawn},
                             {"skeleton_steps", rec.skeleton_steps},
                             {"certificate", k.certificate}};
    if (!a.regen.empty()) {
      std::ofstream f(a.regen, std::ios::binary);
      require(bool(f), ErrorCode::Io, "cannot write " + a.regen);
      f << "k,R_k,cycle_len\n";
      // cycle k ends at epoch k; the first epoch has no preceding cycle
      for (std::size_t k = 0; k < rec.epochs.size(); ++k) {
        f << k << ',' << rec.epochs[k] << ',';
        if (k > 0) f << lengths[k - 1];
        f << '\n';
      }
    }
    traj.emplace(std::move(run.trajectory), c.seed, spec.kind);
  } else {
    traj.emplace(run_chain(spec, a.T, c.seed));
    if (spec.kind == "rwm-gauss" || spec.kind == "rwm-heavy")
      j["acceptance_rate"] = rwm_acceptance_rate(spec, a.T, c.seed);
  }
  Json mean = Json::array();
  const Vector m = traj->mean();
  for (Eigen::Index i = 0; i < m.size(); ++i) mean.push_back(m(i));
  j["mean"] = mean;
  if (!a.out.empty()) write_chain_csv(a.out, *traj);
  return j;
}

// ------------------------------------------------------------------ experiment

struct ExperimentArgs {
  std::string kind;
  std::string config;
  std::string out;
  int jobs = 0;
};

Json run_experiment_cmd(const ExperimentArgs& a, const Common& c) {
  Json cfg = Json::object();
  if (!a.config.empty()) {
    std::ifstream f(a.config, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot open " + a.config);
    try {
      cfg = Json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, a.config + ": " + e.what());
    }
  }
  const Report rep = run_experiment(a.kind, cfg, a.jobs,
                                    c.seed_given ? std::optional(c.seed) : std::nullopt);
  if (!a.out.empty()) write_report(a.out, rep);
  return rep.json;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"termctl: stopping rules and diagnostics for Markov chain simulation", "termctl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  Common cp, ca, cf, cs, ce;

  PlanArgs plan;
  auto* s_plan = app.add_subcommand("plan", "rates, thresholds and batch exponents for a regime");
  s_plan->add_option("--regime", plan.regime, "regime JSON file")->required();
  s_plan->add_option("--epsilon", plan.epsilon, "target precision");
  s_plan->add_option("--delta1", plan.delta1);
  s_plan->add_option("--delta2", plan.delta2);
  s_plan->add_option("--delta-bar", plan.delta_bar);
  s_plan->add_flag("--bounds", plan.bounds, "also report hitting and regeneration bounds");
  s_plan->add_option("--r", plan.r, "generating-function argument for --bounds");
  add_common(s_plan, cp);

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "batch-means covariance, ESS and spectral checks");
  s_an->add_option("--input", an.input, "chain CSV")->required();
  s_an->add_option("--batch-mode", an.batch_mode, "eq22 | table | user");
  s_an->add_option("--p0", an.p0, "effective moment order");
  s_an->add_option("--regime", an.regime, "regime JSON file");
  s_an->add_option("--batch-size", an.batch_size, "batch length for --batch-mode user");
  s_an->add_option("--delta-bar", an.delta_bar);
  s_an->add_option("--sigma0", an.sigma0, "eigenvalue floor for the spectral check");
  s_an->add_option("--jitter", an.jitter, "ridge added to sigma before the ESS ratio");
  add_common(s_an, ca);

  FvsrArgs fv;
  auto* s_fv = app.add_subcommand("run-fvsr", "fixed-volume stopping rule on a chain");
  s_fv->add_option("--epsilon", fv.epsilon)->required();
  s_fv->add_option("--alpha", fv.alpha);
  s_fv->add_option("--regime", fv.regime, "regime JSON file (default: reference regime)");
  s_fv->add_option("--input", fv.input, "replay a recorded chain CSV instead of simulating");
  fv.chain.add(s_fv, "--chain");
  s_fv->add_option("--p", fv.p, "moment order for the reference regime");
  s_fv->add_option("--max-T", fv.max_T);
  s_fv->add_option("--t-star", fv.t_star, "override the minimum simulation threshold");
  s_fv->add_option("--stride", fv.stride, "checkpoint stride (0: default schedule)");
  s_fv->add_option("--prefactor", fv.prefactor, "batch-size prefactor: unit | theorem");
  s_fv->add_option("--delta1", fv.delta1);
  s_fv->add_option("--delta2", fv.delta2);
  s_fv->add_option("--trace", fv.trace, "write t,vol,ess,batch_size per checkpoint");
  add_common(s_fv, cf);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "simulate a reference chain");
  sim.chain.add(s_sim, "--kernel");
  s_sim->add_option("--T", sim.T, "number of states");
  s_sim->add_option("--out", sim.out, "trajectory CSV");
  s_sim->add_option("--regen", sim.regen, "regeneration CSV (k,R_k,cycle_len)");
  add_common(s_sim, cs);

  ExperimentArgs ex;
  auto* s_ex = app.add_subcommand("experiment", "seeded Monte Carlo experiments");
  s_ex->add_option("kind", ex.kind, "coverage | scaling | covariance | bounds | regeneration")
      ->required()
      ->check(CLI::IsMember({"coverage", "scaling", "covariance", "bounds", "regeneration"}));
  s_ex->add_option("--config", ex.config, "experiment JSON config");
  s_ex->add_option("--out", ex.out, "directory for results.json and results.csv");
  s_ex->add_option("--jobs", ex.jobs, "worker threads (default: TERMCTL_JOBS or 1)");
  add_common(s_ex, ce);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    if (e.get_exit_code() != 0) err << "run with --help for usage\n";
    return 1;
  }
  bool pretty = false;
  try {
    Json result;
    if (s_plan->parsed()) {
      pretty = cp.pretty;
      result = run_plan(plan, cp);
    } else if (s_an->parsed()) {
      pretty = ca.pretty;
      result = run_analyze(an, ca);
    } else if (s_fv->parsed()) {
      pretty = cf.pretty;
      return run_fvsr_cmd(fv, cf, out, err);
    } else if (s_sim->parsed()) {
      pretty = cs.pretty;
      result = run_simulate(sim, cs);
    } else {
      pretty = ce.pretty;
      ce.seed_given = s_ex->count("--seed") > 0;
      result = run_experiment_cmd(ex, ce);
      if (ce.pretty) err << fmt::format("wrote {} results\n", ex.kind);
    }
    emit(out, result, pretty);
    return 0;
  } catch (const Error& e) {
    emit(out, error_json(code_name(e.code()), e.what()), pretty);
    return 2;
  } catch (const std::exception& e) {
    emit(out, error_json("UNKNOWN", e.what()), pretty);
    return 2;
  }
}

}  // namespace termctl::cli
