#include "termctl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "termctl/drift.hpp"
#include "termctl/error.hpp"
#include "termctl/random.hpp"
#include "termctl/special.hpp"
#include "termctl/splitting.hpp"
#include "termctl/termination.hpp"

#ifndef TERMCTL_VERSION
#define TERMCTL_VERSION "0.0.0"
#endif
#ifndef TERMCTL_GIT_REV
#define TERMCTL_GIT_REV "unknown"
#endif

namespace termctl {

std::string version_string() { return std::string(TERMCTL_VERSION) + "+" + TERMCTL_GIT_REV; }

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TERMCTL_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return 1;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorCode::Precondition, "median of an empty sample");
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_error(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

FvsrConfig fvsr_config(std::optional<double> t_star, Eigen::Index max_T, Eigen::Index stride) {
  FvsrConfig c;
  c.t_star = t_star;
  c.max_T = max_T;
  c.check_stride = stride;
  c.record_trace = false;
  return c;
}

// fixed offsets separating auxiliary streams of one replicate
constexpr std::uint64_t kNuStream = 0x6E75000000000000ull;
constexpr std::uint64_t kPermStream = 0x7065726D00000000ull;
constexpr std::uint64_t kFromXStream = 0x66726F6D78000000ull;

}  // namespace

// ---------------------------------------------------------------- coverage

CoverageResult coverage_experiment(const CoverageConfig& cfg, int jobs) {
  require(cfg.reps >= 100, ErrorCode::Precondition,
          fmt::format("coverage needs reps >= 100, got {}", cfg.reps));
  const RegimeParams regime = reference_regime(cfg.chain, cfg.p);
  const SigmaF truth = analytic_sigma_f(cfg.chain);
  const FvsrConfig fc = fvsr_config(cfg.t_star, cfg.max_T, cfg.check_stride);

  CoverageResult out;
  out.reps.resize(static_cast<std::size_t>(cfg.reps));
  parallel_for(out.reps.size(), jobs, [&](std::size_t i) {
    KernelStream stream(cfg.chain, derive_seed(cfg.seed, i));
    const auto rep = fvsr_run(stream, cfg.epsilon, regime, cfg.alpha, fc);
    auto& r = out.reps[i];
    r.index = i;
    r.T1 = rep.T1;
    r.terminated = rep.status == FvsrStatus::Terminated;
    r.covered = r.terminated && rep.final_ellipsoid.contains(truth.pi_f);
  });

  std::vector<double> t1;
  int covered = 0;
  for (const auto& r : out.reps) {
    if (!r.terminated) {
      ++out.not_terminated;
      continue;
    }
    ++out.terminated;
    covered += r.covered;
    t1.push_back(static_cast<double>(r.T1));
  }
  if (out.terminated > 0) {
    const double n = out.terminated;
    out.coverage = covered / n;
    out.ci_halfwidth = 1.959963984540054 * std::sqrt(out.coverage * (1.0 - out.coverage) / n);
    out.mean_T1 = mean_of(t1);
    out.median_T1 = median(t1);
  }
  return out;
}

// ---------------------------------------------------------------- scaling

double scaling_denominator(const Matrix& sigma, double alpha) {
  const int d = static_cast<int>(sigma.rows());
  const double det = sigma.determinant();
  require(det > 0.0 && std::isfinite(det), ErrorCode::Precondition,
          "scaling needs det(Sigma_f) > 0");
  return std::pow(c_alpha_d(alpha, d), 2.0 / d) * std::pow(det, 1.0 / d);
}

double scaling_ratio(double epsilon, double T1, double denominator) {
  return epsilon * epsilon * T1 / denominator;
}

ScalingResult termination_scaling_experiment(const ScalingConfig& cfg, int jobs) {
  require(cfg.reps >= 1, ErrorCode::Precondition, "reps must be >= 1");
  require(!cfg.epsilons.empty(), ErrorCode::Precondition, "epsilon grid is empty");
  const RegimeParams regime = reference_regime(cfg.chain, cfg.p);
  const SigmaF truth = analytic_sigma_f(cfg.chain);
  ScalingResult out;
  out.sigma_source = truth.source;
  out.denominator = scaling_denominator(truth.sigma, cfg.alpha);
  const FvsrConfig fc = fvsr_config(cfg.t_star, cfg.max_T, cfg.check_stride);

  for (double eps : cfg.epsilons) {
    std::vector<std::optional<Eigen::Index>> t1(static_cast<std::size_t>(cfg.reps));
    parallel_for(t1.size(), jobs, [&](std::size_t i) {
      KernelStream stream(cfg.chain, derive_seed(cfg.seed, i));
      const auto rep = fvsr_run(stream, eps, regime, cfg.alpha, fc);
      if (rep.status == FvsrStatus::Terminated) t1[i] = rep.T1;
    });
    ScalingRow row;
    row.epsilon = eps;
    std::vector<double> ratios, times;
    for (const auto& t : t1) {
      if (!t) {
        ++row.not_terminated;
        continue;
      }
      ++row.terminated;
      times.push_back(static_cast<double>(*t));
      ratios.push_back(scaling_ratio(eps, static_cast<double>(*t), out.denominator));
    }
    row.median_ratio = ratios.empty() ? std::numeric_limits<double>::quiet_NaN() : median(ratios);
    row.median_T1 = times.empty() ? std::numeric_limits<double>::quiet_NaN() : median(times);
    out.rows.push_back(row);
  }
  const double last = std::abs(out.rows.back().median_ratio - 1.0);
  out.last_closest = std::isfinite(last);
  for (std::size_t k = 0; k + 1 < out.rows.size(); ++k)
    if (!(last < std::abs(out.rows[k].median_ratio - 1.0))) out.last_closest = false;
  return out;
}

// ---------------------------------------------------------------- covariance

CovarianceResult covariance_convergence_experiment(const CovarianceConfig& cfg, int jobs) {
  require(cfg.reps >= 1, ErrorCode::Precondition, "reps must be >= 1");
  require(!cfg.Ts.empty(), ErrorCode::Precondition, "T grid is empty");
  const SigmaF truth = analytic_sigma_f(cfg.chain);
  const Eigen::Index T_max = *std::max_element(cfg.Ts.begin(), cfg.Ts.end());
  const bool power_mode = cfg.mode == BatchMode::User && cfg.user_batch_power > 0.0;
  std::optional<RegimeParams> regime;
  if (cfg.mode != BatchMode::User) regime = reference_regime(cfg.chain, cfg.p);

  const auto plan_for = [&](Eigen::Index T) {
    if (power_mode) {
      const auto ell = static_cast<Eigen::Index>(
          std::floor(std::pow(static_cast<double>(T), cfg.user_batch_power) * (1.0 + 1e-12)));
      return make_plan(T, std::min(std::max<Eigen::Index>(ell, 1), T / 2), cfg.user_batch_power,
                       BatchMode::User);
    }
    return select_batch_size(T, regime ? *regime : RegimeParams{}, cfg.delta_bar, cfg.mode,
                             cfg.user_batch_size);
  };

  CovarianceResult out;
  out.sigma_source = truth.source;
  out.low_power = cfg.reps < 2;
  std::vector<BatchPlan> plans;
  for (Eigen::Index T : cfg.Ts) plans.push_back(plan_for(T));

  // errors[rep][grid index]
  std::vector<std::vector<double>> errors(static_cast<std::size_t>(cfg.reps));
  parallel_for(errors.size(), jobs, [&](std::size_t i) {
    const ChainOutput run = run_chain(cfg.chain, T_max, derive_seed(cfg.seed, i));
    for (std::size_t k = 0; k < cfg.Ts.size(); ++k) {
      const ChainOutput prefix(run.values().topRows(cfg.Ts[k]), run.seed(), run.label());
      const auto est = batch_means_cov(prefix, plans[k]);
      errors[i].push_back((est.matrix() - truth.sigma).norm());
    }
  });

  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < cfg.Ts.size(); ++k) {
    std::vector<double> col;
    for (const auto& e : errors) col.push_back(e[k]);
    CovarianceRow row;
    row.T = cfg.Ts[k];
    row.batch_size = plans[k].batch_size;
    row.num_batches = plans[k].num_batches;
    row.median_error = median(col);
    out.rows.push_back(row);
    lx.push_back(std::log(static_cast<double>(row.T)));
    ly.push_back(std::log(row.median_error));
  }
  out.strictly_decreasing = out.rows.size() >= 2;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    if (!(out.rows[k].median_error < out.rows[k - 1].median_error)) out.strictly_decreasing = false;
  if (lx.size() >= 2) {
    const double mx = mean_of(lx), my = mean_of(ly);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    out.loglog_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------- bounds

namespace {

BoundCheck compare(std::string name, const std::vector<double>& sample, double bound,
                   std::string note = {}) {
  BoundCheck c;
  c.name = std::move(name);
  c.empirical = mean_of(sample);
  c.std_error = std_error(sample);
  c.bound = bound;
  c.pass = c.empirical <= bound + 3.0 * c.std_error;
  c.note = std::move(note);
  return c;
}

BoundCheck skipped(std::string name, const Error& e) {
  BoundCheck c;
  c.name = std::move(name);
  c.skipped = true;
  c.pass = true;
  c.bound = std::numeric_limits<double>::quiet_NaN();
  c.empirical = std::numeric_limits<double>::quiet_NaN();
  c.std_error = std::numeric_limits<double>::quiet_NaN();
  c.note = e.what();
  return c;
}

template <class F>
BoundCheck guarded(const std::string& name, const std::vector<double>& sample, F&& bound_fn) {
  try {
    return compare(name, sample, bound_fn());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Unstable || e.code() == ErrorCode::Degenerate)
      return skipped(name, e);
    throw;
  }
}

}  // namespace

BoundsResult bound_validation_experiment(const BoundsConfig& cfg, int jobs) {
  require(cfg.reps >= 2, ErrorCode::Precondition, "reps must be >= 2");
  BoundsResult out;
  const bool geometric = cfg.chain.kind == "ar1" || cfg.chain.kind == "ar1-split";
  require(geometric || cfg.chain.kind == "rwm-heavy", ErrorCode::Precondition,
          "bounds need a chain that ships a drift and minorisation certificate");
  const SplitKernel split = make_split_kernel(cfg.chain);
  out.certificate = geometric ? ar1_box_certificate(cfg.chain.d, cfg.chain.rho,
                                                    cfg.chain.half_width, cfg.chain.m0)
                              : heavy_tail_certificate(cfg.chain);
  out.certificate.mino.alpha = split.mino.alpha;  // quadrature value drives the sampler
  require(out.certificate.verified, ErrorCode::Precondition,
          "drift certificate failed its numerical verification");
  const double alpha = split.mino.alpha;
  const int m0 = split.m0;
  const int d = cfg.chain.d;

  const auto n = static_cast<std::size_t>(cfg.reps);
  std::vector<std::optional<FirstBlock>> from_nu(n), from_x(n);
  const Vector origin = Vector::Zero(d);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto s = derive_seed(cfg.seed, i);
    from_nu[i] = first_regeneration(split, std::nullopt, s, cfg.max_T);
    from_x[i] = first_regeneration(split, origin, s ^ kFromXStream, cfg.max_T);
  });

  std::vector<double> R_nu, R_x, sum_x;
  for (std::size_t i = 0; i < n; ++i) {
    if (!from_nu[i] || !from_x[i]) {
      ++out.censored;
      continue;
    }
    R_nu.push_back(static_cast<double>(from_nu[i]->R));
    R_x.push_back(static_cast<double>(from_x[i]->R));
    sum_x.push_back(from_x[i]->sum.lpNorm<1>());
  }
  require(R_nu.size() >= 2, ErrorCode::TooFewCycles, "fewer than two uncensored replicates");
  const auto map = [](const std::vector<double>& v, auto f) {
    std::vector<double> o;
    o.reserve(v.size());
    for (double x : v) o.push_back(f(x));
    return o;
  };

  if (geometric) {
    const auto& spec = std::get<GeometricDriftSpec>(out.certificate.drift);
    const double t = 0.5 * std::log(1.0 / spec.lambda) / m0;
    const double r = cfg.r;
    out.checks.push_back(guarded(
        "regen_mgf_from_nu", map(R_nu, [t](double R) { return std::exp(t * R); }),
        [&] { return regen_moment_bound(spec, alpha, m0, t); }));
    const auto rpow = [r, m0](double R) { return std::pow(r, R / m0); };
    out.checks.push_back(guarded("hitting_mgf_from_nu", map(R_nu, rpow), [&] {
      return hitting_mgf_bound(spec, alpha, r, HittingStart::FromNu);
    }));
    const StartState x0{1.0, true};
    out.checks.push_back(guarded("hitting_mgf_from_x", map(R_x, rpow), [&] {
      return hitting_mgf_bound(spec, alpha, r, HittingStart::FromX, x0);
    }));
    // |x_i| <= V(x)/2 for V = 1 + |x|^2
    out.checks.push_back(guarded("initial_block_sum_from_x", sum_x, [&] {
      return initial_cycle_bound_geometric(d, 0.5, spec, alpha, r, x0);
    }));
  } else {
    const auto& spec = std::get<PolynomialDriftSpec>(out.certificate.drift);
    const double q = spec.eta / (1.0 - spec.eta);
    const auto qpow = [q, m0](double R) { return std::pow(R / m0, q); };
    out.checks.push_back(guarded("hitting_poly_from_nu", map(R_nu, qpow), [&] {
      return hitting_poly_bound(spec, alpha, HittingStart::FromNu);
    }));
    const StartState x0{1.0, true};
    out.checks.push_back(guarded("hitting_poly_from_x", map(R_x, qpow), [&] {
      return hitting_poly_bound(spec, alpha, HittingStart::FromX, x0);
    }));
    out.checks.push_back(guarded("regen_poly_from_nu",
                                 map(R_nu, [q](double R) { return std::pow(R, q); }),
                                 [&] { return regen_moment_bound(spec, alpha, m0); }));
  }
  return out;
}

// ---------------------------------------------------------------- regeneration

RegenerationResult regeneration_experiment(const RegenerationConfig& cfg, int jobs) {
  require(cfg.reps >= 2, ErrorCode::Precondition, "reps must be >= 2");
  const SplitKernel split = make_split_kernel(cfg.chain);
  const int d = split.dim_state;
  RegenerationResult out;
  out.alpha = split.mino.alpha;
  if (cfg.chain.kind == "ar1" || cfg.chain.kind == "ar1-split") {
    const double h = cfg.chain.half_width;
    out.pi_C = std::pow(special::normal_cdf(h) - special::normal_cdf(-h), d);
  } else {
    out.pi_C = heavy_tail_certificate(cfg.chain).pi_C;
  }
  out.expected_rate = out.alpha * out.pi_C;

  out.reps.resize(static_cast<std::size_t>(cfg.reps));
  parallel_for(out.reps.size(), jobs, [&](std::size_t i) {
    const auto s = derive_seed(cfg.seed, i);
    const SplitRun run = simulate_split(split, cfg.T, std::nullopt, s);
    const auto& rec = run.record;
    auto& r = out.reps[i];
    r.index = i;
    r.epochs = rec.epochs.size();
    r.rate = rec.skeleton_steps > 0
                 ? static_cast<double>(rec.epochs.size() - (rec.started_from_nu ? 1 : 0)) /
                       static_cast<double>(rec.skeleton_steps)
                 : 0.0;

    // post-regeneration points against an independent sample from nu
    Rng nu_rng(s ^ kNuStream);
    Vector y(d);
    std::vector<std::vector<double>> reg(d), ref(d);
    for (Eigen::Index R : rec.epochs) {
      for (int j = 0; j < d; ++j) reg[j].push_back(run.trajectory(R, j));
      split.mino.nu.sample(nu_rng, std::span<double>(y.data(), static_cast<std::size_t>(d)));
      for (int j = 0; j < d; ++j) ref[j].push_back(y(j));
    }
    r.ks_p_min = 1.0;
    if (!rec.epochs.empty())
      for (int j = 0; j < d; ++j)
        r.ks_p_min = std::min(r.ks_p_min, ks_two_sample(reg[j], ref[j]).p_value);
    // Bonferroni across coordinates
    r.ks_pass = !rec.epochs.empty() && r.ks_p_min >= cfg.level / d;

    if (rec.cycles.size() >= 30) {
      r.lag1_p = cycle_independence_test(rec, s ^ kPermStream, cfg.permutations).p_value;
      r.lag1_pass = r.lag1_p >= cfg.level;
    } else {
      r.lag1_p = std::numeric_limits<double>::quiet_NaN();
      r.lag1_pass = false;
    }
  });

  std::vector<double> rates;
  for (const auto& r : out.reps) {
    out.ks_passes += r.ks_pass;
    out.lag1_passes += r.lag1_pass;
    rates.push_back(r.rate);
  }
  out.mean_rate = mean_of(rates);
  out.rate_se = std_error(rates);
  return out;
}

// ---------------------------------------------------------------- configs and reports

namespace {

class Reader {
 public:
  explicit Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), ErrorCode::Precondition, where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Precondition, fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  void get_opt(const char* key, std::optional<double>& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      dst.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    dst = v;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const Json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      require(seen_.count(k) > 0, ErrorCode::Precondition,
              fmt::format("unknown key '{}' in {}", k, where_));
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class Cfg>
void read_common(Reader& r, Cfg& c) {
  if (r.has("chain")) c.chain = chain_spec_from_json(r.at("chain"), c.chain);
  r.get("reps", c.reps);
  r.get("seed", c.seed);
}

Json table_json(const std::string& csv_body) {
  // rows are also kept in the JSON document for scripted consumers
  Json rows = Json::array();
  std::istringstream in(csv_body);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    Json row = Json::object();
    for (std::size_t k = 0; k < header.size() && k < cells.size(); ++k) {
      char* end = nullptr;
      const double v = std::strtod(cells[k].c_str(), &end);
      if (end != cells[k].c_str() && *end == '\0')
        row[header[k]] = v;
      else
        row[header[k]] = cells[k];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fd(double x) { return format_double(x); }

std::string sigma_source_name(SigmaSource s) {
  return s == SigmaSource::Analytic ? "ANALYTIC" : "ORACLE_MC";
}

Json certificate_json(const Certificate& c) {
  RegimeParams reg;
  reg.drift = c.drift;
  reg.minorisation = MinorisationSpec::make(c.mino.alpha, c.mino.m0);
  Json j = regime_to_json(reg);
  Json out;
  out["drift"] = j["drift"];
  out["minorisation"] = j["minorisation"];
  out["pi_C"] = c.pi_C;
  out["max_violation"] = c.max_violation;
  out["verified"] = c.verified;
  out["description"] = c.description;
  return out;
}

}  // namespace

ChainSpec chain_spec_from_json(const Json& j, ChainSpec base) {
  Reader r(j, "chain");
  r.get("kind", base.kind);
  r.get("d", base.d);
  r.get("rho", base.rho);
  r.get("step", base.step);
  r.get("tail_index", base.tail_index);
  r.get("drift_power", base.drift_power);
  r.get("half_width", base.half_width);
  r.get("m0", base.m0);
  r.finish();
  require(is_known_kernel(base.kind), ErrorCode::Precondition,
          "unknown kernel '" + base.kind + "'");
  require(base.d >= 1, ErrorCode::Precondition, "chain.d must be >= 1");
  return base;
}

Json chain_spec_to_json(const ChainSpec& s) {
  return Json{{"kind", s.kind},           {"d", s.d},
              {"rho", s.rho},             {"step", s.step},
              {"tail_index", s.tail_index}, {"drift_power", s.drift_power},
              {"half_width", s.half_width}, {"m0", s.m0}};
}

Report run_experiment(const std::string& kind, const Json& config, int jobs,
                      std::optional<std::uint64_t> seed_override) {
  jobs = resolve_jobs(jobs);
  Reader r(config, "config");
  Report rep;
  Json& j = rep.json;
  j["experiment"] = kind;
  j["version"] = version_string();
  std::string csv;

  if (kind == "coverage") {
    CoverageConfig c;
    read_common(r, c);
    r.get("alpha", c.alpha);
    r.get("epsilon", c.epsilon);
    r.get("p", c.p);
    r.get_opt("t_star", c.t_star);
    r.get("max_T", c.max_T);
    r.get("check_stride", c.check_stride);
    r.finish();
    if (seed_override) c.seed = *seed_override;
    const auto res = coverage_experiment(c, jobs);
    j["config"] = Json{{"chain", chain_spec_to_json(c.chain)}, {"alpha", c.alpha},
                       {"epsilon", c.epsilon},  {"reps", c.reps},
                       {"seed", c.seed},        {"p", c.p},
                       {"t_star", c.t_star ? Json(*c.t_star) : Json(nullptr)},
                       {"max_T", c.max_T},      {"check_stride", c.check_stride}};
    j["regime"] = regime_to_json(reference_regime(c.chain, c.p));
    j["summary"] = Json{{"empirical_coverage", res.coverage},
                        {"ci_halfwidth", res.ci_halfwidth},
                        {"mean_T1", res.mean_T1},
                        {"median_T1", res.median_T1},
                        {"terminated", res.terminated},
                        {"not_terminated", res.not_terminated}};
    csv = "# coverage: one row per replicate; covered=1 when the final ellipsoid contains "
          "pi(f); rows with terminated=0 are NOT_TERMINATED and excluded from coverage\n"
          "rep,seed,terminated,covered,T1\n";
    for (const auto& x : res.reps)
      csv += fmt::format("{},{},{},{},{}\n", x.index, derive_seed(c.seed, x.index),
                         int(x.terminated), int(x.covered), x.T1);
  } else if (kind == "scaling") {
    ScalingConfig c;
    read_common(r, c);
    r.get("alpha", c.alpha);
    r.get("epsilons", c.epsilons);
    r.get("p", c.p);
    r.get_opt("t_star", c.t_star);
    r.get("max_T", c.max_T);
    r.get("check_stride", c.check_stride);
    r.finish();
    if (seed_override) c.seed = *seed_override;
    const auto res = termination_scaling_experiment(c, jobs);
    j["config"] = Json{{"chain", chain_spec_to_json(c.chain)}, {"alpha", c.alpha},
                       {"epsilons", c.epsilons}, {"reps", c.reps},
                       {"seed", c.seed},         {"p", c.p},
                       {"t_star", c.t_star ? Json(*c.t_star) : Json(nullptr)},
                       {"max_T", c.max_T},       {"check_stride", c.check_stride}};
    j["regime"] = regime_to_json(reference_regime(c.chain, c.p));
    j["summary"] = Json{{"denominator", res.denominator},
                        {"sigma_source", sigma_source_name(res.sigma_source)},
                        {"last_closest_to_one", res.last_closest}};
    csv = "# scaling: median over terminated replicates of epsilon^2 T1 / "
          "(c_{alpha,d}^{2/d} det(Sigma_f)^{1/d}); NOT_TERMINATED counted separately\n"
          "epsilon,median_ratio,median_T1,terminated,not_terminated\n";
    for (const auto& x : res.rows)
      csv += fmt::format("{},{},{},{},{}\n", fd(x.epsilon), fd(x.median_ratio), fd(x.median_T1),
                         x.terminated, x.not_terminated);
  } else if (kind == "covariance") {
    CovarianceConfig c;
    read_common(r, c);
    r.get("Ts", c.Ts);
    std::string mode = batch_mode_name(c.mode);
    r.get("batch_mode", mode);
    c.mode = batch_mode_from_name(mode);
    r.get("user_batch_size", c.user_batch_size);
    r.get("user_batch_power", c.user_batch_power);
    r.get("delta_bar", c.delta_bar);
    r.get("p", c.p);
    r.finish();
    if (seed_override) c.seed = *seed_override;
    const auto res = covariance_convergence_experiment(c, jobs);
    j["config"] = Json{{"chain", chain_spec_to_json(c.chain)},
                       {"Ts", c.Ts},
                       {"batch_mode", batch_mode_name(c.mode)},
                       {"user_batch_size", c.user_batch_size},
                       {"user_batch_power", c.user_batch_power},
                       {"delta_bar", c.delta_bar},
                       {"reps", c.reps},
                       {"seed", c.seed},
                       {"p", c.p}};
    j["regime"] = c.mode == BatchMode::User ? Json(nullptr)
                                            : regime_to_json(reference_regime(c.chain, c.p));
    j["summary"] = Json{{"sigma_source", sigma_source_name(res.sigma_source)},
                        {"loglog_slope", res.loglog_slope},
                        {"strictly_decreasing", res.strictly_decreasing},
                        {"low_power", res.low_power}};
    csv = "# covariance: median over replicates of the Frobenius error of the batch-means "
          "estimate against the reference Sigma_f\n"
          "T,batch_size,num_batches,median_frobenius_error\n";
    for (const auto& x : res.rows)
      csv += fmt::format("{},{},{},{}\n", x.T, x.batch_size, x.num_batches, fd(x.median_error));
  } else if (kind == "bounds") {
    BoundsConfig c;
    read_common(r, c);
    r.get("r", c.r);
    r.get("max_T", c.max_T);
    r.finish();
    if (seed_override) c.seed = *seed_override;
    const auto res = bound_validation_experiment(c, jobs);
    j["config"] = Json{{"chain", chain_spec_to_json(c.chain)}, {"reps", c.reps},
                       {"seed", c.seed}, {"r", c.r}, {"max_T", c.max_T}};
    j["regime"] = certificate_json(res.certificate);
    bool all = true;
    for (const auto& x : res.checks) all = all && x.pass;
    j["summary"] = Json{{"all_pass", all}, {"censored", res.censored}};
    csv = "# bounds: empirical mean with standard error against the drift-derived bound; "
          "pass when empirical <= bound + 3 se; skipped bounds are vacuous (UNSTABLE)\n"
          "name,empirical,std_error,bound,pass,skipped\n";
    for (const auto& x : res.checks)
      csv += fmt::format("{},{},{},{},{},{}\n", x.name, fd(x.empirical), fd(x.std_error),
                         fd(x.bound), int(x.pass), int(x.skipped));
  } else if (kind == "regeneration") {
    RegenerationConfig c;
    read_common(r, c);
    r.get("T", c.T);
    r.get("level", c.level);
    r.get("permutations", c.permutations);
    r.finish();
    if (seed_override) c.seed = *seed_override;
    const auto res = regeneration_experiment(c, jobs);
    j["config"] = Json{{"chain", chain_spec_to_json(c.chain)}, {"T", c.T},
                       {"reps", c.reps},    {"seed", c.seed},
                       {"level", c.level},  {"permutations", c.permutations}};
    j["regime"] = Json{{"alpha", res.alpha}, {"pi_C", res.pi_C}};
    j["summary"] = Json{{"expected_rate", res.expected_rate}, {"mean_rate", res.mean_rate},
                        {"rate_se", res.rate_se},             {"ks_passes", res.ks_passes},
                        {"lag1_passes", res.lag1_passes}};
    csv = "# regeneration: one row per run; ks_p_min is the smallest per-coordinate KS p-value "
          "of X_{R_k} against nu; lag1_p is the permutation p-value of cycle-length lag-1 "
          "correlation\n"
          "rep,epochs,ks_p_min,ks_pass,lag1_p,lag1_pass,rate\n";
    for (const auto& x : res.reps)
      csv += fmt::format("{},{},{},{},{},{},{}\n", x.index, x.epochs, fd(x.ks_p_min),
                         int(x.ks_pass), fd(x.lag1_p), int(x.lag1_pass), fd(x.rate));
  } else {
    throw Error(ErrorCode::Precondition, "unknown experiment '" + kind + "'");
  }
  j["table"] = table_json(csv);
  rep.csv = std::move(csv);
  return rep;
}

void write_report(const std::string& dir, const Report& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create directory " + dir + ": " + ec.message());
  const auto path = std::filesystem::path(dir);
  {
    std::ofstream out(path / "results.json", std::ios::binary);
    require(bool(out), ErrorCode::Io, "cannot write " + (path / "results.json").string());
    out << dump_json(report.json, 2) << '\n';
  }
  std::ofstream out(path / "results.csv", std::ios::binary);
  require(bool(out), ErrorCode::Io, "cannot write " + (path / "results.csv").string());
  out << report.csv;
}

}  // namespace termctl
