#include "termctl/chains.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

#include "termctl/error.hpp"
#include "termctl/random.hpp"
#include "termctl/special.hpp"

namespace termctl {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double normal_pdf(double z, double sd) {
  const double u = z / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * u * u);
}

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// composite trapezoid of f over [a, b] with n panels
template <class F>
double trapezoid(F&& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i));
  return s * h;
}

// composite Simpson, n even
template <class F>
double simpson(F&& f, double a, double b, std::size_t n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

std::vector<std::string> kernel_names() { return {"ar1", "rwm-gauss", "rwm-heavy", "ar1-split"}; }

bool is_known_kernel(const std::string& kind) {
  const auto names = kernel_names();
  return std::find(names.begin(), names.end(), kind) != names.end();
}

Ar1Kernel::Ar1Kernel(int d, double rho) : d_(d), rho_(rho), sd_(std::sqrt(1.0 - rho * rho)) {
  require(d >= 1, ErrorCode::Precondition, "d must be >= 1");
  require(rho > -1.0 && rho < 1.0, ErrorCode::Precondition, "rho must lie in (-1,1)");
}

void Ar1Kernel::step(std::span<const double> x, Rng& rng, std::span<double> y) const {
  for (int i = 0; i < d_; ++i) y[i] = rho_ * x[i] + sd_ * rng.normal();
}

Vector Ar1Kernel::initial_state(Rng& rng) const {
  Vector x(d_);
  for (int i = 0; i < d_; ++i) x(i) = rng.normal();
  return x;
}

RwmKernel::RwmKernel(int d, double step, Target target, double tail_index)
    : d_(d), step_(step), target_(target), tail_index_(tail_index) {
  require(d >= 1, ErrorCode::Precondition, "d must be >= 1");
  require(step > 0.0, ErrorCode::Precondition, "step must be positive");
  if (target == Target::HeavyTail)
    require(tail_index > 2.0, ErrorCode::Precondition,
            "tail index must exceed 2 so that second moments exist");
}

double RwmKernel::log_target(std::span<const double> x) const {
  const double r2 = norm2(x);
  if (target_ == Target::Gaussian) return -0.5 * r2;
  return -(d_ + tail_index_) * std::log1p(std::sqrt(r2));
}

double RwmKernel::acceptance(std::span<const double> x, std::span<const double> y) const {
  return std::min(1.0, std::exp(log_target(y) - log_target(x)));
}

void RwmKernel::step(std::span<const double> x, Rng& rng, std::span<double> y) const {
  for (int i = 0; i < d_; ++i) y[i] = x[i] + step_ * rng.normal();
  const double log_ratio = log_target(y) - log_target(x);
  ++proposed_;
  // uniform drawn unconditionally so the stream position never depends on the ratio
  const double u = rng.uniform();
  if (log_ratio >= 0.0 || std::log(u) < log_ratio) {
    ++accepted_;
    return;
  }
  for (int i = 0; i < d_; ++i) y[i] = x[i];
}

Vector RwmKernel::initial_state(Rng& rng) const {
  Vector x = Vector::Zero(d_);
  if (target_ == Target::Gaussian)
    for (int i = 0; i < d_; ++i) x(i) = rng.normal();
  return x;
}

double RwmKernel::acceptance_rate() const {
  return proposed_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(proposed_);
}

std::unique_ptr<Kernel> make_kernel(const ChainSpec& spec) {
  if (spec.kind == "ar1" || spec.kind == "ar1-split")
    return std::make_unique<Ar1Kernel>(spec.d, spec.rho);
  if (spec.kind == "rwm-gauss")
    return std::make_unique<RwmKernel>(spec.d, spec.step, RwmKernel::Target::Gaussian);
  if (spec.kind == "rwm-heavy")
    return std::make_unique<RwmKernel>(spec.d, spec.step, RwmKernel::Target::HeavyTail,
                                       spec.tail_index);
  throw Error(ErrorCode::Unknown, "unknown kernel '" + spec.kind + "'");
}

ChainOutput run_chain(const ChainSpec& spec, Eigen::Index T, std::uint64_t seed,
                      const std::optional<Vector>& x0) {
  require(T >= 1, ErrorCode::Precondition, "T must be >= 1");
  KernelStream stream(spec, seed, x0);
  RowMatrix values(T, stream.dim());
  for (Eigen::Index t = 0; t < T; ++t)
    stream.next(std::span<double>(values.row(t).data(), static_cast<std::size_t>(values.cols())));
  return ChainOutput(std::move(values), seed, spec.kind);
}

KernelStream::KernelStream(const ChainSpec& spec, std::uint64_t seed,
                           const std::optional<Vector>& x0)
    : kernel_(make_kernel(spec)), rng_(std::make_unique<Rng>(seed)) {
  state_ = x0 ? *x0 : kernel_->initial_state(*rng_);
  require(state_.size() == kernel_->dim(), ErrorCode::Precondition,
          "initial state has the wrong dimension");
  scratch_.resize(state_.size());
}

KernelStream::~KernelStream() = default;

Eigen::Index KernelStream::dim() const { return kernel_->dim(); }

void KernelStream::next(std::span<double> row) {
  // first row is X_0 itself
  if (started_) {
    kernel_->step(std::span<const double>(state_.data(), static_cast<std::size_t>(state_.size())),
                  *rng_, std::span<double>(scratch_.data(), static_cast<std::size_t>(scratch_.size())));
    state_.swap(scratch_);
  }
  started_ = true;
  for (Eigen::Index i = 0; i < state_.size(); ++i) row[static_cast<std::size_t>(i)] = state_(i);
}

double rwm_acceptance_rate(const ChainSpec& spec, Eigen::Index T, std::uint64_t seed) {
  auto kernel = make_kernel(spec);
  const auto* rwm = dynamic_cast<const RwmKernel*>(kernel.get());
  require(rwm != nullptr, ErrorCode::Precondition, "acceptance rate needs an RWM kernel");
  Rng rng(seed);
  Vector x = kernel->initial_state(rng);
  Vector y(x.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    kernel->step(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), rng,
                 std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
    x.swap(y);
  }
  return rwm->acceptance_rate();
}

Matrix truncated_autocov_sum(const ChainOutput& output, Eigen::Index max_lag) {
  const Eigen::Index T = output.T();
  require(max_lag >= 0 && max_lag < T, ErrorCode::Precondition, "lag must lie in [0, T)");
  Matrix c = output.values();
  c.rowwise() -= c.colwise().mean();
  Matrix sum = (c.transpose() * c) / static_cast<double>(T);
  for (Eigen::Index k = 1; k <= max_lag; ++k) {
    const Matrix g =
        (c.topRows(T - k).transpose() * c.bottomRows(T - k)) / static_cast<double>(T);
    sum += g + g.transpose();
  }
  return 0.5 * (sum + sum.transpose());
}

SigmaF analytic_sigma_f(const ChainSpec& spec, Eigen::Index oracle_T, std::uint64_t seed) {
  require(is_known_kernel(spec.kind), ErrorCode::Unknown,
          "no asymptotic covariance known for kernel '" + spec.kind + "'");
  SigmaF out;
  out.pi_f = Vector::Zero(spec.d);
  if (spec.kind == "ar1" || spec.kind == "ar1-split") {
    out.sigma = Matrix::Identity(spec.d, spec.d) * ((1.0 + spec.rho) / (1.0 - spec.rho));
    out.source = SigmaSource::Analytic;
    return out;
  }
  const ChainOutput run = run_chain(spec, oracle_T, seed);
  const auto lag = static_cast<Eigen::Index>(std::ceil(std::cbrt(static_cast<double>(oracle_T))));
  out.sigma = truncated_autocov_sum(run, lag);
  out.source = SigmaSource::OracleMc;
  return out;
}

Certificate ar1_level_set_certificate(int d, double rho) {
  require(d >= 1 && rho > -1.0 && rho < 1.0, ErrorCode::Precondition, "invalid AR(1) parameters");
  const double s2 = 1.0 - rho * rho;
  const double lambda = 0.5 * (1.0 + rho * rho);
  const double b = (d + 1.0) * s2;
  const double level = 2.0 * b / (1.0 - lambda);

  Certificate cert;
  cert.drift = GeometricDriftSpec::make(lambda, b, level, 1);
  cert.V = [](std::span<const double> x) { return 1.0 + norm2(x); };
  cert.description = "V = 1 + |x|^2 on the level set C = {V <= 2b/(1-lambda)}";
  // PV depends on x only through |x|^2: PV = 1 + rho^2 |x|^2 + d sigma^2
  double worst = -1e300;
  for (int i = 0; i <= 4000; ++i) {
    const double r2 = level * 4.0 * i / 4000.0;
    const double V = 1.0 + r2;
    const double PV = 1.0 + rho * rho * r2 + d * s2;
    const double rhs = lambda * V + (V <= level ? b : 0.0);
    worst = std::max(worst, PV - rhs);
  }
  cert.max_violation = worst;
  cert.verified = worst <= 1e-12;
  cert.mino.alpha = 1.0;  // not certified for this set
  cert.mino.m0 = 1;
  return cert;
}

Certificate ar1_box_certificate(int d, double rho, double h, int m0) {
  require(d >= 1 && rho > -1.0 && rho < 1.0, ErrorCode::Precondition, "invalid AR(1) parameters");
  require(h * h > d, ErrorCode::Precondition,
          fmt::format("the box certificate needs h^2 > d (h = {}, d = {})", h, d));
  const double s2 = 1.0 - rho * rho;
  const double lambda =
      std::max(0.5 * (1.0 + rho * rho), (1.0 + d * s2 + rho * rho * h * h) / (1.0 + h * h));
  const double b = 1.0 - lambda + d * s2;
  const double ups = 1.0 + d * h * h;

  Certificate cert;
  cert.drift = GeometricDriftSpec::make(lambda, b, ups, m0);
  cert.V = [](std::span<const double> x) { return 1.0 + norm2(x); };
  cert.description = "V = 1 + |x|^2 with C = [-h,h]^d";
  // worst case over C is the origin, off C the point nearest the box face
  double worst = -1e300;
  for (int i = 0; i <= 4000; ++i) {
    const double r = 4.0 * h * std::sqrt(d) * i / 4000.0;
    const double V = 1.0 + r * r;
    const double PV = 1.0 + rho * rho * r * r + d * s2;
    // points with |x| <= h are in C; points with |x| > h sqrt(d) are outside;
    // in between either can happen, so check the stricter off-C inequality when r > h
    const double rhs = lambda * V + (r <= h ? b : 0.0);
    worst = std::max(worst, PV - rhs);
  }
  cert.max_violation = worst;
  cert.verified = worst <= 1e-12;
  const double s = std::sqrt(1.0 - std::pow(rho, 2 * m0));
  const double shift = std::abs(std::pow(rho, m0)) * h;
  cert.pi_C = std::pow(special::normal_cdf(h) - special::normal_cdf(-h), d);
  cert.mino.alpha = std::pow(2.0 * (1.0 - special::normal_cdf(shift / s)), d);
  cert.mino.m0 = m0;
  return cert;
}

namespace {

struct Ar1SplitCache {
  double alpha;
  double worst_rel_gap;
};

// alpha of one coordinate by trapezoid quadrature of the pointwise minimum,
// plus the largest relative gap between the grid minimum over C and the
// far-endpoint closed form used by the sampler
Ar1SplitCache ar1_split_quadrature(double rho_m, double s, double h) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, double>, Ar1SplitCache> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(rho_m, s, h);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const double shift = std::abs(rho_m) * h;
  const auto g = [&](double y) { return normal_pdf(std::abs(y) + shift, s); };
  const double L = shift + 14.0 * s;
  // split at 0 where |y| has its kink
  const double alpha = 2.0 * trapezoid(g, 0.0, L, 200000);

  // grid minimum over C, resolution 1e-3 of the diameter
  const int nx = 1001;
  double worst = 0.0;
  for (int j = 0; j <= 400; ++j) {
    const double y = -L + 2.0 * L * j / 400.0;
    double m = 1e300;
    for (int i = 0; i < nx; ++i) {
      const double x = -h + 2.0 * h * i / (nx - 1);
      m = std::min(m, normal_pdf(y - rho_m * x, s));
    }
    const double closed = g(y);
    if (closed > 0.0) worst = std::max(worst, std::abs(m - closed) / closed);
  }
  const Ar1SplitCache out{alpha, worst};
  cache.emplace(key, out);
  return out;
}

}  // namespace

SplitKernel make_split_kernel(const ChainSpec& spec) {
  SplitKernel k;
  k.dim_state = spec.d;
  const double h = spec.half_width;
  require(h > 0.0, ErrorCode::Precondition, "half width must be positive");

  if (spec.kind == "ar1" || spec.kind == "ar1-split") {
    require(spec.m0 >= 1, ErrorCode::Precondition, "m0 must be >= 1");
    const int d = spec.d;
    const int m0 = spec.m0;
    const auto base = std::make_shared<Ar1Kernel>(d, spec.rho);
    const double rho_m = std::pow(spec.rho, m0);
    const double s = std::sqrt(1.0 - rho_m * rho_m);
    const double shift = std::abs(rho_m) * h;
    const auto quad = ar1_split_quadrature(rho_m, s, h);
    const double alpha1 = quad.alpha;

    k.m0 = m0;
    k.step = [base](std::span<const double> x, Rng& rng, std::span<double> y) {
      base->step(x, rng, y);
    };
    k.density_m0 = [rho_m, s](std::span<const double> x, std::span<const double> y) {
      double p = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) p *= normal_pdf(y[i] - rho_m * x[i], s);
      return p;
    };
    k.mino.alpha = std::pow(alpha1, d);
    k.mino.m0 = m0;
    k.mino.small_set.contains = [h](std::span<const double> x) {
      return std::all_of(x.begin(), x.end(), [h](double v) { return std::abs(v) <= h; });
    };
    k.mino.small_set.box = std::make_pair(Vector::Constant(d, -h), Vector::Constant(d, h));
    k.mino.nu.density = [shift, s, alpha1](std::span<const double> y) {
      double p = 1.0;
      for (double v : y) p *= normal_pdf(std::abs(v) + shift, s) / alpha1;
      return p;
    };
    k.mino.nu.sample = [shift, s](Rng& rng, std::span<double> y) {
      // propose from the transition out of the centre of C, accept with
      // probability g(y)/p(0,y) = exp(-(2|y| shift + shift^2)/(2 s^2))
      for (auto& v : y) {
        for (;;) {
          const double z = s * rng.normal();
          const double acc = std::exp(-(2.0 * std::abs(z) * shift + shift * shift) / (2.0 * s * s));
          if (rng.uniform() < acc) {
            v = z;
            break;
          }
        }
      }
    };
    k.certificate = fmt::format(
        "AR(1) box C=[-{0},{0}]^{1}, m0={2}: alpha={3:.12g} by trapezoid quadrature of the "
        "pointwise minimum; grid-min vs far-endpoint max relative gap {4:.3g}",
        h, d, m0, k.mino.alpha, quad.worst_rel_gap);
    return k;
  }

  if (spec.kind == "rwm-heavy") {
    require(spec.d == 1, ErrorCode::Precondition,
            "the heavy-tail split kernel is certified for d = 1 only");
    const auto base = std::make_shared<RwmKernel>(1, spec.step, RwmKernel::Target::HeavyTail,
                                                  spec.tail_index);
    const double sd = spec.step;
    const double r = spec.tail_index;
    // g(y) = q(far endpoint, y) min(1, pi(y)/pi(0)), a lower bound of the accepted-move density
    const auto g = [sd, h, r](double y) {
      const double ay = std::abs(y);
      return normal_pdf(ay + h, sd) * std::pow(1.0 + ay, -(1.0 + r));
    };
    const double L = h + 14.0 * sd;
    const double alpha = 2.0 * trapezoid(g, 0.0, L, 200000);

    k.m0 = 1;
    k.step = [base](std::span<const double> x, Rng& rng, std::span<double> y) {
      base->step(x, rng, y);
    };
    k.density_m0 = [base, sd](std::span<const double> x, std::span<const double> y) {
      if (y[0] == x[0]) return std::numeric_limits<double>::infinity();
      return normal_pdf(y[0] - x[0], sd) * base->acceptance(x, y);
    };
    k.mino.alpha = alpha;
    k.mino.m0 = 1;
    k.mino.small_set.contains = [h](std::span<const double> x) { return std::abs(x[0]) <= h; };
    k.mino.small_set.box = std::make_pair(Vector::Constant(1, -h), Vector::Constant(1, h));
    k.mino.nu.density = [g, alpha](std::span<const double> y) { return g(y[0]) / alpha; };
    k.mino.nu.sample = [g, sd](Rng& rng, std::span<double> y) {
      for (;;) {
        const double z = sd * rng.normal();
        if (rng.uniform() < g(z) / normal_pdf(z, sd)) {
          y[0] = z;
          return;
        }
      }
    };
    k.certificate = fmt::format(
        "heavy-tail RWM C=[-{0},{0}]: product-of-minima lower bound, alpha={1:.12g} by "
        "trapezoid quadrature",
        h, alpha);
    return k;
  }
  throw Error(ErrorCode::Precondition, "no split kernel for '" + spec.kind + "'");
}

Certificate heavy_tail_certificate(const ChainSpec& spec) {
  require(spec.d == 1, ErrorCode::Precondition,
          "the heavy-tail drift certificate is computed for d = 1 only");
  const double s = spec.drift_power;
  const double r = spec.tail_index;
  const double h = spec.half_width;
  const double sd = spec.step;
  require(s > 2.0, ErrorCode::Precondition, "drift power must exceed 2");
  const double eta = 1.0 - 2.0 / s;
  const RwmKernel kernel(1, sd, RwmKernel::Target::HeavyTail, r);
  const auto V = [s](double x) { return std::pow(1.0 + std::abs(x), s); };

  // PV(x) - V(x) = int q(x,y) a(x,y) (V(y) - V(x)) dy, piecewise Simpson with
  // breakpoints at the kinks y = 0 and |y| = |x|
  const auto delta = [&](double x) {
    const double Vx = V(x);
    const auto integrand = [&](double y) {
      const double xs[1] = {x};
      const double ys[1] = {y};
      return normal_pdf(y - x, sd) * kernel.acceptance(xs, ys) * (V(y) - Vx);
    };
    std::vector<double> cuts = {x - 12.0 * sd, x + 12.0 * sd, 0.0, -std::abs(x), std::abs(x)};
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = std::max(cuts[i], x - 12.0 * sd);
      const double b = std::min(cuts[i + 1], x + 12.0 * sd);
      if (b > a) total += simpson(integrand, a, b, 800);
    }
    return total;
  };

  // radial grid: fine near C, geometric far out
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(4.0 * h * i / 400.0);
  for (double x = 4.0 * h; x < 1e4; x *= 1.02) grid.push_back(x);
  std::vector<double> dlt(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) dlt[i] = delta(grid[i]);

  double c = 1e300;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] > h) c = std::min(c, -dlt[i] / std::pow(V(grid[i]), eta));
  require(c > 0.0, ErrorCode::Precondition,
          "no positive drift rate off C; enlarge the small set or change the drift power");
  c *= 0.95;
  double b = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] <= h) b = std::max(b, dlt[i] + c * std::pow(V(grid[i]), eta));
  b = std::max(b * 1.001, 1e-12);

  Certificate cert;
  cert.drift = PolynomialDriftSpec::make(c, b, eta, V(h), 1);
  cert.V = [V](std::span<const double> x) { return V(x[0]); };
  double worst = -1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double rhs = -c * std::pow(V(grid[i]), eta) + (grid[i] <= h ? b : 0.0);
    worst = std::max(worst, dlt[i] - rhs);
  }
  cert.max_violation = worst;
  cert.verified = worst <= 0.0;
  cert.description = fmt::format(
      "V = (1+|x|)^{} on C = [-{},{}], c and b from Simpson quadrature of PV on a radial grid "
      "up to |x| = 1e4",
      s, h, h);
  const SplitKernel split = make_split_kernel(spec);
  cert.mino.alpha = split.mino.alpha;
  cert.mino.m0 = 1;
  // pi([-h,h]) for the density (r/2)(1+|x|)^{-(1+r)}
  cert.pi_C = 1.0 - std::pow(1.0 + h, -r);
  return cert;
}

RegimeParams reference_regime(const ChainSpec& spec, double p) {
  RegimeParams reg;
  reg.dim_state = spec.d;
  reg.dim_feature = spec.d;
  const double eps = 0.5 / p;
  if (spec.kind == "ar1" || spec.kind == "ar1-split" || spec.kind == "rwm-gauss") {
    if (spec.kind == "rwm-gauss")
      throw Error(ErrorCode::Unknown, "no shipped drift certificate for rwm-gauss");
    const double h = spec.kind == "ar1-split" ? spec.half_width : 2.0 * std::sqrt(spec.d);
    const auto cert = ar1_box_certificate(spec.d, spec.rho, h, spec.kind == "ar1-split" ? spec.m0 : 1);
    reg.drift = cert.drift;
    reg.minorisation = MinorisationSpec::make(cert.mino.alpha, cert.mino.m0);
    // E|Z|^k for a standard normal coordinate
    const double k = p + eps;
    const double M = std::exp(0.5 * k * std::log(2.0) + std::lgamma(0.5 * (k + 1.0)) -
                              0.5 * std::log(std::numbers::pi));
    reg.moments = MomentSpec{p, eps, M, MomentClass::ExponentialMoments, false};
    const double sig = (1.0 + spec.rho) / (1.0 - spec.rho);
    reg.trace_ratio = spec.d * sig / sig;
    reg.sigma0 = sig;
    return reg;
  }
  if (spec.kind == "rwm-heavy") {
    const auto cert = heavy_tail_certificate(spec);
    reg.drift = cert.drift;
    reg.minorisation = MinorisationSpec::make(cert.mino.alpha, 1);
    const double r = spec.tail_index;
    const double k = p + eps;
    const double M = k < r ? r * std::exp(std::lgamma(k + 1.0) + std::lgamma(r - k) -
                                          std::lgamma(r + 1.0))
                           : std::numeric_limits<double>::infinity();
    reg.moments = MomentSpec{p, eps, M, MomentClass::PolynomialMoments, false};
    return reg;
  }
  throw Error(ErrorCode::Unknown, "unknown kernel '" + spec.kind + "'");
}

}  // namespace termctl
