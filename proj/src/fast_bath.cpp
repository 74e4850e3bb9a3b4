#include "smr/fast_bath.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smr {

SphereSample sample_uniform_sphere(int n, double energy_target, RngStream& rng) {
  if (n < 2) throw PreconditionError("sphere sampling needs n >= 2");
  if (!(energy_target > 0.0)) throw PreconditionError("target energy must be positive");
  SphereSample s;
  s.energy_target = energy_target;
  s.y.resize(static_cast<std::size_t>(n));
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (auto& v : s.y) {
      v = rng.normal();
      norm2 += v * v;
    }
  }
  const double scale = std::sqrt(energy_target / norm2);
  for (auto& v : s.y) v *= scale;
  return s;
}

FastBathModel::FastBathModel(const TriadSystem& system, double target_energy, bool renormalize)
    : system_(system), target_(target_energy), renormalize_(renormalize) {}

void FastBathModel::post_step(std::span<double> y) {
  if (target_ <= 0.0) return;
  const double e = fast_energy(y);
  const double drift = std::abs(e - target_) / target_;
  if (renormalize_ && drift > kRenormalizeThreshold) {
    const double scale = std::sqrt(target_ / e);
    for (auto& v : y) v *= scale;
    ++renormalizations_;
    return;
  }
  max_drift_ = std::max(max_drift_, drift);
}

std::vector<std::string> FastBathModel::record_names() const {
  std::vector<std::string> names;
  for (int k = 1; k <= system_.n(); ++k) names.push_back("y" + std::to_string(k));
  return names;
}

void FastBathModel::record(std::span<const double> y, std::span<double> out) const {
  std::copy(y.begin(), y.end(), out.begin());
}

namespace {

CoefficientSet bath_only(std::span<const YyyTriad> yyy, int n) {
  CoefficientSet set;
  set.n = n;
  set.yyy.assign(yyy.begin(), yyy.end());
  return set;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Standard error of the mean of independent block values.
double block_stderr(std::span<const double> blocks) {
  const std::size_t nb = blocks.size();
  if (nb < 2) return 0.0;
  const double m = mean_of(blocks);
  double ss = 0.0;
  for (double b : blocks) ss += (b - m) * (b - m);
  return std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
}

}  // namespace

FastRun run_fast_subsystem(std::span<const YyyTriad> yyy, int n, const SphereSample& init,
                           const FastRunOptions& opts) {
  // Printed tables conserve only to ~1e-4 per row; anything far beyond that
  // is a different model rather than rounding.
  const auto report = validate_conservation({}, yyy, n, 1e-3);
  if (!report.pass)
    throw PreconditionError("bath coefficients violate energy conservation (max residual " +
                            std::to_string(report.max_abs_residual) + ")");
  if (init.y.size() != static_cast<std::size_t>(n))
    throw PreconditionError("initial bath state has wrong length");

  const auto set = bath_only(yyy, n);
  const TriadSystem system(set, 1.0);
  const double e0 = fast_energy(init.y);
  FastBathModel model(system, e0, opts.renormalize);

  StepperConfig cfg;
  cfg.dt = opts.dt;
  cfg.scheme = Scheme::Rk5EulerNoise;
  cfg.record_stride = opts.record_stride;
  RngStream unused(0, 0);

  FastRun run;
  run.series = integrate_trajectory(model, init.y, cfg, opts.T, unused);
  run.max_relative_drift = model.max_relative_drift();
  run.renormalizations = model.renormalizations();
  if (run.max_relative_drift > opts.drift_tolerance) {
    std::ostringstream os;
    os << "bath energy drifted by " << run.max_relative_drift << " (tolerance "
       << opts.drift_tolerance << "); reduce dt below " << opts.dt;
    throw IntegrationError(os.str(), run.series.time(run.series.size() - 1),
                           std::vector<double>(run.series.row(run.series.size() - 1).begin(),
                                               run.series.row(run.series.size() - 1).end()));
  }
  return run;
}

CompatibilityReport check_compatibility(const TimeSeries& run, double tol, int n_blocks) {
  if (n_blocks < 2) throw PreconditionError("need at least two blocks");
  const std::size_t N = run.size();
  const std::size_t nb = static_cast<std::size_t>(n_blocks);
  if (N < nb * 10)
    throw PreconditionError("run too short for block standard errors: " + std::to_string(N) +
                            " samples, need " + std::to_string(nb * 10));
  const std::size_t n = run.width();
  CompatibilityReport rep;
  rep.n = static_cast<int>(n);
  rep.tol = tol;

  std::vector<double> first(nb * n, 0.0);
  std::vector<double> mixed(nb * n * n, 0.0);
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t r = 0; r < N; ++r) {
    const std::size_t b = r * nb / N;
    const auto y = run.row(r);
    ++count[b];
    double* fb = first.data() + b * n;
    double* mb = mixed.data() + b * n * n;
    for (std::size_t j = 0; j < n; ++j) {
      fb[j] += y[j];
      for (std::size_t k = j + 1; k < n; ++k) mb[j * n + k] += y[j] * y[k];
    }
  }

  rep.first_moments.assign(n, 0.0);
  rep.first_stderr.assign(n, 0.0);
  rep.mixed_moments.assign(n * n, 0.0);
  rep.mixed_stderr.assign(n * n, 0.0);
  std::vector<double> blocks(nb);
  auto judge = [&](double avg, double se, const std::string& what) {
    if (!(std::abs(avg) <= std::max(tol, 4.0 * se))) {
      rep.pass = false;
      std::ostringstream os;
      os << what << " = " << avg << " (stderr " << se << ")";
      rep.failures.push_back(os.str());
    }
  };

  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t b = 0; b < nb; ++b)
      blocks[b] = first[b * n + j] / static_cast<double>(count[b]);
    rep.first_moments[j] = mean_of(blocks);
    rep.first_stderr[j] = block_stderr(blocks);
    rep.max_abs_first = std::max(rep.max_abs_first, std::abs(rep.first_moments[j]));
    judge(rep.first_moments[j], rep.first_stderr[j], "<y" + std::to_string(j + 1) + ">");
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      for (std::size_t b = 0; b < nb; ++b)
        blocks[b] = mixed[b * n * n + j * n + k] / static_cast<double>(count[b]);
      const double avg = mean_of(blocks);
      const double se = block_stderr(blocks);
      rep.mixed_moments[j * n + k] = rep.mixed_moments[k * n + j] = avg;
      rep.mixed_stderr[j * n + k] = rep.mixed_stderr[k * n + j] = se;
      rep.max_abs_mixed = std::max(rep.max_abs_mixed, std::abs(avg));
      judge(avg, se, "<y" + std::to_string(j + 1) + " y" + std::to_string(k + 1) + ">");
    }
  }
  return rep;
}

std::optional<std::size_t> find_cutoff(std::span<const double> C, double fraction, int window) {
  if (C.empty()) return std::nullopt;
  const double thr = fraction * std::abs(C[0]);
  std::size_t run = 0;
  const auto w = static_cast<std::size_t>(std::max(window, 1));
  for (std::size_t l = 0; l < C.size(); ++l) {
    run = std::abs(C[l]) < thr ? run + 1 : 0;
    if (run == w) return l + 1 - w;
  }
  return std::nullopt;
}

namespace {

// Lag products of a sampled forcing series, overall and per block of origins.
class LagAccumulator {
 public:
  LagAccumulator(const std::vector<double>& f, std::size_t n_blocks)
      : f_(f), nb_(n_blocks) {}

  // Returns overall C(l); block values go to `per_block`.
  double lag(std::size_t l, std::vector<double>& per_block) const {
    const std::size_t N = f_.size();
    per_block.assign(nb_, 0.0);
    std::vector<std::size_t> count(nb_, 0);
    double total = 0.0;
    const std::size_t last = N - l;
    for (std::size_t b = 0; b < nb_; ++b) {
      const std::size_t lo = b * N / nb_;
      const std::size_t hi = std::min((b + 1) * N / nb_, last);
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += f_[i] * f_[i + l];
      per_block[b] = s;
      count[b] = hi > lo ? hi - lo : 0;
      total += s;
    }
    for (std::size_t b = 0; b < nb_; ++b)
      per_block[b] = count[b] ? per_block[b] / static_cast<double>(count[b]) : 0.0;
    return total / static_cast<double>(last);
  }

 private:
  const std::vector<double>& f_;
  std::size_t nb_;
};

}  // namespace

BathStatistics estimate_M(const CoefficientSet& set, const EstimateMOptions& opts) {
  validate_conservation(set.xyy, set.yyy, set.n, 0.0);  // structure only
  if (opts.origin_stride < 1) throw PreconditionError("origin_stride must be >= 1");
  if (opts.n_blocks < 2) throw PreconditionError("need at least two blocks");
  const int n = set.n;
  const double E = opts.energy_level > 0.0 ? opts.energy_level : static_cast<double>(n);
  if (!(E > 0.0)) throw PreconditionError("energy level must be positive");

  BathStatistics st;
  st.n = n;
  st.energy_level = E;

  CoefficientSet unit = set;
  unit.gamma = unit.sigma = 1.0;  // bath run ignores both
  const TriadSystem system(unit, 1.0);
  if (opts.n_runs < 1) throw PreconditionError("n_runs must be >= 1");
  const auto runs = static_cast<std::size_t>(opts.n_runs);
  const std::size_t un = static_cast<std::size_t>(n);

  std::vector<std::vector<double>> forcing(runs);
  std::vector<double> first(un, 0.0), mixed(un * un, 0.0);
  double samples = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    RngStream rng(opts.seed, opts.stream_id + r * kRunStreamSpacing);
    const SphereSample init = sample_uniform_sphere(n, E, rng);
    FastBathModel bath(system, E, opts.renormalize);
    Rk5Stepper stepper(un);
    auto drift = [&system](std::span<const double> a, std::span<double> b) {
      system.bath_drift(a, b);
    };

    std::vector<double> y = init.y;
    const std::int64_t burn = opts.burn_in > 0.0 ? step_count(opts.burn_in, opts.dt) : 0;
    for (std::int64_t s = 0; s < burn; ++s) {
      stepper.step(drift, std::span<double>(y), opts.dt);
      bath.post_step(y);
    }

    const std::int64_t steps = step_count(opts.T, opts.dt);
    auto& f = forcing[r];
    f.reserve(static_cast<std::size_t>(steps / opts.origin_stride + 1));
    auto sample = [&] {
      f.push_back(system.forcing(y));
      for (std::size_t j = 0; j < un; ++j) {
        first[j] += y[j];
        for (std::size_t k = j + 1; k < un; ++k) mixed[j * un + k] += y[j] * y[k];
      }
    };
    sample();
    for (std::int64_t s = 1; s <= steps; ++s) {
      stepper.step(drift, std::span<double>(y), opts.dt);
      bath.post_step(y);
      if (s % opts.origin_stride == 0) sample();
    }
    check_state(y, static_cast<double>(steps) * opts.dt);
    st.max_relative_drift = std::max(st.max_relative_drift, bath.max_relative_drift());
    st.renormalizations += bath.renormalizations();
    samples += static_cast<double>(f.size());
  }

  st.first_moments.resize(un);
  st.mixed_moments.assign(un * un, 0.0);
  for (std::size_t j = 0; j < un; ++j) {
    st.first_moments[j] = first[j] / samples;
    for (std::size_t k = j + 1; k < un; ++k) {
      const double m = mixed[j * un + k] / samples;
      st.mixed_moments[j * un + k] = st.mixed_moments[k * un + j] = m;
      st.max_abs_mixed_moment = std::max(st.max_abs_mixed_moment, std::abs(m));
    }
  }

  // Error bars come from blocks within a single run, or from the spread
  // between independent runs when there are several.
  const double ds = opts.dt * static_cast<double>(opts.origin_stride);
  const std::size_t run_len = forcing.front().size();
  const std::size_t nb = runs > 1 ? runs : static_cast<std::size_t>(opts.n_blocks);
  if (run_len < static_cast<std::size_t>(opts.n_blocks) * 10)
    throw PreconditionError("microcanonical run too short for blocks");
  const std::size_t cap_lags = std::min<std::size_t>(
      static_cast<std::size_t>(std::floor((opts.tau_fixed ? *opts.tau_fixed : opts.tau_cap) / ds +
                                          1e-9)),
      run_len / 2);

  std::vector<LagAccumulator> accs;
  for (const auto& f : forcing) accs.emplace_back(f, runs > 1 ? 1 : nb);
  auto lag = [&](std::size_t l, std::vector<double>& per_block) {
    if (runs == 1) return accs.front().lag(l, per_block);
    std::vector<double> unused;
    per_block.resize(runs);
    double total = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      per_block[r] = accs[r].lag(l, unused);
      total += per_block[r];
    }
    return total / static_cast<double>(runs);
  };

  std::vector<std::vector<double>> blockC;  // [lag][block]
  std::vector<double> per_block;
  const double thr_frac = opts.cutoff_fraction;
  const auto window = static_cast<std::size_t>(std::max(opts.cutoff_window, 1));
  std::size_t below = 0;
  std::optional<std::size_t> cutoff;
  for (std::size_t l = 0; l <= cap_lags; ++l) {
    st.C.push_back(lag(l, per_block));
    st.tau.push_back(static_cast<double>(l) * ds);
    blockC.push_back(per_block);
    if (opts.tau_fixed) continue;
    if (st.C[0] == 0.0) {  // no coupling: C vanishes identically
      cutoff = 0;
      break;
    }
    below = std::abs(st.C[l]) < thr_frac * std::abs(st.C[0]) ? below + 1 : 0;
    if (below == window) {
      cutoff = l + 1 - window;
      break;
    }
  }
  std::size_t upto = st.C.size() - 1;
  if (opts.tau_fixed) {
    upto = cap_lags;
  } else if (cutoff) {
    upto = *cutoff;
  } else {
    st.decayed = false;
    const std::size_t w = std::min(window, st.C.size());
    double tail = 0.0;
    for (std::size_t l = st.C.size() - w; l < st.C.size(); ++l) tail += st.C[l];
    st.tail_estimate = tail / static_cast<double>(w) * ds * static_cast<double>(w);
    std::ostringstream os;
    os << "C(tau) did not decay below " << thr_frac << "*C(0) by tau_cap=" << st.tau.back()
       << "; tail estimate over last window " << st.tail_estimate;
    st.warnings.push_back(os.str());
  }
  st.tau_max = static_cast<double>(upto) * ds;

  auto trapezoid = [&](auto value) {
    double a = 0.0;
    for (std::size_t l = 1; l <= upto; ++l) a += 0.5 * (value(l - 1) + value(l)) * ds;
    return a;
  };
  st.Q = trapezoid([&](std::size_t l) { return st.C[l]; });
  std::vector<double> block_area(nb);
  for (std::size_t b = 0; b < nb; ++b)
    block_area[b] = trapezoid([&](std::size_t l) { return blockC[l][b]; });
  st.stderr_Q = block_stderr(block_area);
  const double comp = std::pow(static_cast<double>(n) / E, 1.5);
  st.M = st.Q * comp;
  st.stderr_M = st.stderr_Q * comp;
  if (st.M < 0.0)
    st.warnings.push_back(
        "negative M: insufficient averaging or a non-ergodic bath; lengthen the run");

  st.static_moment_time = st.C.empty() ? 0.0 : st.C[0];
  if (opts.sphere_samples > 0) {
    RngStream srng(opts.seed, opts.stream_id + kSphereStreamOffset);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < opts.sphere_samples; ++i) {
      const auto p = sample_uniform_sphere(n, E, srng);
      const double v = system.forcing(p.y);
      s += v * v;
      s2 += v * v * v * v;
    }
    const double N = static_cast<double>(opts.sphere_samples);
    st.static_moment_sphere = s / N;
    st.static_moment_sphere_stderr =
        std::sqrt(std::max(0.0, s2 / N - st.static_moment_sphere * st.static_moment_sphere) / N);
    std::vector<double> c0(nb);
    for (std::size_t b = 0; b < nb; ++b) c0[b] = blockC[0][b];
    const double se = std::hypot(block_stderr(c0), st.static_moment_sphere_stderr);
    if (std::abs(st.static_moment_time - st.static_moment_sphere) > 4.0 * se) {
      std::ostringstream os;
      os << "static moment mismatch: time average C(0)=" << st.static_moment_time
         << " vs uniform-sphere " << st.static_moment_sphere << " (combined stderr " << se
         << "); the bath may not be uniform on its shell";
      st.warnings.push_back(os.str());
    }
  }
  return st;
}

RescalingReport check_rescaling(const CoefficientSet& set, std::span<const double> levels,
                                const EstimateMOptions& opts, double z_tolerance) {
  if (levels.size() < 2) throw PreconditionError("rescaling check needs at least two levels");
  RescalingReport rep;
  rep.z_tolerance = z_tolerance;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EstimateMOptions o = opts;
    o.energy_level = levels[i];
    o.stream_id = opts.stream_id + i * kLevelStreamSpacing;
    const auto st = estimate_M(set, o);
    rep.levels.push_back({st.energy_level, st.Q, st.stderr_Q, st.M, st.stderr_M});
  }
  const auto& a = rep.levels.front();
  const auto& b = rep.levels.back();
  rep.expected_ratio = std::pow(b.energy_level / a.energy_level, 1.5);
  rep.raw_ratio = a.Q != 0.0 ? b.Q / a.Q : (b.Q == 0.0 ? rep.expected_ratio : 0.0);
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.levels.size(); ++j) {
      const auto& p = rep.levels[i];
      const auto& q = rep.levels[j];
      const double diff = std::abs(p.M - q.M);
      const double se = std::hypot(p.stderr_M, q.stderr_M);
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
      rep.max_pairwise_z = std::max(rep.max_pairwise_z, z);
    }
  }
  rep.pass = rep.max_pairwise_z <= z_tolerance;
  return rep;
}

}  // namespace smr
