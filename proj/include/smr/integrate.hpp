#pragma once

// Fixed-step time integration.
//
// Deterministic drift is advanced with a one-step Runge-Kutta rule; additive
// or state-dependent noise is then added with an Euler increment evaluated at
// the post-drift point (split step). The overall stochastic scheme is strong
// order dt^(1/2) / weak order dt, but the deterministic energy transfer inside
// a step is resolved to the order of the Runge-Kutta rule.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smr/errors.hpp"

namespace smr {

enum class Scheme { Rk5EulerNoise, Rk2EulerNoise, EulerMaruyama };

std::string to_string(Scheme s);
/// Accepts "rk5", "rk2", "euler" (and the long enum spellings).
Scheme scheme_from_string(const std::string& s);

struct StepperConfig {
  double dt = 1e-4;
  Scheme scheme = Scheme::Rk5EulerNoise;
  int record_stride = 1;

  void validate() const;
};

/// Components beyond this magnitude abort a trajectory.
inline constexpr double kBlowUpThreshold = 1e12;

/// Independent normal stream for one trajectory. The engine is seeded from
/// (seed, stream_id) through std::seed_seq, so equal pairs replay exactly.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Uniformly sampled record of a trajectory. Rows are samples, columns are
/// the named components; storage is row-major.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::vector<std::string> names, double dt_sample, double t0 = 0.0);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t width() const { return names_.size(); }
  std::size_t size() const { return width() == 0 ? 0 : values_.size() / width(); }
  bool empty() const { return values_.empty(); }

  double dt_sample() const { return dt_sample_; }
  double t0() const { return t0_; }
  double time(std::size_t row) const { return t0_ + static_cast<double>(row) * dt_sample_; }

  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  void append(std::span<const double> row);
  void reserve(std::size_t rows) { values_.reserve(rows * width()); }

  double at(std::size_t row, std::size_t col) const { return values_[row * width() + col]; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * width(), width()};
  }
  std::vector<double> column(std::size_t col) const;
  std::vector<double> column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;

  /// Drops the first `rows` samples and shifts t0 accordingly.
  TimeSeries tail(std::size_t skip_rows) const;

  /// Header `t,<names...>`, one row per sample, 17 significant digits.
  void write_csv(const std::filesystem::path& path) const;
  static TimeSeries read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  double dt_sample_ = 1.0;
  double t0_ = 0.0;
  std::vector<double> values_;
};

// --- deterministic steppers -------------------------------------------------

template <class F>
concept DriftFunction = requires(const F& f, std::span<const double> z, std::span<double> dz) {
  f(z, dz);
};

/// Fifth-order solution of the Dormand-Prince 5(4) pair, fixed step.
class Rk5Stepper {
 public:
  explicit Rk5Stepper(std::size_t dim) : dim_(dim), tmp_(dim) {
    for (auto& k : k_) k.assign(dim, 0.0);
  }

  template <DriftFunction F>
  void step(const F& f, std::span<double> z, double dt);

 private:
  std::size_t dim_;
  std::array<std::vector<double>, 6> k_;
  std::vector<double> tmp_;
};

/// Explicit midpoint rule.
class Rk2Stepper {
 public:
  explicit Rk2Stepper(std::size_t dim) : k1_(dim), k2_(dim), tmp_(dim) {}

  template <DriftFunction F>
  void step(const F& f, std::span<double> z, double dt) {
    const std::size_t n = z.size();
    f(std::span<const double>(z), std::span<double>(k1_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = z[i] + 0.5 * dt * k1_[i];
    f(std::span<const double>(tmp_), std::span<double>(k2_));
    for (std::size_t i = 0; i < n; ++i) z[i] += dt * k2_[i];
  }

 private:
  std::vector<double> k1_, k2_, tmp_;
};

class EulerStepper {
 public:
  explicit EulerStepper(std::size_t dim) : k_(dim) {}

  template <DriftFunction F>
  void step(const F& f, std::span<double> z, double dt) {
    f(std::span<const double>(z), std::span<double>(k_));
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += dt * k_[i];
  }

 private:
  std::vector<double> k_;
};

/// Runtime choice among the three deterministic rules.
class DeterministicStepper {
 public:
  DeterministicStepper(Scheme scheme, std::size_t dim)
      : scheme_(scheme), rk5_(dim), rk2_(dim), euler_(dim) {}

  template <DriftFunction F>
  void step(const F& f, std::span<double> z, double dt) {
    switch (scheme_) {
      case Scheme::Rk5EulerNoise: rk5_.step(f, z, dt); break;
      case Scheme::Rk2EulerNoise: rk2_.step(f, z, dt); break;
      case Scheme::EulerMaruyama: euler_.step(f, z, dt); break;
    }
  }

 private:
  Scheme scheme_;
  Rk5Stepper rk5_;
  Rk2Stepper rk2_;
  EulerStepper euler_;
};

/// Throws IntegrationError if any component is non-finite or beyond kBlowUpThreshold.
void check_state(std::span<const double> z, double t);

/// One RK5 step on a copy of `z`; throws IntegrationError on a non-finite result.
template <DriftFunction F>
std::vector<double> rk5_step(const F& f, std::span<const double> z, double dt, double t = 0.0) {
  std::vector<double> out(z.begin(), z.end());
  Rk5Stepper stepper(z.size());
  stepper.step(f, std::span<double>(out), dt);
  for (double v : out)
    if (!std::isfinite(v)) throw IntegrationError("non-finite derivative in RK5 step", t, out);
  return out;
}

/// Noise amplitude callback: fills a dim x m row-major matrix for state z.
template <class G>
concept NoiseFunction = requires(const G& g, std::span<const double> z, std::span<double> out) {
  { g.noise_count() } -> std::convertible_to<std::size_t>;
  g(z, out);
};

/// RK5 on the drift, then z += S(z*) sqrt(dt) xi with xi ~ N(0, I_m), where
/// z* is the post-drift state.
template <DriftFunction F, NoiseFunction G>
std::vector<double> split_step_sde(const F& drift, const G& noise, std::span<const double> z,
                                   double dt, RngStream& rng, double t = 0.0) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  std::vector<double> out = rk5_step(drift, z, dt, t);
  const std::size_t dim = z.size();
  const std::size_t m = noise.noise_count();
  std::vector<double> amp(dim * m);
  noise(std::span<const double>(out), std::span<double>(amp));
  const double sq = std::sqrt(dt);
  std::vector<double> xi(m);
  for (auto& v : xi) v = rng.normal();
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r] += amp[r * m + c] * sq * xi[c];
  check_state(out, t + dt);
  return out;
}

// --- trajectory driver ------------------------------------------------------

/// What integrate_trajectory needs from a model.
///   dimension()             state length
///   drift(z, dz)            deterministic right-hand side
///   apply_noise(z, dt, rng) Euler noise increment in place (may be a no-op)
///   post_step(z)            state repair after each step (clamps, renormalisation)
///   record_names()          column names for the TimeSeries
///   record(z, out)          fills one row
template <class M>
concept TrajectoryModel = requires(M& m, const M& cm, std::span<const double> z,
                                   std::span<double> dz, double dt, RngStream& rng) {
  { cm.dimension() } -> std::convertible_to<std::size_t>;
  cm.drift(z, dz);
  m.apply_noise(dz, dt, rng);
  m.post_step(dz);
  { cm.record_names() } -> std::convertible_to<std::vector<std::string>>;
  cm.record(z, dz);
};

/// Number of steps floor(T/dt), tolerant of T being an exact multiple of dt.
std::int64_t step_count(double T, double dt);

/// Integrates from `init` for floor(T/dt) steps, recording every
/// `record_stride` steps starting with the initial state.
template <TrajectoryModel M>
TimeSeries integrate_trajectory(M& model, std::span<const double> init,
                                const StepperConfig& config, double T, RngStream& rng,
                                double t0 = 0.0) {
  config.validate();
  if (!(T >= config.dt)) throw PreconditionError("run length T must be at least dt");
  const std::size_t dim = model.dimension();
  if (init.size() != dim) throw PreconditionError("initial state has wrong dimension");

  const std::int64_t steps = step_count(T, config.dt);
  const std::int64_t stride = config.record_stride;
  TimeSeries series(model.record_names(), config.dt * static_cast<double>(stride), t0);
  series.seed = rng.seed();
  series.stream_id = rng.stream_id();
  series.reserve(static_cast<std::size_t>(steps / stride + 1));

  std::vector<double> z(init.begin(), init.end());
  std::vector<double> row(series.width());
  DeterministicStepper stepper(config.scheme, dim);
  auto drift = [&model](std::span<const double> a, std::span<double> b) { model.drift(a, b); };

  check_state(z, t0);
  model.record(z, row);
  series.append(row);
  for (std::int64_t s = 1; s <= steps; ++s) {
    stepper.step(drift, std::span<double>(z), config.dt);
    model.apply_noise(std::span<double>(z), config.dt, rng);
    model.post_step(std::span<double>(z));
    if (s % stride == 0) {
      const double t = t0 + static_cast<double>(s) * config.dt;
      check_state(z, t);
      model.record(z, row);
      series.append(row);
    }
  }
  check_state(z, t0 + static_cast<double>(steps) * config.dt);
  return series;
}

// --- Rk5Stepper implementation ---------------------------------------------

template <DriftFunction F>
void Rk5Stepper::step(const F& f, std::span<double> z, double dt) {
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                   a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                   a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                   b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;

  const std::size_t n = dim_;
  auto& k1 = k_[0];
  auto& k2 = k_[1];
  auto& k3 = k_[2];
  auto& k4 = k_[3];
  auto& k5 = k_[4];
  auto& k6 = k_[5];
  auto eval = [&](std::vector<double>& out) {
    f(std::span<const double>(tmp_), std::span<double>(out));
  };

  f(std::span<const double>(z.data(), n), std::span<double>(k1));
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = z[i] + dt * a21 * k1[i];
  eval(k2);
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = z[i] + dt * (a31 * k1[i] + a32 * k2[i]);
  eval(k3);
  for (std::size_t i = 0; i < n; ++i)
    tmp_[i] = z[i] + dt * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  eval(k4);
  for (std::size_t i = 0; i < n; ++i)
    tmp_[i] = z[i] + dt * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  eval(k5);
  for (std::size_t i = 0; i < n; ++i)
    tmp_[i] =
        z[i] + dt * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  eval(k6);
  for (std::size_t i = 0; i < n; ++i)
    z[i] += dt * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
}

}  // namespace smr
