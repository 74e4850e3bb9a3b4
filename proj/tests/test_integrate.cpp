#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "smr/integrate.hpp"

using namespace smr;

namespace {

// y' = A y with A a rotation plus damping; exact solution known.
struct LinearDrift {
  double a = -0.3, w = 2.0;
  void operator()(std::span<const double> z, std::span<double> dz) const {
    dz[0] = a * z[0] - w * z[1];
    dz[1] = w * z[0] + a * z[1];
  }
  std::array<double, 2> exact(double t, double x0, double y0) const {
    const double r = std::exp(a * t);
    return {r * (x0 * std::cos(w * t) - y0 * std::sin(w * t)),
            r * (x0 * std::sin(w * t) + y0 * std::cos(w * t))};
  }
};

double rk5_error(double dt, double T) {
  LinearDrift f;
  std::vector<double> z{1.0, 0.5};
  Rk5Stepper st(2);
  const auto steps = step_count(T, dt);
  for (std::int64_t s = 0; s < steps; ++s) st.step(f, std::span<double>(z), dt);
  const auto e = f.exact(T, 1.0, 0.5);
  return std::hypot(z[0] - e[0], z[1] - e[1]);
}

struct Ou {
  double gamma = 1.0, sigma = 1.0;
  std::size_t dimension() const { return 1; }
  void drift(std::span<const double> z, std::span<double> dz) const { dz[0] = -gamma * z[0]; }
  void apply_noise(std::span<double> z, double dt, RngStream& rng) {
    z[0] += sigma * std::sqrt(dt) * rng.normal();
  }
  void post_step(std::span<double>) {}
  std::vector<std::string> record_names() const { return {"x"}; }
  void record(std::span<const double> z, std::span<double> out) const { out[0] = z[0]; }
};

struct Exploding {
  std::size_t dimension() const { return 1; }
  void drift(std::span<const double> z, std::span<double> dz) const { dz[0] = z[0] * z[0]; }
  void apply_noise(std::span<double>, double, RngStream&) {}
  void post_step(std::span<double>) {}
  std::vector<std::string> record_names() const { return {"x"}; }
  void record(std::span<const double> z, std::span<double> out) const { out[0] = z[0]; }
};

}  // namespace

TEST_CASE("RK5 converges at fifth order on a linear system") {
  const double e1 = rk5_error(0.1, 5.0);
  const double e2 = rk5_error(0.05, 5.0);
  const double e3 = rk5_error(0.025, 5.0);
  CHECK(std::log2(e1 / e2) > 4.5);
  CHECK(std::log2(e2 / e3) > 4.5);
}

TEST_CASE("lower-order steppers have their nominal order") {
  auto err = [](Scheme sch, double dt) {
    LinearDrift f;
    std::vector<double> z{1.0, 0.5};
    DeterministicStepper st(sch, 2);
    for (std::int64_t s = 0; s < step_count(2.0, dt); ++s) st.step(f, std::span<double>(z), dt);
    const auto e = f.exact(2.0, 1.0, 0.5);
    return std::hypot(z[0] - e[0], z[1] - e[1]);
  };
  CHECK(std::log2(err(Scheme::Rk2EulerNoise, 0.01) / err(Scheme::Rk2EulerNoise, 0.005)) ==
        doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::log2(err(Scheme::EulerMaruyama, 0.001) / err(Scheme::EulerMaruyama, 0.0005)) ==
        doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("rk5_step matches the stepper and rejects non-finite results") {
  LinearDrift f;
  std::vector<double> z{1.0, 2.0};
  const auto out = rk5_step(f, std::span<const double>(z), 0.1);
  Rk5Stepper st(2);
  st.step(f, std::span<double>(z), 0.1);
  CHECK(out[0] == z[0]);
  CHECK(out[1] == z[1]);

  auto bad = [](std::span<const double>, std::span<double> dz) { dz[0] = NAN; };
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(rk5_step(bad, std::span<const double>(one), 0.1), IntegrationError);
}

TEST_CASE("split step adds noise with variance S S^T dt") {
  auto zero = [](std::span<const double>, std::span<double> dz) {
    for (auto& v : dz) v = 0.0;
  };
  struct Noise {
    std::size_t noise_count() const { return 2; }
    void operator()(std::span<const double>, std::span<double> out) const {
      out[0] = 2.0;  // row 0: (2, 1)
      out[1] = 1.0;
      out[2] = 0.0;  // row 1: (0, -3)
      out[3] = -3.0;
    }
  };
  RngStream rng(5, 0);
  const double dt = 0.01;
  const int N = 200000;
  double s00 = 0.0, s01 = 0.0, s11 = 0.0, m0 = 0.0;
  std::vector<double> z{0.0, 0.0};
  for (int i = 0; i < N; ++i) {
    const auto out = split_step_sde(zero, Noise{}, std::span<const double>(z), dt, rng);
    m0 += out[0];
    s00 += out[0] * out[0];
    s01 += out[0] * out[1];
    s11 += out[1] * out[1];
  }
  // S S^T = [[5, -3], [-3, 9]]
  const double tol = 4.0 * std::sqrt(2.0 / N);
  CHECK(s00 / N / dt == doctest::Approx(5.0).epsilon(tol));
  CHECK(s11 / N / dt == doctest::Approx(9.0).epsilon(tol));
  CHECK(s01 / N / dt == doctest::Approx(-3.0).epsilon(2 * tol));
  CHECK(std::abs(m0 / N) < 4.0 * std::sqrt(5.0 * dt / N));
}

TEST_CASE("identical seed and stream replay exactly, distinct streams differ") {
  RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differ_c = false, differ_d = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differ_c = differ_c || x != c.normal();
    differ_d = differ_d || x != d.normal();
  }
  CHECK(differ_c);
  CHECK(differ_d);
}

TEST_CASE("trajectory recording layout") {
  Ou model;
  StepperConfig cfg;
  cfg.dt = 0.01;
  cfg.record_stride = 10;
  RngStream rng(1, 7);
  std::vector<double> init{0.25};
  const auto ts = integrate_trajectory(model, init, cfg, 5.0, rng);
  CHECK(ts.size() == 51);  // 500 steps, every 10th plus the initial state
  CHECK(ts.at(0, 0) == 0.25);
  CHECK(ts.dt_sample() == doctest::Approx(0.1));
  CHECK(ts.time(50) == doctest::Approx(5.0));
  CHECK(ts.seed == 1);
  CHECK(ts.stream_id == 7);
  CHECK(step_count(1.0, 1e-4) == 10000);
  CHECK(step_count(0.3, 0.1) == 3);

  RngStream rng2(1, 7);
  const auto again = integrate_trajectory(model, init, cfg, 5.0, rng2);
  for (std::size_t r = 0; r < ts.size(); ++r) CHECK(ts.at(r, 0) == again.at(r, 0));
}

TEST_CASE("OU stationary variance under the split-step scheme") {
  Ou model;
  StepperConfig cfg;
  cfg.dt = 0.01;
  cfg.record_stride = 10;
  RngStream rng(9, 0);
  std::vector<double> init{0.0};
  const auto ts = integrate_trajectory(model, init, cfg, 20000.0, rng);
  const auto x = ts.column(0);
  double s = 0.0;
  for (double v : x) s += v * v;
  // sigma^2 / (2 gamma) = 0.5; std error ~ 0.5 sqrt(2 * 1 / T) ~ 0.005
  CHECK(s / static_cast<double>(x.size()) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("blow-up aborts with time and state") {
  Exploding model;
  StepperConfig cfg;
  cfg.dt = 0.01;
  RngStream rng(1, 0);
  std::vector<double> init{1.0};
  try {
    integrate_trajectory(model, init, cfg, 5.0, rng);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.time() > 0.9);
    CHECK(e.time() < 1.2);
    CHECK(e.state().size() == 1);
  }
  CHECK_THROWS_AS(check_state(std::vector<double>{1e13}, 0.0), IntegrationError);
  CHECK_THROWS_AS(check_state(std::vector<double>{INFINITY}, 0.0), IntegrationError);
  CHECK_NOTHROW(check_state(std::vector<double>{1e11, -1e11}, 0.0));
}

TEST_CASE("time series CSV round trip keeps every bit") {
  TimeSeries ts({"x", "E"}, 0.01, 2.0);
  ts.append(std::vector<double>{0.1, 1.0 / 3.0});
  ts.append(std::vector<double>{-1e-300, 2.718281828459045});
  const auto path = std::filesystem::temp_directory_path() / "smr_ts.csv";
  ts.write_csv(path);
  const auto back = TimeSeries::read_csv(path);
  CHECK(back.names() == ts.names());
  CHECK(back.size() == 2);
  CHECK(back.at(0, 1) == 1.0 / 3.0);
  CHECK(back.at(1, 0) == -1e-300);
  CHECK(back.t0() == doctest::Approx(2.0));
  CHECK(back.dt_sample() == doctest::Approx(0.01));
  CHECK(back.column("E")[1] == 2.718281828459045);
  CHECK_THROWS_AS(back.column("y1"), PreconditionError);
  const auto tail = back.tail(1);
  CHECK(tail.size() == 1);
  CHECK(tail.t0() == doctest::Approx(2.01));
  std::filesystem::remove(path);
}

TEST_CASE("scheme names and config validation") {
  CHECK(scheme_from_string("rk5") == Scheme::Rk5EulerNoise);
  CHECK(scheme_from_string("euler") == Scheme::EulerMaruyama);
  CHECK(to_string(Scheme::Rk2EulerNoise) == "rk2");
  CHECK_THROWS_AS(scheme_from_string("rk4"), ParseError);
  StepperConfig bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  bad.dt = 0.1;
  bad.record_stride = 0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}
