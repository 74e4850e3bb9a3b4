#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "smr/reduced.hpp"

using namespace smr;

namespace {

const ReducedParams kPaper{1.0, 2.236, 10, 1.2759};

// Unnormalised stationary product density: x ~ N(0, s), E ~ Gamma(n/2, 2s).
double product_density(double x, double E, const ReducedParams& p) {
  const double s = p.sigma * p.sigma / (2.0 * p.gamma);
  return std::exp(-x * x / (2.0 * s)) * std::pow(E, p.n / 2.0 - 1.0) * std::exp(-E / (2.0 * s));
}

// Probability flux J = b rho - 1/2 div(D D^T rho), by central differences.
std::array<double, 2> flux(double x, double E, const ReducedParams& p) {
  auto A = [&](double xx, double EE) {
    const auto D = reduced_diffusion({xx, EE, 0.0}, p);
    Matrix2 a{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) a[i][j] = D[i][0] * D[j][0] + D[i][1] * D[j][1];
    return a;
  };
  const double h = 1e-5;
  auto Arho = [&](double xx, double EE, int i, int j) {
    return A(xx, EE)[i][j] * product_density(xx, EE, p);
  };
  const auto b = reduced_drift({x, E, 0.0}, p);
  const double rho = product_density(x, E, p);
  std::array<double, 2> J{};
  for (int i = 0; i < 2; ++i) {
    const double dx = (Arho(x + h, E, i, 0) - Arho(x - h, E, i, 0)) / (2 * h);
    const double dE = (Arho(x, E + h, i, 1) - Arho(x, E - h, i, 1)) / (2 * h);
    J[i] = (i == 0 ? b.x : b.E) * rho - 0.5 * (dx + dE);
  }
  return J;
}

}  // namespace

TEST_CASE("drift and diffusion by hand") {
  const ReducedState s{0.5, 10.0, 0.0};
  const double c = 1.2759 / std::pow(10.0, 1.5);
  const auto d = reduced_drift(s, kPaper);
  CHECK(d.x == doctest::Approx(-0.5 - 11.0 * c * 0.5 * std::sqrt(10.0)));
  CHECK(d.E == doctest::Approx(-2.0 * c * std::pow(10.0, 1.5) + 22.0 * c * 0.25 * std::sqrt(10.0)));
  const auto D = reduced_diffusion(s, kPaper);
  const double w = std::sqrt(2.0 * 1.2759);  // (E/n)^{3/4} = 1 at E = n
  CHECK(D[0][0] == doctest::Approx(2.236));
  CHECK(D[0][1] == doctest::Approx(w));
  CHECK(D[1][0] == 0.0);
  CHECK(D[1][1] == doctest::Approx(-2.0 * 0.5 * w));
}

TEST_CASE("zero energy has no bath terms, negative energy is rejected") {
  const auto d = reduced_drift({1.0, 0.0, 0.0}, kPaper);
  CHECK(d.x == doctest::Approx(-1.0));
  CHECK(d.E == 0.0);
  CHECK_THROWS_AS(reduced_drift({1.0, -1e-9, 0.0}, kPaper), DomainError);
  CHECK_THROWS_AS(reduced_diffusion({1.0, -1.0, 0.0}, kPaper), DomainError);
  CHECK_THROWS_AS((ReducedParams{1.0, 1.0, 10, -0.1}.validate()), DomainError);
}

TEST_CASE("the product law carries no probability flux") {
  for (double x : {-3.0, -0.7, 0.4, 2.5})
    for (double E : {2.0, 12.0, 25.0, 60.0}) {
      const auto J = flux(x, E, kPaper);
      const auto b = reduced_drift({x, E, 0.0}, kPaper);
      const double scale = (std::abs(b.x) + std::abs(b.E) + 1.0) * product_density(x, E, kPaper);
      CHECK(std::abs(J[0]) < 1e-6 * scale);
      CHECK(std::abs(J[1]) < 1e-6 * scale);
    }
}

TEST_CASE("one shared W2 draw drives both rows") {
  const ReducedState s{0.8, 20.0, 0.0};
  const auto inc = reduced_noise_increment(s, kPaper, 1e-4, 0.3, -1.1);
  CHECK(inc.E_w2 == doctest::Approx(-2.0 * s.x * inc.x_w2));
  CHECK(inc.x_w1 == doctest::Approx(2.236 * 0.01 * 0.3));
}

TEST_CASE("E floor policies") {
  CHECK(e_floor_policy_from_string("reflect") == EFloorPolicy::Reflect);
  CHECK(to_string(EFloorPolicy::Reject) == "reject");
  CHECK_THROWS_AS(e_floor_policy_from_string("bounce"), ParseError);

  // Large x, tiny E and a coarse step make negative proposals common.
  for (auto policy : {EFloorPolicy::Clamp, EFloorPolicy::Reflect, EFloorPolicy::Reject}) {
    ReducedModel m(kPaper, policy);
    RngStream rng(3, 0);
    std::int64_t negative = 0;
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> z{4.0, 1e-3};
      m.apply_noise(z, 0.01, rng);
      negative += z[1] < 0.0;
    }
    CHECK(negative == 0);
    CHECK(m.floor_events() > 0);
    CHECK(m.steps() == 2000);
  }
}

TEST_CASE("split step is reproducible and stays in the domain") {
  RngStream a(11, 2), b(11, 2);
  ReducedState s{0.1, 25.0, 0.0}, r = s;
  for (int i = 0; i < 1000; ++i) {
    s = step_reduced(s, kPaper, 1e-3, a);
    r = step_reduced(r, kPaper, 1e-3, b);
  }
  CHECK(s.x == r.x);
  CHECK(s.E == r.E);
  CHECK(s.E >= 0.0);
  CHECK(s.t == doctest::Approx(1.0));
  CHECK_THROWS_AS(step_reduced(s, kPaper, 0.0, a), PreconditionError);
}

TEST_CASE("stationary initial draw has the right moments") {
  ReducedModel m(kPaper);
  RngStream rng(4, 0);
  const int N = 40000;
  double sx2 = 0.0, sE = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto z = m.stationary_initial_state(rng);
    sx2 += z[0] * z[0];
    sE += z[1];
  }
  const double s = 2.236 * 2.236 / 2.0;
  CHECK(sx2 / N == doctest::Approx(s).epsilon(4.0 * std::sqrt(2.0 / N)));
  CHECK(sE / N == doctest::Approx(10 * s).epsilon(4.0 * std::sqrt(2.0 / (10.0 * N))));
}
