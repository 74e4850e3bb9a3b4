#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "smr/stats.hpp"

using namespace smr;

namespace {

// Exact AR(1) sampling of an OU process with unit variance and rate 1/tau.
std::vector<double> ou_series(std::size_t N, double dt, double tau, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d;
  const double phi = std::exp(-dt / tau);
  const double kick = std::sqrt(1.0 - phi * phi);
  std::vector<double> z(N);
  z[0] = d(g);
  for (std::size_t i = 1; i < N; ++i) z[i] = phi * z[i - 1] + kick * d(g);
  return z;
}

CorrelationCurve exponential_curve(double tau, double h, std::size_t lags) {
  CorrelationCurve c;
  for (std::size_t l = 0; l <= lags; ++l) {
    c.lags.push_back(static_cast<double>(l) * h);
    c.values.push_back(std::exp(-static_cast<double>(l) * h / tau));
    c.std_err.push_back(0.0);
  }
  return c;
}

}  // namespace

TEST_CASE("white noise has a delta correlation function") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> d;
  std::vector<double> z(100000);
  for (auto& v : z) v = d(g);
  const auto cf = correlation_function(z, 1.0, 20.0);
  CHECK(cf.values.size() == 21);
  CHECK(cf.values[0] == 1.0);
  for (std::size_t l = 1; l < cf.values.size(); ++l)
    CHECK(std::abs(cf.values[l]) < 4.0 * std::max(cf.std_err[l], 1.0 / std::sqrt(1e5)));
}

TEST_CASE("OU correlation decays exponentially") {
  const double tau = 0.5, dt = 0.01;
  const auto z = ou_series(1000000, dt, tau, 2);
  const auto cf = correlation_function(z, dt, 2.0);
  for (std::size_t l = 0; l < cf.values.size(); l += 25) {
    const double expect = std::exp(-cf.lags[l] / tau);
    CHECK(std::abs(cf.values[l] - expect) < 4.0 * cf.std_err[l] + 1e-3);
  }
  CHECK(cf.variance == doctest::Approx(1.0).epsilon(0.03));
  const auto ct = correlation_time(cf);
  CHECK(ct.value == doctest::Approx(tau).epsilon(0.05));
}

TEST_CASE("correlation time of an exact exponential") {
  const double tau = 0.34, h = 0.01;
  const auto c = exponential_curve(tau, h, 400);
  // First lag with CF < 0.01, and the trapezoid rule as a geometric sum.
  const auto L = static_cast<std::size_t>(std::floor(tau * std::log(100.0) / h)) + 1;
  const double q = std::exp(-h / tau);
  const double area = h * (0.5 + q * (1.0 - std::pow(q, L - 1)) / (1.0 - q) + 0.5 * std::pow(q, L));
  const auto ct = correlation_time(c);
  CHECK(ct.decayed);
  CHECK(ct.tau_star == doctest::Approx(L * h));
  CHECK(ct.area == doctest::Approx(area).epsilon(1e-12));
  CHECK(ct.value == doctest::Approx(area).epsilon(1e-12));
  const auto inv = correlation_time(c, CtConvention::InverseArea);
  CHECK(inv.value == doctest::Approx(1.0 / area).epsilon(1e-12));

  const auto short_curve = exponential_curve(tau, h, 50);
  const auto open = correlation_time(short_curve);
  CHECK_FALSE(open.decayed);
  CHECK(open.tau_star == doctest::Approx(0.5));
}

TEST_CASE("correlation function preconditions") {
  std::vector<double> flat(1000, 3.0);
  CHECK_THROWS_AS(correlation_function(flat, 0.1, 1.0), DomainError);
  std::vector<double> shortz(100, 0.0);
  shortz[3] = 1.0;
  CHECK_THROWS_AS(correlation_function(shortz, 0.1, 5.0), PreconditionError);
}

TEST_CASE("lagged kurtosis is 1 for a Gaussian process") {
  const auto z = ou_series(2000000, 0.01, 0.3, 3);
  const auto k = lagged_kurtosis(z, 0.01, 2.0);
  for (std::size_t l = 0; l < k.values.size(); ++l)
    CHECK(std::abs(k.values[l] - 1.0) < 3.0 * k.std_err[l] + 1e-12);
}

TEST_CASE("lagged kurtosis detects a non-Gaussian process") {
  auto z = ou_series(400000, 0.01, 0.3, 4);
  for (auto& v : z) v = v * v * v;  // heavy tails
  const auto k = lagged_kurtosis(z, 0.01, 0.5);
  CHECK(k.values[0] > 1.5);
}

TEST_CASE("empirical density") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> d(0.0, std::sqrt(2.5));
  std::vector<double> z(400000);
  for (auto& v : z) v = d(g);
  const auto dens = empirical_density(z, 60, -9.0, 9.0);
  double mass = 0.0;
  for (std::size_t b = 0; b < dens.density.size(); ++b) mass += dens.density[b] * dens.width(b);
  CHECK(mass == doctest::Approx(1.0));
  CHECK(dens.count + dens.outside == z.size());
  CHECK(dens.centers().front() == doctest::Approx(-9.0 + 0.15));
  const auto rho = analytic_density_x(1.0, std::sqrt(5.0));
  CHECK(rho.variance == doctest::Approx(2.5));
  CHECK(l1_distance(dens, [&](double x) { return rho.cdf(x); }) < 0.02);

  std::vector<double> same(10, 1.0);
  const auto auto_range = empirical_density(same, 4);
  CHECK(auto_range.edges.front() == doctest::Approx(0.5));
  CHECK(auto_range.edges.back() == doctest::Approx(1.5));
  CHECK_THROWS_AS(empirical_density(std::vector<double>{}, 4), PreconditionError);
}

TEST_CASE("analytic E density is the chi-squared law") {
  const auto rho = analytic_density_E(1.0, 2.236, 10);
  CHECK(rho.mean() == doctest::Approx(10 * 2.236 * 2.236 / 2.0));
  CHECK(rho.mode() == doctest::Approx(8 * 2.236 * 2.236 / 2.0));
  // Simpson integration of the density against the CDF.
  const int N = 4000;
  const double hi = 60.0, h = hi / N;
  double s = rho(0.0) + rho(hi);
  for (int i = 1; i < N; ++i) s += (i % 2 ? 4.0 : 2.0) * rho(i * h);
  CHECK(s * h / 3.0 == doctest::Approx(rho.cdf(hi)).epsilon(1e-8));
  CHECK(rho.cdf(0.0) == 0.0);
  CHECK(rho(-1.0) == 0.0);
}

TEST_CASE("ensemble averages") {
  std::vector<std::vector<double>> runs{{1.0, 2.0}, {3.0, 6.0}};
  const auto st = ensemble_average(runs);
  CHECK(st.mean[0] == 2.0);
  CHECK(st.mean[1] == 4.0);
  REQUIRE(st.std_err);
  CHECK((*st.std_err)[0] == doctest::Approx(1.0));
  std::vector<std::vector<double>> single{{1.0, 2.0}};
  CHECK_FALSE(ensemble_average(single).std_err);
  std::vector<std::vector<double>> ragged{{1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(ensemble_average(ragged), PreconditionError);
}

TEST_CASE("moment summary") {
  std::vector<double> z;
  for (int i = 0; i < 1000; ++i) z.push_back(i % 2 ? 1.0 : -1.0);
  const auto m = moments(z);
  CHECK(m.mean == doctest::Approx(0.0));
  CHECK(m.variance == doctest::Approx(1.0));
  CHECK(m.skewness == doctest::Approx(0.0));
  CHECK(transient_samples(100000, 0.01, 1.0) == 1000);
  CHECK(transient_samples(100, 0.01, 1.0) == 50);
  CHECK(transient_samples(1000000, 0.01, 1.0) == 10000);
}
