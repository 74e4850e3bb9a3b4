#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "smr/model.hpp"
#include "smr/model_io.hpp"

using namespace smr;

namespace {

std::vector<double> random_vector(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

}  // namespace

TEST_CASE("printed tables satisfy the conservation constraints") {
  const auto set = builtin_paper_model();
  CHECK(set.xyy.size() == 10);
  CHECK(set.yyy.size() == 19);
  const auto rep = validate_conservation(set, 5e-4);
  CHECK(rep.pass);
  CHECK(rep.residuals.size() == 29);
  CHECK(rep.max_abs_residual < 5e-4);
}

TEST_CASE("projected tables are conservative to machine precision") {
  const auto rep = validate_conservation(builtin_projected_model(), 1e-12);
  CHECK(rep.pass);
  CHECK(rep.max_abs_residual <= 1e-15);
}

TEST_CASE("a perturbed triad fails and is named in the report") {
  auto set = builtin_paper_model();
  set.yyy[3].b_kij += 1e-4;
  const auto rep = validate_conservation(set, 1e-12);
  CHECK_FALSE(rep.pass);
  bool named = false;
  for (const auto& r : rep.residuals)
    if (r.label == "yyy(1,2,10)") named = std::abs(r.residual - 1e-4) < 1e-12;
  CHECK(named);
  CHECK(validate_conservation(set, 5e-4).pass);
}

TEST_CASE("structural errors name the triad") {
  auto set = builtin_paper_model();
  set.xyy[0].k = 11;
  CHECK_THROWS_WITH_AS(validate_conservation(set, 1e-3), doctest::Contains("xyy(1,11)"),
                       StructuralError);
  set = builtin_paper_model();
  set.yyy[0].k = 2;
  CHECK_THROWS_WITH_AS(validate_conservation(set, 1e-3), doctest::Contains("yyy(1,2,2)"),
                       StructuralError);
}

TEST_CASE("projection is idempotent and only removes the residual") {
  const auto raw = builtin_paper_model();
  const auto once = project_to_conservative(raw.xyy, raw.yyy);
  const auto twice = project_to_conservative(once.xyy, once.yyy);
  CHECK(twice.max_change <= 1e-15);
  for (std::size_t r = 0; r < raw.yyy.size(); ++r) {
    const double bound = std::abs(raw.yyy[r].residual()) / 3.0 + 1e-15;
    CHECK(std::abs(once.yyy[r].b_ijk - raw.yyy[r].b_ijk) <= bound + 1e-15);
    CHECK(once.yyy[r].residual() == 0.0);
  }
  for (const auto& t : once.xyy) CHECK(t.residual() == 0.0);

  std::vector<YyyTriad> off{{1, 2, 3, 1.0, 1.0, 1.0}};
  const auto p = project_to_conservative({}, off);
  CHECK(p.yyy[0].b_ijk == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.max_change == doctest::Approx(1.0));
}

TEST_CASE("hand-evaluated drift terms") {
  CoefficientSet set;
  set.gamma = 1.0;
  set.sigma = 1.0;
  set.n = 3;
  set.xyy = {{1, 2, 1.2, -0.55, -0.65}};
  set.yyy = {{1, 2, 3, 2.0, 2.5, -4.5}};
  const double eps = 0.5;
  SystemState s{1.0, {1.0, 2.0, 3.0}, 0.0};
  const auto d = full_drift(s, set.params(eps), set.xyy, set.yyy);
  // dx = -x + (1/eps) 1.2 y1 y2
  CHECK(d.dx == doctest::Approx(-1.0 + 2.0 * 1.2 * 2.0));
  // y terms: (1/eps) coupling plus (1/eps^2) bath
  CHECK(d.dy[0] == doctest::Approx(2.0 * -0.55 * 1.0 * 2.0 + 4.0 * 2.0 * 2.0 * 3.0));
  CHECK(d.dy[1] == doctest::Approx(2.0 * -0.65 * 1.0 * 1.0 + 4.0 * 2.5 * 3.0 * 1.0));
  CHECK(d.dy[2] == doctest::Approx(4.0 * -4.5 * 1.0 * 2.0));

  const TriadSystem sys(set, eps);
  std::vector<double> z{1.0, 1.0, 2.0, 3.0}, dz(4);
  sys.drift(z, dz);
  CHECK(dz[0] == doctest::Approx(d.dx));
  for (int i = 0; i < 3; ++i) CHECK(dz[i + 1] == doctest::Approx(d.dy[i]));
}

TEST_CASE("a single active mode is a fixed point of the bath") {
  CoefficientSet set;
  set.n = 10;
  set.yyy = {{1, 2, 3, 2.0, 2.5, -4.5}};
  const TriadSystem sys(set, 1.0);
  std::vector<double> y(10, 0.0), dy(10);
  y[0] = 1.0;
  sys.bath_drift(y, dy);
  for (double v : dy) CHECK(v == 0.0);
}

TEST_CASE("compiled drift agrees with the reference evaluation") {
  const auto set = builtin_paper_model();
  std::mt19937_64 g(7);
  for (double eps : {1.0, 0.5, 0.1}) {
    const TriadSystem sys(set, eps);
    for (int trial = 0; trial < 20; ++trial) {
      auto z = random_vector(g, 11);
      std::vector<double> dz(11);
      sys.drift(z, dz);
      SystemState s{z[0], {z.begin() + 1, z.end()}, 0.0};
      const auto ref = full_drift(s, set.params(eps), set.xyy, set.yyy);
      CHECK(dz[0] == doctest::Approx(ref.dx).epsilon(1e-12));
      for (int i = 0; i < 10; ++i) CHECK(dz[i + 1] == doctest::Approx(ref.dy[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conservative tables conserve x^2 + E in the interaction terms") {
  const auto set = builtin_projected_model();
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 50; ++trial) {
    SystemState s;
    s.x = std::normal_distribution<double>()(g);
    s.y = random_vector(g, 10);
    const auto parts = full_drift_parts(s, set.params(0.3), set.xyy, set.yyy);
    double bath = 0.0, exchange = s.x * parts.x_coupling;
    double scale = 0.0;
    for (int i = 0; i < 10; ++i) {
      bath += s.y[i] * parts.y_bath[i];
      exchange += s.y[i] * parts.y_coupling[i];
      scale += std::abs(s.y[i] * parts.y_bath[i]);
    }
    CHECK(std::abs(bath) <= 1e-12 * (1.0 + scale));
    CHECK(std::abs(exchange) <= 1e-12 * (1.0 + scale));
  }
}

TEST_CASE("energy rate is the fast-energy derivative along the drift") {
  const auto set = builtin_projected_model();
  const TriadSystem sys(set, 0.5);
  std::mt19937_64 g(3);
  auto z = random_vector(g, 11);
  std::vector<double> dz(11);
  sys.drift(z, dz);
  double dE = 0.0;
  for (int i = 1; i <= 10; ++i) dE += 2.0 * z[i] * dz[i];
  CHECK(sys.energy_rate(z) == doctest::Approx(dE).epsilon(1e-10));
  CHECK(sys.forcing(std::vector<double>(z.begin() + 1, z.end())) ==
        doctest::Approx(-dE * 0.5 / (2.0 * z[0])).epsilon(1e-10));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((ModelParams{1.0, 1.0, 0.0, 10}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{-1.0, 1.0, 1.0, 10}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{1.0, 1.0, 1.0, 1}.validate()), DomainError);
  CHECK(ModelParams{1.0, 2.236, 1.0, 10}.stationary_variance() == doctest::Approx(2.499848));
  CHECK_THROWS_AS(TriadSystem(builtin_paper_model(), -1.0), DomainError);
}

TEST_CASE("coefficient JSON round trip") {
  const auto set = builtin_paper_model();
  const auto back = coefficients_from_json(coefficients_to_json(set));
  CHECK(back.gamma == set.gamma);
  CHECK(back.sigma == set.sigma);
  CHECK(back.n == set.n);
  REQUIRE(back.xyy.size() == set.xyy.size());
  REQUIRE(back.yyy.size() == set.yyy.size());
  for (std::size_t r = 0; r < set.xyy.size(); ++r) {
    CHECK(back.xyy[r].j == set.xyy[r].j);
    CHECK(back.xyy[r].a_yxy_k == set.xyy[r].a_yxy_k);
  }
  for (std::size_t r = 0; r < set.yyy.size(); ++r) CHECK(back.yyy[r].b_kij == set.yyy[r].b_kij);

  const auto path = std::filesystem::temp_directory_path() / "smr_coeff_roundtrip.json";
  save_coefficients(set, path);
  CHECK(load_coefficients(path).yyy[5].b_jki == set.yyy[5].b_jki);
  std::filesystem::remove(path);
}

TEST_CASE("malformed coefficient documents raise ParseError") {
  CHECK_THROWS_AS(coefficients_from_json(nlohmann::json::parse(R"({"gamma":1})")), ParseError);
  CHECK_THROWS_AS(coefficients_from_json(nlohmann::json::parse(
                      R"({"gamma":1,"sigma":1,"n":3,"xyy":[{"j":"a"}],"yyy":[]})")),
                  ParseError);
  const auto path = std::filesystem::temp_directory_path() / "smr_bad.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_coefficients(path), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_coefficients("/nonexistent/coeffs.json"), ParseError);
}
