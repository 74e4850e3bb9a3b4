#include "smr/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smr {

void ModelParams::validate() const {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (n < 2) throw DomainError("need at least two fast modes");
}

double SystemState::energy() const { return fast_energy(y); }

double fast_energy(std::span<const double> y) {
  double e = 0.0;
  for (double v : y) e += v * v;
  return e;
}

CoefficientSet builtin_paper_model() {
  CoefficientSet set;
  set.gamma = 1.0;
  set.sigma = 2.236;
  set.n = 10;
  set.xyy = {
      {1, 2, 1.2, -0.55, -0.65},     {8, 9, 0.525, 0.25, -0.775},
      {4, 10, 1.35, -0.725, -0.625}, {5, 6, 1.125, -0.5, -0.625},
      {3, 7, 1.35, -0.725, -0.625},  {1, 10, 0.525, 0.25, -0.775},
      {2, 4, 1.2, -0.55, -0.65},     {5, 8, 1.125, -0.5, -0.625},
      {7, 9, 0.875, -0.3, -0.575},   {3, 6, 1.25, -0.625, -0.625},
  };
  set.yyy = {
      {1, 2, 3, 2.0, 2.5, -4.5},
      {1, 2, 4, 4.2426, 2.8284, -7.071},
      {1, 2, 9, -1.2247, 2.9393, -1.7146},
      {1, 2, 10, 2.1166, 2.9103, -5.0269},
      {1, 3, 4, 1.7321, 2.5981, -4.3302},
      {1, 5, 6, 3.8013, 4.9193, -8.7206},
      {1, 9, 10, 3.9598, -2.2627, -1.6971},
      {2, 3, 4, -2.0, 4.0, -2.0},
      {2, 5, 6, -4.5, 2.1, 2.4},
      {2, 9, 10, 1.7393, 1.4230, -3.1623},
      {3, 7, 8, 1.1608, 2.3217, -3.4825},
      {4, 7, 8, -1.7321, -2.0785, 3.8106},
      {5, 6, 7, 2.9566, 2.0912, -5.0478},
      {5, 6, 8, -2.6192, -1.4966, 4.1158},
      {5, 7, 8, 4.6476, 2.7111, -7.3587},
      {5, 6, 9, -3.0, -1.8, 4.8},
      {5, 6, 10, 1.8554, 2.2677, -4.1231},
      {6, 7, 8, 4.6669, 2.9698, -7.6367},
      {8, 9, 10, 3.923, 2.3974, -6.3204},
  };
  return set;
}

CoefficientSet builtin_projected_model() {
  return project_to_conservative(builtin_paper_model());
}

namespace {

std::string xyy_label(const XyyTriad& t) {
  std::ostringstream os;
  os << "xyy(" << t.j << ',' << t.k << ')';
  return os.str();
}

std::string yyy_label(const YyyTriad& t) {
  std::ostringstream os;
  os << "yyy(" << t.i << ',' << t.j << ',' << t.k << ')';
  return os.str();
}

bool in_range(int idx, int n) { return idx >= 1 && idx <= n; }

void check_structure(std::span<const XyyTriad> xyy, std::span<const YyyTriad> yyy,
                     int n) {
  for (const auto& t : xyy) {
    if (!in_range(t.j, n) || !in_range(t.k, n))
      throw StructuralError(xyy_label(t) + ": mode index outside [1, " +
                            std::to_string(n) + "]");
    if (t.j == t.k) throw StructuralError(xyy_label(t) + ": repeated mode index");
  }
  for (const auto& t : yyy) {
    if (!in_range(t.i, n) || !in_range(t.j, n) || !in_range(t.k, n))
      throw StructuralError(yyy_label(t) + ": mode index outside [1, " +
                            std::to_string(n) + "]");
    if (t.i == t.j || t.j == t.k || t.i == t.k)
      throw StructuralError(yyy_label(t) + ": repeated mode index");
  }
}

}  // namespace

ValidationReport validate_conservation(std::span<const XyyTriad> xyy,
                                       std::span<const YyyTriad> yyy, int n,
                                       double tol) {
  check_structure(xyy, yyy, n);
  ValidationReport report;
  report.tol = tol;
  auto add = [&](TriadResidual r) {
    report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r.residual));
    if (!(std::abs(r.residual) <= tol)) report.pass = false;
    report.residuals.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < xyy.size(); ++i)
    add({TriadResidual::Kind::Xyy, i, xyy_label(xyy[i]), xyy[i].residual()});
  for (std::size_t i = 0; i < yyy.size(); ++i)
    add({TriadResidual::Kind::Yyy, i, yyy_label(yyy[i]), yyy[i].residual()});
  return report;
}

ValidationReport validate_conservation(const CoefficientSet& set, double tol) {
  return validate_conservation(set.xyy, set.yyy, set.n, tol);
}

ProjectionResult project_to_conservative(std::span<const XyyTriad> xyy,
                                         std::span<const YyyTriad> yyy) {
  ProjectionResult out;
  out.xyy.assign(xyy.begin(), xyy.end());
  out.yyy.assign(yyy.begin(), yyy.end());
  auto shift = [&](double& a, double& b, double& c) {
    const double r = (a + b + c) / 3.0;
    a -= r;
    b -= r;
    // (a + b) + c then evaluates to exactly zero.
    c = -(a + b);
  };
  for (std::size_t i = 0; i < out.xyy.size(); ++i) {
    auto& t = out.xyy[i];
    shift(t.a_xyy, t.a_yxy_j, t.a_yxy_k);
    out.max_change = std::max({out.max_change, std::abs(t.a_xyy - xyy[i].a_xyy),
                               std::abs(t.a_yxy_j - xyy[i].a_yxy_j),
                               std::abs(t.a_yxy_k - xyy[i].a_yxy_k)});
  }
  for (std::size_t i = 0; i < out.yyy.size(); ++i) {
    auto& t = out.yyy[i];
    shift(t.b_ijk, t.b_jki, t.b_kij);
    out.max_change = std::max({out.max_change, std::abs(t.b_ijk - yyy[i].b_ijk),
                               std::abs(t.b_jki - yyy[i].b_jki),
                               std::abs(t.b_kij - yyy[i].b_kij)});
  }
  return out;
}

CoefficientSet project_to_conservative(const CoefficientSet& set) {
  auto projected = project_to_conservative(set.xyy, set.yyy);
  CoefficientSet out = set;
  out.xyy = std::move(projected.xyy);
  out.yyy = std::move(projected.yyy);
  return out;
}

DriftParts full_drift_parts(const SystemState& state, const ModelParams& params,
                            std::span<const XyyTriad> xyy,
                            std::span<const YyyTriad> yyy) {
  if (state.y.size() != static_cast<std::size_t>(params.n))
    throw StructuralError("state has " + std::to_string(state.y.size()) +
                          " fast modes, model expects " + std::to_string(params.n));
  check_structure(xyy, yyy, params.n);
  const auto& y = state.y;
  const double inv_eps = 1.0 / params.epsilon;
  const double inv_eps2 = inv_eps * inv_eps;
  DriftParts parts;
  parts.y_coupling.assign(y.size(), 0.0);
  parts.y_bath.assign(y.size(), 0.0);
  for (const auto& t : xyy) {
    const auto j = static_cast<std::size_t>(t.j - 1);
    const auto k = static_cast<std::size_t>(t.k - 1);
    parts.x_coupling += inv_eps * t.a_xyy * y[j] * y[k];
    parts.y_coupling[j] += inv_eps * t.a_yxy_j * state.x * y[k];
    parts.y_coupling[k] += inv_eps * t.a_yxy_k * state.x * y[j];
  }
  for (const auto& t : yyy) {
    const auto i = static_cast<std::size_t>(t.i - 1);
    const auto j = static_cast<std::size_t>(t.j - 1);
    const auto k = static_cast<std::size_t>(t.k - 1);
    parts.y_bath[i] += inv_eps2 * t.b_ijk * y[j] * y[k];
    parts.y_bath[j] += inv_eps2 * t.b_jki * y[k] * y[i];
    parts.y_bath[k] += inv_eps2 * t.b_kij * y[i] * y[j];
  }
  return parts;
}

FullDrift full_drift(const SystemState& state, const ModelParams& params,
                     std::span<const XyyTriad> xyy, std::span<const YyyTriad> yyy) {
  auto parts = full_drift_parts(state, params, xyy, yyy);
  FullDrift d;
  d.dx = parts.x_coupling - params.gamma * state.x;
  d.dy.resize(parts.y_bath.size());
  for (std::size_t i = 0; i < d.dy.size(); ++i)
    d.dy[i] = parts.y_coupling[i] + parts.y_bath[i];
  return d;
}

TriadSystem::TriadSystem(const CoefficientSet& set, double epsilon)
    : params_(set.params(epsilon)), n_(set.n) {
  params_.validate();
  check_structure(set.xyy, set.yyy, set.n);
  xyy_.reserve(set.xyy.size());
  for (const auto& t : set.xyy)
    xyy_.push_back({static_cast<std::size_t>(t.j - 1), static_cast<std::size_t>(t.k - 1),
                    t.a_xyy, t.a_yxy_j, t.a_yxy_k});
  yyy_.reserve(set.yyy.size());
  for (const auto& t : set.yyy)
    yyy_.push_back({static_cast<std::size_t>(t.i - 1), static_cast<std::size_t>(t.j - 1),
                    static_cast<std::size_t>(t.k - 1), t.b_ijk, t.b_jki, t.b_kij});
}

void TriadSystem::drift(std::span<const double> z, std::span<double> dz) const {
  const double x = z[0];
  const double* y = z.data() + 1;
  double* dy = dz.data() + 1;
  const double inv_eps = 1.0 / params_.epsilon;
  const double inv_eps2 = inv_eps * inv_eps;
  std::fill(dz.begin(), dz.end(), 0.0);

  double fx = 0.0;
  const double cx = inv_eps * x;
  for (const auto& r : xyy_) {
    fx += r.a * y[r.j] * y[r.k];
    dy[r.j] += cx * r.aj * y[r.k];
    dy[r.k] += cx * r.ak * y[r.j];
  }
  dz[0] = inv_eps * fx - params_.gamma * x;
  for (const auto& r : yyy_) {
    dy[r.i] += inv_eps2 * r.bi * y[r.j] * y[r.k];
    dy[r.j] += inv_eps2 * r.bj * y[r.k] * y[r.i];
    dy[r.k] += inv_eps2 * r.bk * y[r.i] * y[r.j];
  }
}

void TriadSystem::bath_drift(std::span<const double> y, std::span<double> dy) const {
  std::fill(dy.begin(), dy.end(), 0.0);
  for (const auto& r : yyy_) {
    dy[r.i] += r.bi * y[r.j] * y[r.k];
    dy[r.j] += r.bj * y[r.k] * y[r.i];
    dy[r.k] += r.bk * y[r.i] * y[r.j];
  }
}

double TriadSystem::forcing(std::span<const double> y) const {
  double f = 0.0;
  for (const auto& r : xyy_) f += r.a * y[r.j] * y[r.k];
  return f;
}

double TriadSystem::energy_rate(std::span<const double> z) const {
  return -2.0 / params_.epsilon * z[0] * forcing(z.subspan(1));
}

}  // namespace smr
