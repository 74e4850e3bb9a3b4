#include "smr/reduced.hpp"

#include <cmath>

namespace smr {

void ReducedParams::validate() const {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(sigma >= 0.0)) throw DomainError("sigma must be non-negative");
  if (n < 2) throw DomainError("need at least two fast modes");
  if (!(M >= 0.0)) throw DomainError("bath constant M must be non-negative");
}

namespace {

void require_energy(double E) {
  if (!(E >= 0.0)) throw DomainError("bath energy must be non-negative, got " + std::to_string(E));
}

double n32(int n) { return std::pow(static_cast<double>(n), 1.5); }

}  // namespace

ReducedDrift reduced_drift(const ReducedState& s, const ReducedParams& p) {
  require_energy(s.E);
  const double c = p.M / n32(p.n);
  const double sqrtE = std::sqrt(s.E);
  ReducedDrift d;
  d.x = -p.gamma * s.x - (p.n + 1) * c * s.x * sqrtE;
  d.E = -2.0 * c * s.E * sqrtE + 2.0 * (p.n + 1) * c * s.x * s.x * sqrtE;
  return d;
}

Matrix2 reduced_diffusion(const ReducedState& s, const ReducedParams& p) {
  require_energy(s.E);
  const double r = s.E / p.n;
  const double w2 = std::sqrt(2.0 * p.M) * std::pow(r, 0.75);
  return {{{p.sigma, w2}, {0.0, -2.0 * s.x * w2}}};
}

std::string to_string(EFloorPolicy p) {
  switch (p) {
    case EFloorPolicy::Clamp: return "clamp";
    case EFloorPolicy::Reflect: return "reflect";
    case EFloorPolicy::Reject: return "reject";
  }
  return "clamp";
}

EFloorPolicy e_floor_policy_from_string(const std::string& s) {
  if (s == "clamp") return EFloorPolicy::Clamp;
  if (s == "reflect") return EFloorPolicy::Reflect;
  if (s == "reject") return EFloorPolicy::Reject;
  throw ParseError("unknown E-floor policy '" + s + "'");
}

NoiseIncrement reduced_noise_increment(const ReducedState& s, const ReducedParams& p, double dt,
                                       double xi1, double xi2) {
  const auto D = reduced_diffusion(s, p);
  const double sq = std::sqrt(dt);
  return {D[0][0] * sq * xi1, D[0][1] * sq * xi2, D[1][1] * sq * xi2};
}

ReducedModel::ReducedModel(const ReducedParams& params, EFloorPolicy policy)
    : p_(params), policy_(policy) {
  p_.validate();
  c_ = p_.M / n32(p_.n);
  amp_ = std::sqrt(2.0 * p_.M);
}

void ReducedModel::drift(std::span<const double> z, std::span<double> dz) const {
  const double x = z[0];
  const double E = std::max(z[1], 0.0);
  const double sqrtE = std::sqrt(E);
  dz[0] = -p_.gamma * x - (p_.n + 1) * c_ * x * sqrtE;
  dz[1] = -2.0 * c_ * E * sqrtE + 2.0 * (p_.n + 1) * c_ * x * x * sqrtE;
}

void ReducedModel::apply_noise(std::span<double> z, double dt, RngStream& rng) {
  ++steps_;
  const double x = z[0];
  const double E = std::max(z[1], 0.0);
  const double r = E / p_.n;
  const double w2amp = amp_ * std::sqrt(r * std::sqrt(r));  // (E/n)^{3/4}
  const double sq = std::sqrt(dt);
  const double xi1 = rng.normal();
  double xi2 = rng.normal();

  double dE = -2.0 * x * w2amp * sq * xi2;
  if (E + dE < 0.0) {
    ++floor_events_;
    if (policy_ == EFloorPolicy::Reject) {
      for (int tries = 0; tries < 100 && E + dE < 0.0; ++tries) {
        xi2 = rng.normal();
        dE = -2.0 * x * w2amp * sq * xi2;
      }
    }
  }
  z[0] = x + p_.sigma * sq * xi1 + w2amp * sq * xi2;
  z[1] = E + dE;
  if (z[1] < 0.0) z[1] = policy_ == EFloorPolicy::Reflect ? -z[1] : 0.0;
}

std::vector<double> ReducedModel::stationary_initial_state(RngStream& rng) const {
  const double sd = p_.sigma / std::sqrt(2.0 * p_.gamma);
  std::vector<double> z(2);
  z[0] = sd * rng.normal();
  double E = 0.0;
  for (int k = 0; k < p_.n; ++k) {
    const double y = sd * rng.normal();
    E += y * y;
  }
  z[1] = E;
  return z;
}

ReducedState step_reduced(const ReducedState& s, const ReducedParams& p, double dt,
                          RngStream& rng, EFloorPolicy policy) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  require_energy(s.E);
  ReducedModel model(p, policy);
  std::vector<double> z{s.x, s.E};
  Rk5Stepper stepper(2);
  auto drift = [&model](std::span<const double> a, std::span<double> b) { model.drift(a, b); };
  stepper.step(drift, std::span<double>(z), dt);
  model.apply_noise(z, dt, rng);
  check_state(z, s.t + dt);
  return {z[0], z[1], s.t + dt};
}

}  // namespace smr
