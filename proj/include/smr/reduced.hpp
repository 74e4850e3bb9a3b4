#pragma once

// Reduced SDE for the slow pair (x, E):
//
//   dx = -gamma x dt - (n+1) M x E^{1/2}/n^{3/2} dt + sigma dW1 + sqrt(2M) (E/n)^{3/4} dW2
//   dE = -2M (E/n)^{3/2} dt + 2(n+1) M x^2 E^{1/2}/n^{3/2} dt - 2x sqrt(2M) (E/n)^{3/4} dW2
//
// One W2 draw drives both rows, so the E increment from W2 is always -2x
// times the x increment from W2. The product of N(0, sigma^2/(2 gamma)) in x
// and the chi-squared law with n degrees of freedom in E is stationary.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smr/integrate.hpp"

namespace smr {

struct ReducedParams {
  double gamma = 1.0;
  double sigma = 1.0;
  int n = 2;
  double M = 0.0;

  void validate() const;
};

struct ReducedState {
  double x = 0.0;
  double E = 0.0;
  double t = 0.0;
};

struct ReducedDrift {
  double x = 0.0;
  double E = 0.0;
};

/// Throws DomainError for E < 0.
ReducedDrift reduced_drift(const ReducedState& s, const ReducedParams& p);

/// Rows (x, E), columns (W1, W2):
///   [[sigma, sqrt(2M)(E/n)^{3/4}], [0, -2x sqrt(2M)(E/n)^{3/4}]]
using Matrix2 = std::array<std::array<double, 2>, 2>;
Matrix2 reduced_diffusion(const ReducedState& s, const ReducedParams& p);

/// What to do when a noise increment pushes E below zero.
enum class EFloorPolicy { Clamp, Reflect, Reject };

std::string to_string(EFloorPolicy p);
EFloorPolicy e_floor_policy_from_string(const std::string& s);

/// Euler noise increment D(state) (sqrt(dt) xi1, sqrt(dt) xi2), split by source.
struct NoiseIncrement {
  double x_w1 = 0.0;
  double x_w2 = 0.0;
  double E_w2 = 0.0;
};

NoiseIncrement reduced_noise_increment(const ReducedState& s, const ReducedParams& p, double dt,
                                       double xi1, double xi2);

/// Reduced model as a trajectory model: z = (x, E), records (x, E).
class ReducedModel {
 public:
  ReducedModel(const ReducedParams& params, EFloorPolicy policy = EFloorPolicy::Clamp);

  const ReducedParams& params() const { return p_; }
  std::size_t dimension() const { return 2; }

  /// Powers of E are evaluated at max(E, 0), so intermediate RK stages never fault.
  void drift(std::span<const double> z, std::span<double> dz) const;
  void apply_noise(std::span<double> z, double dt, RngStream& rng);
  void post_step(std::span<double>) {}
  std::vector<std::string> record_names() const { return {"x", "E"}; }
  void record(std::span<const double> z, std::span<double> out) const {
    out[0] = z[0];
    out[1] = z[1];
  }

  /// Number of steps whose noise increment drove E negative.
  std::int64_t floor_events() const { return floor_events_; }
  std::int64_t steps() const { return steps_; }

  /// Stationary draw: x ~ N(0, s), E = sum of n squared N(0, s) variables.
  std::vector<double> stationary_initial_state(RngStream& rng) const;

 private:
  ReducedParams p_;
  EFloorPolicy policy_;
  double c_;      // M / n^{3/2}
  double amp_;    // sqrt(2M)
  std::int64_t floor_events_ = 0;
  std::int64_t steps_ = 0;
};

/// One split step: RK5 on the drift, Euler noise with a shared W2 draw, then
/// the E-floor policy. Throws IntegrationError on a non-finite result.
ReducedState step_reduced(const ReducedState& s, const ReducedParams& p, double dt,
                          RngStream& rng, EFloorPolicy policy = EFloorPolicy::Clamp);

}  // namespace smr
