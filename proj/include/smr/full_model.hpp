#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "smr/integrate.hpp"
#include "smr/model.hpp"

namespace smr {

/// Full triad model as a trajectory model: z = (x, y_1..y_n), additive noise
/// sigma dW on x only. Records (x, E) and, optionally, every y_k.
class FullModel {
 public:
  FullModel(const CoefficientSet& set, double epsilon, bool record_modes = false)
      : system_(set, epsilon), record_modes_(record_modes) {}

  const TriadSystem& system() const { return system_; }
  std::size_t dimension() const { return system_.dimension(); }

  void drift(std::span<const double> z, std::span<double> dz) const { system_.drift(z, dz); }

  void apply_noise(std::span<double> z, double dt, RngStream& rng) {
    z[0] += system_.params().sigma * std::sqrt(dt) * rng.normal();
  }

  void post_step(std::span<double>) {}

  std::vector<std::string> record_names() const {
    std::vector<std::string> names{"x", "E"};
    if (record_modes_)
      for (int k = 1; k <= system_.n(); ++k) names.push_back("y" + std::to_string(k));
    return names;
  }

  void record(std::span<const double> z, std::span<double> out) const {
    out[0] = z[0];
    out[1] = fast_energy(z.subspan(1));
    if (record_modes_)
      for (std::size_t k = 1; k < z.size(); ++k) out[k + 1] = z[k];
  }

  /// x ~ N(0, s) and y_k ~ N(0, s) with s = sigma^2/(2 gamma): a draw from
  /// the stationary product law, so E(0) follows the chi-squared law.
  std::vector<double> stationary_initial_state(RngStream& rng) const {
    const double sd = std::sqrt(system_.params().stationary_variance());
    std::vector<double> z(dimension());
    for (auto& v : z) v = sd * rng.normal();
    return z;
  }

 private:
  TriadSystem system_;
  bool record_modes_;
};

}  // namespace smr
