#pragma once

// Microcanonical machinery for the deterministic fast sub-system
//   dy_i/dt = sum over yyy rows of b y_j y_k,
// which conserves E = sum y_k^2 when every row sums to zero.
//
// The bath constant M is the area under the autocovariance of the forcing
// f(y) = sum_xyy a_xyy y_j y_k on the shell E = n. Under y -> sqrt(E/n) y*,
// t -> sqrt(n/E) t* the bath maps onto itself, so the raw area at level E is
// Q(E) = (E/n)^{3/2} M.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smr/integrate.hpp"
#include "smr/model.hpp"

namespace smr {

struct SphereSample {
  std::vector<double> y;
  double energy_target = 0.0;
};

/// y = sqrt(E) g/|g| with g standard normal: uniform on the sphere |y|^2 = E.
SphereSample sample_uniform_sphere(int n, double energy_target, RngStream& rng);

/// Relative drift above which the bath state is rescaled back onto its shell.
inline constexpr double kRenormalizeThreshold = 1e-10;

/// Bath dynamics as a trajectory model. Records y_1..y_n.
class FastBathModel {
 public:
  FastBathModel(const TriadSystem& system, double target_energy, bool renormalize);

  std::size_t dimension() const { return static_cast<std::size_t>(system_.n()); }
  void drift(std::span<const double> y, std::span<double> dy) const {
    system_.bath_drift(y, dy);
  }
  void apply_noise(std::span<double>, double, RngStream&) {}
  void post_step(std::span<double> y);
  std::vector<std::string> record_names() const;
  void record(std::span<const double> y, std::span<double> out) const;

  double max_relative_drift() const { return max_drift_; }
  std::int64_t renormalizations() const { return renormalizations_; }

 private:
  const TriadSystem& system_;
  double target_;
  bool renormalize_;
  double max_drift_ = 0.0;
  std::int64_t renormalizations_ = 0;
};

struct FastRunOptions {
  double dt = 1e-3;
  double T = 100.0;
  int record_stride = 1;
  bool renormalize = true;
  /// Run fails if the relative energy drift ever exceeds this.
  double drift_tolerance = 1e-8;
};

struct FastRun {
  TimeSeries series;
  double max_relative_drift = 0.0;
  std::int64_t renormalizations = 0;
};

/// Deterministic RK5 run of the bath from `init`. Throws IntegrationError if
/// the energy drifts beyond opts.drift_tolerance (advising a smaller dt).
FastRun run_fast_subsystem(std::span<const YyyTriad> yyy, int n, const SphereSample& init,
                           const FastRunOptions& opts);

struct CompatibilityReport {
  int n = 0;
  std::vector<double> first_moments;    // <y_j>
  std::vector<double> first_stderr;
  std::vector<double> mixed_moments;    // <y_j y_k>, n x n row-major, diagonal unused
  std::vector<double> mixed_stderr;
  double tol = 0.0;
  double max_abs_first = 0.0;
  double max_abs_mixed = 0.0;
  std::vector<std::string> failures;
  bool pass = true;
};

/// Time averages of y_j and y_j y_k (j != k) with 20-block standard errors.
/// Each passes if |avg| <= max(tol, 4 stderr). Needs at least 200 samples.
CompatibilityReport check_compatibility(const TimeSeries& run, double tol,
                                        int n_blocks = 20);

struct EstimateMOptions {
  /// Energy shell of the run; 0 selects E = n.
  double energy_level = 0.0;
  double dt = 1e-3;
  double T = 10000.0;
  /// Discarded before any averaging.
  double burn_in = 10.0;
  /// Steps between forcing samples; also the lag spacing of C(tau).
  int origin_stride = 10;
  /// Cutoff: first tau with |C| < cutoff_fraction |C(0)| over cutoff_window
  /// consecutive lags, never beyond tau_cap.
  double cutoff_fraction = 0.002;
  int cutoff_window = 50;
  double tau_cap = 20.0;
  /// If set, integrate to exactly this tau instead of searching.
  std::optional<double> tau_fixed;
  int n_blocks = 20;
  /// Independent runs from fresh sphere draws, each of length T. With more
  /// than one, C(tau) is their average and standard errors come from the
  /// spread between runs instead of blocks.
  int n_runs = 1;
  bool renormalize = true;
  /// Uniform-sphere draws for the static-moment cross-check (0 disables it).
  int sphere_samples = 100000;
  std::uint64_t seed = 1;
  std::uint64_t stream_id = 0;
};

/// Stream-id layout: run r of level i uses stream_id + i * kLevelStreamSpacing
/// + r * kRunStreamSpacing; the sphere cross-check uses kSphereStreamOffset.
inline constexpr std::uint64_t kRunStreamSpacing = 1;
inline constexpr std::uint64_t kLevelStreamSpacing = 0x10000;
inline constexpr std::uint64_t kSphereStreamOffset = 0x5eed0000;

struct BathStatistics {
  int n = 0;
  double energy_level = 0.0;
  /// Raw area at energy_level and its block standard error.
  double Q = 0.0;
  double stderr_Q = 0.0;
  /// Q compensated to the E = n shell.
  double M = 0.0;
  double stderr_M = 0.0;

  std::vector<double> tau;
  std::vector<double> C;
  double tau_max = 0.0;
  bool decayed = true;
  double tail_estimate = 0.0;

  std::vector<double> first_moments;
  std::vector<double> mixed_moments;  // n x n row-major
  double max_abs_mixed_moment = 0.0;

  /// C(0) from the run versus the uniform-sphere ensemble average of f^2.
  double static_moment_time = 0.0;
  double static_moment_sphere = 0.0;
  double static_moment_sphere_stderr = 0.0;

  double max_relative_drift = 0.0;
  std::int64_t renormalizations = 0;
  std::vector<std::string> warnings;
};

/// Microcanonical run(s), shifted-origin lag products of the forcing,
/// trapezoid area up to the cutoff, then M = Q (n/E)^{3/2}.
BathStatistics estimate_M(const CoefficientSet& set, const EstimateMOptions& opts);

/// C(tau) cutoff used by estimate_M: index of the first lag whose next
/// `window` values all satisfy |C| < fraction |C(0)|, or nullopt.
std::optional<std::size_t> find_cutoff(std::span<const double> C, double fraction, int window);

struct RescalingLevel {
  double energy_level = 0.0;
  double Q = 0.0;
  double stderr_Q = 0.0;
  double M = 0.0;
  double stderr_M = 0.0;
};

struct RescalingReport {
  std::vector<RescalingLevel> levels;
  /// Q(E_last)/Q(E_first) and the predicted (E_last/E_first)^{3/2}.
  double raw_ratio = 0.0;
  double expected_ratio = 0.0;
  /// Largest |M_a - M_b| / sqrt(se_a^2 + se_b^2) over pairs.
  double max_pairwise_z = 0.0;
  double z_tolerance = 2.0;
  bool pass = true;
};

/// estimate_M at each level (independent streams). Pass iff every pair of
/// compensated estimates agrees within z_tolerance combined standard errors.
RescalingReport check_rescaling(const CoefficientSet& set, std::span<const double> levels,
                                const EstimateMOptions& opts, double z_tolerance = 2.0);

}  // namespace smr
