#pragma once

// Stationary and two-point statistics of sampled trajectories.
//
// All estimators take a uniformly sampled series and its sampling interval.
// Standard errors come from non-overlapping block averages (20 blocks by
// default): each block supplies the origins t, partners t + tau may fall
// anywhere in the series.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smr/errors.hpp"

namespace smr {

inline constexpr int kDefaultBlocks = 20;

struct CorrelationCurve {
  std::vector<double> lags;
  std::vector<double> values;  // CF(tau) / CF(0)
  std::vector<double> std_err;
  double mean = 0.0;
  double variance = 0.0;  // raw lag-0 covariance used for normalisation
};

/// Biased (1/N) centred lag-product estimator, normalised so CF(0) = 1.
/// Requires the series to span at least 5 max_lag; throws DomainError for
/// a zero-variance series.
CorrelationCurve correlation_function(std::span<const double> z, double dt_sample,
                                      double max_lag, int n_blocks = kDefaultBlocks);

enum class CtConvention { Area, InverseArea };

struct CorrelationTime {
  double value = 0.0;  // per the chosen convention
  double area = 0.0;   // integral of CF up to tau_star
  double tau_star = 0.0;
  bool decayed = true;  // CF dropped below threshold before max_lag
};

/// Trapezoid area of CF from 0 to the first lag where CF < threshold (or to
/// the end of the curve, flagged as not decayed).
CorrelationTime correlation_time(const CorrelationCurve& curve,
                                 CtConvention convention = CtConvention::Area,
                                 double threshold = 0.01);

struct KurtosisCurve {
  std::vector<double> lags;
  std::vector<double> values;
  std::vector<double> std_err;
};

/// K(tau) = E[z^2(t+tau) z^2(t)] / ((E z^2)^2 + 2 (E z(t) z(t+tau))^2) on the
/// mean-removed series. Identically 1 for a stationary Gaussian process.
KurtosisCurve lagged_kurtosis(std::span<const double> z, double dt_sample, double max_lag,
                              int n_blocks = kDefaultBlocks);

struct DensityEstimate {
  std::vector<double> edges;    // n_bins + 1
  std::vector<double> density;  // n_bins
  std::size_t count = 0;        // samples inside the range
  std::size_t outside = 0;      // samples outside the range

  std::vector<double> centers() const;
  double width(std::size_t bin) const { return edges[bin + 1] - edges[bin]; }
};

/// Normalised histogram over [lo, hi]. Samples outside are counted but
/// excluded from the normalisation. Throws on an empty series.
DensityEstimate empirical_density(std::span<const double> z, int n_bins, double lo, double hi);

/// Range taken from the data (padded by 0.5 when all samples coincide).
DensityEstimate empirical_density(std::span<const double> z, int n_bins);

/// L1 distance between a histogram and a reference law given by its CDF:
/// sum |p_i w_i - (F(b_i+1) - F(b_i))| plus the reference mass outside the range.
double l1_distance(const DensityEstimate& d, const std::function<double(double)>& cdf);

/// N(0, sigma^2/(2 gamma)).
struct GaussianDensity {
  double variance = 1.0;
  double operator()(double x) const;
  double cdf(double x) const;
};

GaussianDensity analytic_density_x(double gamma, double sigma);

/// rho(s) = C s^{(n-2)/2} exp(-s gamma/sigma^2), C = (gamma/sigma^2)^{n/2} / Gamma(n/2).
struct EnergyDensity {
  double rate = 1.0;   // gamma / sigma^2
  double shape = 1.0;  // n / 2
  double operator()(double s) const;
  double cdf(double s) const;
  double mean() const { return shape / rate; }
  double mode() const { return (shape - 1.0) / rate; }
};

EnergyDensity analytic_density_E(double gamma, double sigma, int n);

struct EnsembleStat {
  std::vector<double> mean;
  /// Standard error across runs; absent for a single run.
  std::optional<std::vector<double>> std_err;
};

/// Pointwise mean and standard error across runs. Throws PreconditionError
/// when the inputs differ in length.
EnsembleStat ensemble_average(std::span<const std::vector<double>> runs);

/// Merges curves after checking that they share one lag grid.
EnsembleStat ensemble_average(std::span<const CorrelationCurve> curves);
EnsembleStat ensemble_average(std::span<const KurtosisCurve> curves);

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double stderr_mean = 0.0;
  double stderr_variance = 0.0;
  double stderr_skewness = 0.0;
};

/// Sample moments with block standard errors.
MomentSummary moments(std::span<const double> z, int n_blocks = kDefaultBlocks);

/// Samples to drop before stationary statistics: max(10 ct_guess, 1% of the run),
/// never more than half the run.
std::size_t transient_samples(std::size_t n_samples, double dt_sample, double ct_guess);

}  // namespace smr
