#include "smr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

namespace smr {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(std::span<const double> blocks) {
  const std::size_t nb = blocks.size();
  if (nb < 2) return 0.0;
  const double m = mean_of(blocks);
  double ss = 0.0;
  for (double b : blocks) ss += (b - m) * (b - m);
  return std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
}

std::size_t lag_count(std::size_t n, double dt_sample, double max_lag) {
  if (!(dt_sample > 0.0)) throw PreconditionError("sampling interval must be positive");
  if (!(max_lag >= 0.0)) throw PreconditionError("max_lag must be non-negative");
  const auto L = static_cast<std::size_t>(std::floor(max_lag / dt_sample + 1e-9));
  if (static_cast<double>(n) * dt_sample < 5.0 * max_lag)
    throw PreconditionError("series too short: need at least 5 max_lag of data");
  return L;
}

// Block b holds origins [lo_b, hi_b) with hi_b clipped so that i + lag < N.
struct BlockRange {
  std::size_t lo, hi;
};

BlockRange block_range(std::size_t b, std::size_t nb, std::size_t N, std::size_t lag) {
  const std::size_t lo = b * N / nb;
  const std::size_t hi = std::min((b + 1) * N / nb, N - lag);
  return {lo, std::max(lo, hi)};
}

}  // namespace

CorrelationCurve correlation_function(std::span<const double> z, double dt_sample,
                                      double max_lag, int n_blocks) {
  const std::size_t N = z.size();
  if (N < 2) throw PreconditionError("series too short");
  const std::size_t L = lag_count(N, dt_sample, max_lag);
  const auto nb = static_cast<std::size_t>(std::max(n_blocks, 2));

  CorrelationCurve c;
  c.mean = mean_of(z);
  std::vector<double> d(z.begin(), z.end());
  for (auto& v : d) v -= c.mean;
  double c0 = 0.0;
  for (double v : d) c0 += v * v;
  c0 /= static_cast<double>(N);
  if (!(c0 > 0.0)) throw DomainError("zero variance: cannot normalise correlation function");
  c.variance = c0;

  c.lags.resize(L + 1);
  c.values.resize(L + 1);
  c.std_err.resize(L + 1);
  std::vector<double> blocks(nb);
  for (std::size_t l = 0; l <= L; ++l) {
    double total = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto r = block_range(b, nb, N, l);
      double s = 0.0;
      for (std::size_t i = r.lo; i < r.hi; ++i) s += d[i] * d[i + l];
      total += s;
      blocks[b] = r.hi > r.lo ? s / static_cast<double>(r.hi - r.lo) / c0 : 0.0;
    }
    c.lags[l] = static_cast<double>(l) * dt_sample;
    c.values[l] = total / static_cast<double>(N) / c0;
    c.std_err[l] = stderr_of(blocks);
  }
  c.values[0] = 1.0;
  return c;
}

CorrelationTime correlation_time(const CorrelationCurve& curve, CtConvention convention,
                                 double threshold) {
  if (curve.values.size() < 2) throw PreconditionError("correlation curve needs two lags");
  CorrelationTime ct;
  std::size_t stop = curve.values.size() - 1;
  ct.decayed = false;
  for (std::size_t l = 1; l < curve.values.size(); ++l) {
    if (curve.values[l] < threshold) {
      stop = l;
      ct.decayed = true;
      break;
    }
  }
  double a = 0.0;
  for (std::size_t l = 1; l <= stop; ++l)
    a += 0.5 * (curve.values[l - 1] + curve.values[l]) * (curve.lags[l] - curve.lags[l - 1]);
  ct.area = a;
  ct.tau_star = curve.lags[stop];
  ct.value = convention == CtConvention::Area ? a : 1.0 / a;
  return ct;
}

KurtosisCurve lagged_kurtosis(std::span<const double> z, double dt_sample, double max_lag,
                              int n_blocks) {
  const std::size_t N = z.size();
  if (N < 2) throw PreconditionError("series too short");
  const std::size_t L = lag_count(N, dt_sample, max_lag);
  const auto nb = static_cast<std::size_t>(std::max(n_blocks, 2));

  const double m = mean_of(z);
  std::vector<double> d(z.begin(), z.end());
  std::vector<double> d2(N);
  double m2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    d[i] -= m;
    d2[i] = d[i] * d[i];
    m2 += d2[i];
  }
  m2 /= static_cast<double>(N);

  KurtosisCurve k;
  k.lags.resize(L + 1);
  k.values.resize(L + 1);
  k.std_err.resize(L + 1);
  std::vector<double> blocks(nb);
  for (std::size_t l = 0; l <= L; ++l) {
    double num = 0.0, cross = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto r = block_range(b, nb, N, l);
      double sn = 0.0, sc = 0.0;
      for (std::size_t i = r.lo; i < r.hi; ++i) {
        sn += d2[i] * d2[i + l];
        sc += d[i] * d[i + l];
      }
      num += sn;
      cross += sc;
      const double cnt = static_cast<double>(r.hi - r.lo);
      const double den_b = cnt > 0 ? m2 * m2 + 2.0 * (sc / cnt) * (sc / cnt) : 0.0;
      blocks[b] = den_b > 0.0 ? (sn / cnt) / den_b : 0.0;
    }
    const double cnt = static_cast<double>(N - l);
    const double c = cross / cnt;
    const double den = m2 * m2 + 2.0 * c * c;
    if (!(den > 0.0)) throw DomainError("zero denominator in lagged kurtosis");
    k.lags[l] = static_cast<double>(l) * dt_sample;
    k.values[l] = num / cnt / den;
    k.std_err[l] = stderr_of(blocks);
  }
  return k;
}

std::vector<double> DensityEstimate::centers() const {
  std::vector<double> c(density.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (edges[i] + edges[i + 1]);
  return c;
}

DensityEstimate empirical_density(std::span<const double> z, int n_bins, double lo, double hi) {
  if (z.empty()) throw PreconditionError("empty series");
  if (n_bins < 2) throw PreconditionError("need at least two bins");
  if (!(hi > lo)) throw PreconditionError("density range must have hi > lo");
  DensityEstimate d;
  const auto nb = static_cast<std::size_t>(n_bins);
  d.edges.resize(nb + 1);
  const double w = (hi - lo) / static_cast<double>(nb);
  for (std::size_t i = 0; i <= nb; ++i) d.edges[i] = lo + w * static_cast<double>(i);
  d.edges[nb] = hi;
  std::vector<std::size_t> counts(nb, 0);
  for (double v : z) {
    if (v < lo || v > hi || !std::isfinite(v)) {
      ++d.outside;
      continue;
    }
    auto bin = static_cast<std::size_t>((v - lo) / w);
    if (bin >= nb) bin = nb - 1;
    ++counts[bin];
    ++d.count;
  }
  d.density.assign(nb, 0.0);
  if (d.count == 0) return d;
  for (std::size_t i = 0; i < nb; ++i)
    d.density[i] = static_cast<double>(counts[i]) / static_cast<double>(d.count) / d.width(i);
  return d;
}

DensityEstimate empirical_density(std::span<const double> z, int n_bins) {
  if (z.empty()) throw PreconditionError("empty series");
  auto [mn, mx] = std::minmax_element(z.begin(), z.end());
  double lo = *mn, hi = *mx;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  return empirical_density(z, n_bins, lo, hi);
}

double l1_distance(const DensityEstimate& d, const std::function<double(double)>& cdf) {
  double dist = 0.0;
  for (std::size_t i = 0; i < d.density.size(); ++i) {
    const double ref = cdf(d.edges[i + 1]) - cdf(d.edges[i]);
    dist += std::abs(d.density[i] * d.width(i) - ref);
  }
  dist += cdf(d.edges.front()) + (1.0 - cdf(d.edges.back()));
  return dist;
}

double GaussianDensity::operator()(double x) const {
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double GaussianDensity::cdf(double x) const {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

GaussianDensity analytic_density_x(double gamma, double sigma) {
  if (!(gamma > 0.0) || !(sigma > 0.0)) throw DomainError("gamma and sigma must be positive");
  return {sigma * sigma / (2.0 * gamma)};
}

double EnergyDensity::operator()(double s) const {
  if (s < 0.0) return 0.0;
  if (s == 0.0) return shape == 1.0 ? rate : (shape < 1.0 ? INFINITY : 0.0);
  return std::exp(shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(s) -
                  rate * s);
}

double EnergyDensity::cdf(double s) const {
  if (s <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, rate * s);
}

EnergyDensity analytic_density_E(double gamma, double sigma, int n) {
  if (n < 2) throw DomainError("need at least two fast modes");
  if (!(gamma > 0.0) || !(sigma > 0.0)) throw DomainError("gamma and sigma must be positive");
  return {gamma / (sigma * sigma), 0.5 * n};
}

EnsembleStat ensemble_average(std::span<const std::vector<double>> runs) {
  if (runs.empty()) throw PreconditionError("no runs to average");
  const std::size_t L = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != L) throw PreconditionError("ensemble grid mismatch");
  EnsembleStat out;
  out.mean.assign(L, 0.0);
  const double K = static_cast<double>(runs.size());
  for (const auto& r : runs)
    for (std::size_t i = 0; i < L; ++i) out.mean[i] += r[i] / K;
  if (runs.size() > 1) {
    std::vector<double> se(L, 0.0);
    for (const auto& r : runs)
      for (std::size_t i = 0; i < L; ++i) se[i] += (r[i] - out.mean[i]) * (r[i] - out.mean[i]);
    for (auto& v : se) v = std::sqrt(v / (K - 1.0) / K);
    out.std_err = std::move(se);
  }
  return out;
}

namespace {

template <class Curve>
EnsembleStat average_curves(std::span<const Curve> curves) {
  if (curves.empty()) throw PreconditionError("no curves to average");
  std::vector<std::vector<double>> vals;
  for (const auto& c : curves) {
    if (c.lags.size() != curves.front().lags.size())
      throw PreconditionError("ensemble grid mismatch");
    for (std::size_t i = 0; i < c.lags.size(); ++i)
      if (std::abs(c.lags[i] - curves.front().lags[i]) > 1e-9 * (1.0 + std::abs(c.lags[i])))
        throw PreconditionError("ensemble grid mismatch");
    vals.push_back(c.values);
  }
  return ensemble_average(std::span<const std::vector<double>>(vals));
}

}  // namespace

EnsembleStat ensemble_average(std::span<const CorrelationCurve> curves) {
  return average_curves(curves);
}

EnsembleStat ensemble_average(std::span<const KurtosisCurve> curves) {
  return average_curves(curves);
}

MomentSummary moments(std::span<const double> z, int n_blocks) {
  if (z.size() < 2) throw PreconditionError("series too short");
  const auto nb = static_cast<std::size_t>(std::max(n_blocks, 2));
  const std::size_t N = z.size();
  auto summarize = [](std::span<const double> v, double& mean, double& var, double& skew) {
    mean = mean_of(v);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
      const double d = x - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    var = m2;
    skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  };
  MomentSummary s;
  summarize(z, s.mean, s.variance, s.skewness);
  if (N >= nb * 2) {
    std::vector<double> bm(nb), bv(nb), bs(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * N / nb, hi = (b + 1) * N / nb;
      summarize(z.subspan(lo, hi - lo), bm[b], bv[b], bs[b]);
    }
    s.stderr_mean = stderr_of(bm);
    s.stderr_variance = stderr_of(bv);
    s.stderr_skewness = stderr_of(bs);
  }
  return s;
}

std::size_t transient_samples(std::size_t n_samples, double dt_sample, double ct_guess) {
  const double by_ct = 10.0 * ct_guess / dt_sample;
  const double by_frac = 0.01 * static_cast<double>(n_samples);
  return std::min(n_samples / 2, static_cast<std::size_t>(std::ceil(std::max(by_ct, by_frac))));
}

}  // namespace smr
