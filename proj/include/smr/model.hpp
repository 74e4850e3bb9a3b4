#pragma once

// Triad model: coefficient tables, conservation checks and the full drift.
//
// The slow variable x couples to the fast vector y through xyy-triads, and
// the fast modes interact among themselves through yyy-triads. Each table
// row is exactly one summand of the corresponding sum. Mode indices are
// 1-based in all public types and converted to 0-based internally.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smr/errors.hpp"

namespace smr {

/// One row of the x-y coupling table.
///  a_xyy   multiplies y_j y_k in the x equation
///  a_yxy_j multiplies x y_k   in the y_j equation
///  a_yxy_k multiplies x y_j   in the y_k equation
struct XyyTriad {
  int j = 0;
  int k = 0;
  double a_xyy = 0.0;
  double a_yxy_j = 0.0;
  double a_yxy_k = 0.0;

  double residual() const { return a_xyy + a_yxy_j + a_yxy_k; }
};

/// One row of the bath table. b_ijk multiplies y_j y_k in the y_i equation,
/// and cyclically for b_jki and b_kij.
struct YyyTriad {
  int i = 0;
  int j = 0;
  int k = 0;
  double b_ijk = 0.0;
  double b_jki = 0.0;
  double b_kij = 0.0;

  double residual() const { return b_ijk + b_jki + b_kij; }
};

struct ModelParams {
  double gamma = 1.0;
  double sigma = 1.0;
  double epsilon = 1.0;
  int n = 2;

  /// Throws DomainError unless gamma, sigma, epsilon > 0 and n >= 2.
  void validate() const;
  /// Stationary variance sigma^2 / (2 gamma) shared by x and every y_k.
  double stationary_variance() const { return sigma * sigma / (2.0 * gamma); }
};

struct SystemState {
  double x = 0.0;
  std::vector<double> y;
  double t = 0.0;

  double energy() const;
};

/// Model constants and both coupling tables.
struct CoefficientSet {
  double gamma = 1.0;
  double sigma = 1.0;
  int n = 2;
  std::vector<XyyTriad> xyy;
  std::vector<YyyTriad> yyy;

  ModelParams params(double epsilon) const { return {gamma, sigma, epsilon, n}; }
};

/// gamma = 1, sigma = 2.236, n = 10 with the 10 xyy and 19 yyy triads as
/// printed (rounded to four decimals).
CoefficientSet builtin_paper_model();

/// builtin_paper_model() passed through project_to_conservative().
CoefficientSet builtin_projected_model();

struct TriadResidual {
  enum class Kind { Xyy, Yyy };
  Kind kind = Kind::Xyy;
  std::size_t index = 0;  // row in its table
  std::string label;      // e.g. "xyy(1,2)" or "yyy(1,2,3)"
  double residual = 0.0;
};

struct ValidationReport {
  std::vector<TriadResidual> residuals;
  double tol = 0.0;
  double max_abs_residual = 0.0;
  bool pass = true;
};

/// Residual of each conservation constraint. Throws StructuralError naming
/// the triad on an index outside [1, n] or a repeated mode index.
ValidationReport validate_conservation(std::span<const XyyTriad> xyy,
                                       std::span<const YyyTriad> yyy, int n,
                                       double tol);

ValidationReport validate_conservation(const CoefficientSet& set, double tol);

struct ProjectionResult {
  std::vector<XyyTriad> xyy;
  std::vector<YyyTriad> yyy;
  double max_change = 0.0;
};

/// Subtracts residual/3 from each member of every triad.
ProjectionResult project_to_conservative(std::span<const XyyTriad> xyy,
                                         std::span<const YyyTriad> yyy);

CoefficientSet project_to_conservative(const CoefficientSet& set);

double fast_energy(std::span<const double> y);

struct FullDrift {
  double dx = 0.0;
  std::vector<double> dy;
};

/// Interaction terms separated by origin, for conservation checks.
struct DriftParts {
  double x_coupling = 0.0;           // (1/eps) sum a_xyy y_j y_k
  std::vector<double> y_coupling;    // (1/eps) a_yxy x y terms
  std::vector<double> y_bath;        // (1/eps^2) b terms
};

DriftParts full_drift_parts(const SystemState& state, const ModelParams& params,
                            std::span<const XyyTriad> xyy,
                            std::span<const YyyTriad> yyy);

/// Deterministic part of the full model: dx/dt without noise, dy/dt.
FullDrift full_drift(const SystemState& state, const ModelParams& params,
                     std::span<const XyyTriad> xyy, std::span<const YyyTriad> yyy);

/// Coefficient tables compiled to 0-based flat arrays for the hot loops.
///
/// State vectors passed to drift() are laid out as z = (x, y_1, ..., y_n).
class TriadSystem {
 public:
  TriadSystem(const CoefficientSet& set, double epsilon);

  int n() const { return n_; }
  std::size_t dimension() const { return static_cast<std::size_t>(n_) + 1; }
  const ModelParams& params() const { return params_; }

  /// Full deterministic drift for z = (x, y).
  void drift(std::span<const double> z, std::span<double> dz) const;

  /// Bath-only drift dy_i = sum b y_j y_k at unit time scale.
  void bath_drift(std::span<const double> y, std::span<double> dy) const;

  /// sum over xyy rows of a_xyy y_j y_k.
  double forcing(std::span<const double> y) const;

  /// dE/dt from the energy line of the extended model: -(2/eps) x forcing(y).
  double energy_rate(std::span<const double> z) const;

 private:
  struct XyyRow {
    std::size_t j, k;
    double a, aj, ak;
  };
  struct YyyRow {
    std::size_t i, j, k;
    double bi, bj, bk;
  };

  ModelParams params_;
  int n_;
  std::vector<XyyRow> xyy_;
  std::vector<YyyRow> yyy_;
};

}  // namespace smr
