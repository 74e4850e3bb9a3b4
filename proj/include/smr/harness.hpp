#pragma once

// Experiment orchestration: configuration documents, ensembles of
// independent trajectories, per-run statistics, merged summaries and the
// on-disk layout (one directory per experiment: manifest.json + CSVs).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smr/fast_bath.hpp"
#include "smr/integrate.hpp"
#include "smr/model.hpp"
#include "smr/reduced.hpp"
#include "smr/stats.hpp"

namespace smr {

inline constexpr const char* kVersion = "0.1.0";

/// Bath constant used when none is estimated or supplied.
inline constexpr double kPaperBathConstant = 1.2759;

enum class ModelKind { Full, Fast, Reduced };

std::string to_string(ModelKind m);
ModelKind model_kind_from_string(const std::string& s);

/// Fixed step per scale-separation parameter: 1e-4, 2.5e-5, 2e-5, 1e-6 for
/// eps = 1, 0.5, 0.25, 0.1; other values fall back to 1e-4 eps^2.
double paper_time_step(double epsilon);

struct StatsRequest {
  double cf_max_lag_x = 3.0;
  double cf_max_lag_E = 40.0;
  double cf_max_lag_y = 2.0;
  double kurt_max_lag_x = 3.0;
  double kurt_max_lag_E = 20.0;
  int density_bins = 60;
  double ct_threshold = 0.01;
  CtConvention ct_convention = CtConvention::Area;
  int n_blocks = kDefaultBlocks;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::Full;
  /// "paper" (tables as printed), "projected" (exactly conservative), or a
  /// JSON coefficient file.
  std::string coefficients = "projected";
  double epsilon = 1.0;

  /// Reduced model only.
  double M = kPaperBathConstant;
  /// "paper", "user" or "estimated:<file>".
  std::string M_source = "paper";
  EFloorPolicy e_floor = EFloorPolicy::Clamp;

  /// 0 selects paper_time_step(epsilon) for the full model, 1e-5 for the
  /// reduced model and 1e-3 for the bath.
  double dt = 0.0;
  Scheme scheme = Scheme::Rk5EulerNoise;
  /// Time between recorded samples; rounded to a whole number of steps.
  double sample_interval = 0.01;
  bool record_modes = false;

  double T = 2000.0;
  int K = 4;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool save_trajectories = true;

  StatsRequest stats;

  // Bath runs (estimate-m).
  double energy_level = 0.0;
  std::vector<double> rescaling_levels;
  double bath_T = 10000.0;
  int bath_runs = 10;
  double compat_T = 4000.0;
  double compat_tol = 0.02;

  std::string out_dir = "out";

  double effective_dt() const;
  int record_stride() const;
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

CoefficientSet resolve_coefficients(const std::string& spec);

/// Statistics of one trajectory after dropping the transient.
struct RunAnalysis {
  std::map<std::string, CorrelationCurve> cf;
  std::map<std::string, KurtosisCurve> kurt;
  std::map<std::string, std::vector<double>> samples;  // x and E, post-transient
  std::size_t transient_dropped = 0;
};

/// `gamma` sets the transient guess 1/gamma.
RunAnalysis analyze_run(const TimeSeries& series, const StatsRequest& req, double gamma);

struct VariableSummary {
  std::string name;
  std::vector<double> lags;
  EnsembleStat cf;
  CorrelationTime ct;            // from the ensemble-mean curve
  double ct_run_mean = 0.0;      // mean of per-run correlation times
  double ct_run_stderr = 0.0;
  std::optional<std::vector<double>> kurt_lags;
  std::optional<EnsembleStat> kurt;
  std::optional<MomentSummary> moments;  // pooled samples
  std::optional<DensityEstimate> density;
  std::optional<double> l1_to_analytic;
};

struct TrajectoryRecord {
  std::size_t index = 0;
  std::uint64_t stream_id = 0;
  bool aborted = false;
  std::string error;
  std::int64_t floor_events = 0;
  std::int64_t steps = 0;
  std::optional<std::string> file;
};

struct EnsembleResult {
  std::vector<TrajectoryRecord> trajectories;
  std::vector<VariableSummary> variables;
  std::int64_t floor_events = 0;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;

  std::size_t aborted() const;
  const VariableSummary& variable(const std::string& name) const;
};

/// Merges per-run analyses into ensemble summaries.
std::vector<VariableSummary> merge_runs(const std::vector<RunAnalysis>& runs,
                                        const std::vector<std::string>& names,
                                        const StatsRequest& req, double gamma, double sigma,
                                        int n);

/// K independent trajectories (full or reduced), stream id = trajectory index,
/// run on `config.jobs` workers. Trajectory CSVs go to `traj_dir` when given.
/// Throws IntegrationError if more than 20% of trajectories abort.
EnsembleResult run_ensemble(const ExperimentConfig& config, const CoefficientSet& coeffs,
                            const std::optional<std::filesystem::path>& traj_dir);

/// cf_<v>.csv, kurt_<v>.csv, density_<v>.csv and summary.json.
std::vector<std::string> write_ensemble_outputs(const EnsembleResult& result,
                                                const std::filesystem::path& dir,
                                                const nlohmann::json& extra_summary);

void write_curve_csv(const std::filesystem::path& path, const std::string& value_name,
                     const std::vector<double>& lags, const std::vector<double>& values,
                     const std::optional<std::vector<double>>& std_err);
void write_density_csv(const std::filesystem::path& path, const std::vector<double>& centers,
                       const std::vector<double>& density);

/// Writes JSON to a temporary file and renames it into place.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);

struct RunManifest {
  nlohmann::json config;
  std::string code_version = kVersion;
  std::string M_provenance;
  double wall_seconds = 0.0;
  std::vector<TrajectoryRecord> runs;
  std::uint64_t base_seed = 0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

}  // namespace smr
