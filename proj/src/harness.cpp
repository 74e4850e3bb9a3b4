#include "smr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "smr/full_model.hpp"
#include "smr/model_io.hpp"

namespace smr {

using nlohmann::json;

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Full: return "full";
    case ModelKind::Fast: return "fast";
    case ModelKind::Reduced: return "reduced";
  }
  return "full";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "full") return ModelKind::Full;
  if (s == "fast") return ModelKind::Fast;
  if (s == "reduced") return ModelKind::Reduced;
  throw ParseError("unknown model '" + s + "' (expected full, fast or reduced)");
}

double paper_time_step(double epsilon) {
  struct Entry {
    double eps, dt;
  };
  static constexpr Entry table[] = {{1.0, 1e-4}, {0.5, 2.5e-5}, {0.25, 2e-5}, {0.1, 1e-6}};
  for (const auto& e : table)
    if (std::abs(e.eps - epsilon) < 1e-12) return e.dt;
  return 1e-4 * epsilon * epsilon;
}

double ExperimentConfig::effective_dt() const {
  if (dt > 0.0) return dt;
  switch (model) {
    case ModelKind::Full: return paper_time_step(epsilon);
    case ModelKind::Reduced: return 1e-5;
    case ModelKind::Fast: return 1e-3;
  }
  return 1e-4;
}

int ExperimentConfig::record_stride() const {
  const double h = effective_dt();
  return std::max(1, static_cast<int>(std::llround(sample_interval / h)));
}

void ExperimentConfig::validate() const {
  if (K < 1) throw PreconditionError("ensemble size K must be >= 1");
  if (jobs < 1) throw PreconditionError("jobs must be >= 1");
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (!(T > 0.0)) throw PreconditionError("run length T must be positive");
  if (!(sample_interval > 0.0)) throw PreconditionError("sample_interval must be positive");
  if (model == ModelKind::Reduced && !(M >= 0.0))
    throw PreconditionError("bath constant M must be non-negative");
  if (T < effective_dt()) throw PreconditionError("run length shorter than one step");
}

namespace {

json stats_to_json(const StatsRequest& s) {
  return {{"cf_max_lag_x", s.cf_max_lag_x},
          {"cf_max_lag_E", s.cf_max_lag_E},
          {"cf_max_lag_y", s.cf_max_lag_y},
          {"kurt_max_lag_x", s.kurt_max_lag_x},
          {"kurt_max_lag_E", s.kurt_max_lag_E},
          {"density_bins", s.density_bins},
          {"ct_threshold", s.ct_threshold},
          {"ct_convention", s.ct_convention == CtConvention::Area ? "area" : "inverse"},
          {"n_blocks", s.n_blocks}};
}

template <class T>
void take(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void reject_unknown(const json& doc, std::initializer_list<const char*> keys,
                    const std::string& where) {
  for (const auto& [k, v] : doc.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ParseError(where + ": unknown key '" + k + "'");
  }
}

StatsRequest stats_from_json(const json& doc) {
  reject_unknown(doc,
                 {"cf_max_lag_x", "cf_max_lag_E", "cf_max_lag_y", "kurt_max_lag_x",
                  "kurt_max_lag_E", "density_bins", "ct_threshold", "ct_convention", "n_blocks"},
                 "stats");
  StatsRequest s;
  take(doc, "cf_max_lag_x", s.cf_max_lag_x);
  take(doc, "cf_max_lag_E", s.cf_max_lag_E);
  take(doc, "cf_max_lag_y", s.cf_max_lag_y);
  take(doc, "kurt_max_lag_x", s.kurt_max_lag_x);
  take(doc, "kurt_max_lag_E", s.kurt_max_lag_E);
  take(doc, "density_bins", s.density_bins);
  take(doc, "ct_threshold", s.ct_threshold);
  take(doc, "n_blocks", s.n_blocks);
  if (doc.contains("ct_convention")) {
    const auto c = doc.at("ct_convention").get<std::string>();
    if (c == "area")
      s.ct_convention = CtConvention::Area;
    else if (c == "inverse")
      s.ct_convention = CtConvention::InverseArea;
    else
      throw ParseError("stats.ct_convention must be 'area' or 'inverse'");
  }
  return s;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  return {{"model", to_string(c.model)},
          {"coefficients", c.coefficients},
          {"epsilon", c.epsilon},
          {"M", c.M},
          {"M_source", c.M_source},
          {"e_floor", to_string(c.e_floor)},
          {"dt", c.effective_dt()},
          {"scheme", to_string(c.scheme)},
          {"sample_interval", c.sample_interval},
          {"record_modes", c.record_modes},
          {"T", c.T},
          {"K", c.K},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"save_trajectories", c.save_trajectories},
          {"stats", stats_to_json(c.stats)},
          {"energy_level", c.energy_level},
          {"rescaling_levels", c.rescaling_levels},
          {"bath_T", c.bath_T},
          {"bath_runs", c.bath_runs},
          {"compat_T", c.compat_T},
          {"compat_tol", c.compat_tol},
          {"out_dir", c.out_dir}};
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  reject_unknown(doc,
                 {"model", "coefficients", "epsilon", "M", "M_source", "e_floor", "dt", "scheme",
                  "sample_interval", "record_modes", "T", "K", "seed", "jobs",
                  "save_trajectories", "stats", "energy_level", "rescaling_levels", "bath_T", "bath_runs",
                  "compat_T", "compat_tol", "out_dir"},
                 "config");
  ExperimentConfig c;
  try {
    if (doc.contains("model")) c.model = model_kind_from_string(doc.at("model").get<std::string>());
    take(doc, "coefficients", c.coefficients);
    take(doc, "epsilon", c.epsilon);
    take(doc, "M", c.M);
    take(doc, "M_source", c.M_source);
    if (doc.contains("e_floor"))
      c.e_floor = e_floor_policy_from_string(doc.at("e_floor").get<std::string>());
    take(doc, "dt", c.dt);
    if (doc.contains("scheme")) c.scheme = scheme_from_string(doc.at("scheme").get<std::string>());
    take(doc, "sample_interval", c.sample_interval);
    take(doc, "record_modes", c.record_modes);
    take(doc, "T", c.T);
    take(doc, "K", c.K);
    take(doc, "seed", c.seed);
    take(doc, "jobs", c.jobs);
    take(doc, "save_trajectories", c.save_trajectories);
    if (doc.contains("stats")) c.stats = stats_from_json(doc.at("stats"));
    take(doc, "energy_level", c.energy_level);
    take(doc, "rescaling_levels", c.rescaling_levels);
    take(doc, "bath_T", c.bath_T);
    take(doc, "bath_runs", c.bath_runs);
    take(doc, "compat_T", c.compat_T);
    take(doc, "compat_tol", c.compat_tol);
    take(doc, "out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

CoefficientSet resolve_coefficients(const std::string& spec) {
  if (spec == "paper") return builtin_paper_model();
  if (spec == "projected") return builtin_projected_model();
  return load_coefficients(spec);
}

// --- per-run analysis -------------------------------------------------------

namespace {

bool is_slow(const std::string& name) { return name == "x" || name == "E"; }

std::vector<double> decimate(const std::vector<double>& v, std::size_t factor) {
  if (factor <= 1) return v;
  std::vector<double> out;
  out.reserve(v.size() / factor + 1);
  for (std::size_t i = 0; i < v.size(); i += factor) out.push_back(v[i]);
  return out;
}

// Slow variables are analysed on a grid no finer than this.
constexpr double kSlowSampleInterval = 0.01;

}  // namespace

RunAnalysis analyze_run(const TimeSeries& series, const StatsRequest& req, double gamma) {
  RunAnalysis out;
  const double ds = series.dt_sample();
  out.transient_dropped = transient_samples(series.size(), ds, 1.0 / gamma);
  const TimeSeries s = series.tail(out.transient_dropped);
  const double span = static_cast<double>(s.size()) * ds;
  auto fit = [&](double lag, double step) { return std::min(lag, std::floor(span / 5.0 / step) * step); };

  for (std::size_t c = 0; c < s.width(); ++c) {
    const std::string& name = s.names()[c];
    auto col = s.column(c);
    if (is_slow(name)) {
      const auto factor =
          static_cast<std::size_t>(std::max(1.0, std::floor(kSlowSampleInterval / ds + 1e-9)));
      const double h = ds * static_cast<double>(factor);
      const auto coarse = decimate(col, factor);
      const double cf_lag = name == "x" ? req.cf_max_lag_x : req.cf_max_lag_E;
      const double k_lag = name == "x" ? req.kurt_max_lag_x : req.kurt_max_lag_E;
      out.cf[name] = correlation_function(coarse, h, fit(cf_lag, h), req.n_blocks);
      out.kurt[name] = lagged_kurtosis(coarse, h, fit(k_lag, h), req.n_blocks);
      out.samples[name] = std::move(col);
    } else {
      out.cf[name] = correlation_function(col, ds, fit(req.cf_max_lag_y, ds), req.n_blocks);
    }
  }
  return out;
}

std::vector<VariableSummary> merge_runs(const std::vector<RunAnalysis>& runs,
                                        const std::vector<std::string>& names,
                                        const StatsRequest& req, double gamma, double sigma,
                                        int n) {
  std::vector<VariableSummary> out;
  if (runs.empty()) return out;
  for (const auto& name : names) {
    VariableSummary v;
    v.name = name;
    std::vector<CorrelationCurve> curves;
    std::vector<double> cts;
    for (const auto& r : runs) {
      curves.push_back(r.cf.at(name));
      cts.push_back(correlation_time(curves.back(), req.ct_convention, req.ct_threshold).value);
    }
    v.lags = curves.front().lags;
    v.cf = ensemble_average(std::span<const CorrelationCurve>(curves));
    if (!v.cf.std_err) v.cf.std_err = curves.front().std_err;
    CorrelationCurve merged;
    merged.lags = v.lags;
    merged.values = v.cf.mean;
    v.ct = correlation_time(merged, req.ct_convention, req.ct_threshold);
    double m = 0.0;
    for (double c : cts) m += c / static_cast<double>(cts.size());
    double ss = 0.0;
    for (double c : cts) ss += (c - m) * (c - m);
    v.ct_run_mean = m;
    v.ct_run_stderr = cts.size() > 1
                          ? std::sqrt(ss / static_cast<double>(cts.size() - 1) /
                                      static_cast<double>(cts.size()))
                          : 0.0;

    if (runs.front().kurt.count(name)) {
      std::vector<KurtosisCurve> kc;
      for (const auto& r : runs) kc.push_back(r.kurt.at(name));
      v.kurt_lags = kc.front().lags;
      v.kurt = ensemble_average(std::span<const KurtosisCurve>(kc));
      if (!v.kurt->std_err) v.kurt->std_err = kc.front().std_err;
    }
    if (runs.front().samples.count(name)) {
      std::vector<double> pooled;
      for (const auto& r : runs) {
        const auto& s = r.samples.at(name);
        pooled.insert(pooled.end(), s.begin(), s.end());
      }
      v.moments = moments(pooled, req.n_blocks);
      const double var = sigma * sigma / (2.0 * gamma);
      if (name == "x") {
        const double half = 6.0 * std::sqrt(var);
        v.density = empirical_density(pooled, req.density_bins, -half, half);
        const auto rho = analytic_density_x(gamma, sigma);
        v.l1_to_analytic = l1_distance(*v.density, [rho](double s) { return rho.cdf(s); });
      } else {
        const double hi = n * var + 8.0 * std::sqrt(2.0 * n) * var;
        v.density = empirical_density(pooled, req.density_bins, 0.0, hi);
        const auto rho = analytic_density_E(gamma, sigma, n);
        v.l1_to_analytic = l1_distance(*v.density, [rho](double s) { return rho.cdf(s); });
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::size_t EnsembleResult::aborted() const {
  return static_cast<std::size_t>(
      std::count_if(trajectories.begin(), trajectories.end(), [](const auto& t) { return t.aborted; }));
}

const VariableSummary& EnsembleResult::variable(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return v;
  throw PreconditionError("no statistics for variable '" + name + "'");
}

EnsembleResult run_ensemble(const ExperimentConfig& config, const CoefficientSet& coeffs,
                            const std::optional<std::filesystem::path>& traj_dir) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto K = static_cast<std::size_t>(config.K);
  StepperConfig sc;
  sc.dt = config.effective_dt();
  sc.scheme = config.scheme;
  sc.record_stride = config.record_stride();

  std::vector<RunAnalysis> analyses(K);
  std::vector<TrajectoryRecord> records(K);
  std::vector<std::string> names;
  std::mutex names_mutex;

  auto work = [&](std::size_t k) {
    TrajectoryRecord& rec = records[k];
    rec.index = k;
    rec.stream_id = k;
    RngStream rng(config.seed, k);
    try {
      TimeSeries ts;
      if (config.model == ModelKind::Full) {
        FullModel model(coeffs, config.epsilon, config.record_modes);
        const auto init = model.stationary_initial_state(rng);
        ts = integrate_trajectory(model, init, sc, config.T, rng);
        rec.steps = step_count(config.T, sc.dt);
      } else if (config.model == ModelKind::Reduced) {
        ReducedModel model({coeffs.gamma, coeffs.sigma, coeffs.n, config.M}, config.e_floor);
        const auto init = model.stationary_initial_state(rng);
        ts = integrate_trajectory(model, init, sc, config.T, rng);
        rec.steps = model.steps();
        rec.floor_events = model.floor_events();
      } else {
        CoefficientSet unit = coeffs;
        unit.gamma = unit.sigma = 1.0;
        const TriadSystem system(unit, 1.0);
        const double E = config.energy_level > 0.0 ? config.energy_level : coeffs.n;
        const auto init = sample_uniform_sphere(coeffs.n, E, rng);
        FastBathModel model(system, E, true);
        ts = integrate_trajectory(model, init.y, sc, config.T, rng);
        rec.steps = step_count(config.T, sc.dt);
      }
      {
        std::lock_guard lock(names_mutex);
        if (names.empty()) names = ts.names();
      }
      if (traj_dir && config.save_trajectories) {
        const auto file = "traj_" + std::to_string(k) + ".csv";
        ts.write_csv(*traj_dir / file);
        rec.file = file;
      }
      analyses[k] = analyze_run(ts, config.stats, coeffs.gamma);
    } catch (const IntegrationError& e) {
      rec.aborted = true;
      rec.error = std::string(e.what()) + " at t=" + std::to_string(e.time());
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), K);
  if (workers <= 1) {
    for (std::size_t k = 0; k < K; ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < K; k = next++) work(k);
      });
  }

  EnsembleResult result;
  result.trajectories = records;
  std::vector<RunAnalysis> ok;
  for (std::size_t k = 0; k < K; ++k) {
    result.floor_events += records[k].floor_events;
    result.steps += records[k].steps;
    if (!records[k].aborted) ok.push_back(std::move(analyses[k]));
  }
  if (static_cast<double>(result.aborted()) > 0.2 * static_cast<double>(K) || ok.empty()) {
    std::string why = "too many trajectories aborted (" + std::to_string(result.aborted()) +
                      " of " + std::to_string(K) + ")";
    for (const auto& r : records)
      if (r.aborted) why += "; #" + std::to_string(r.index) + ": " + r.error;
    throw IntegrationError(why, config.T, {});
  }
  result.variables =
      merge_runs(ok, names, config.stats, coeffs.gamma, coeffs.sigma, coeffs.n);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// --- output -----------------------------------------------------------------

void write_curve_csv(const std::filesystem::path& path, const std::string& value_name,
                     const std::vector<double>& lags, const std::vector<double>& values,
                     const std::optional<std::vector<double>>& std_err) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  std::fprintf(f, "lag,%s,stderr\n", value_name.c_str());
  for (std::size_t i = 0; i < lags.size(); ++i)
    std::fprintf(f, "%.17g,%.17g,%.17g\n", lags[i], values[i], std_err ? (*std_err)[i] : 0.0);
  std::fclose(f);
}

void write_density_csv(const std::filesystem::path& path, const std::vector<double>& centers,
                       const std::vector<double>& density) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  std::fputs("bin_center,density\n", f);
  for (std::size_t i = 0; i < centers.size(); ++i)
    std::fprintf(f, "%.17g,%.17g\n", centers[i], density[i]);
  std::fclose(f);
}

void write_json_atomic(const std::filesystem::path& path, const json& doc) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> write_ensemble_outputs(const EnsembleResult& result,
                                                const std::filesystem::path& dir,
                                                const json& extra_summary) {
  std::vector<std::string> files;
  json vars = json::object();
  for (const auto& v : result.variables) {
    const auto cf_file = "cf_" + v.name + ".csv";
    write_curve_csv(dir / cf_file, "cf", v.lags, v.cf.mean, v.cf.std_err);
    files.push_back(cf_file);
    json j = {{"ct", v.ct.value},
              {"ct_area", v.ct.area},
              {"ct_tau_star", v.ct.tau_star},
              {"ct_decayed", v.ct.decayed},
              {"ct_run_mean", v.ct_run_mean},
              {"ct_run_stderr", v.ct_run_stderr}};
    if (v.kurt) {
      const auto kf = "kurt_" + v.name + ".csv";
      write_curve_csv(dir / kf, "kurt", *v.kurt_lags, v.kurt->mean, v.kurt->std_err);
      files.push_back(kf);
    }
    if (v.density) {
      const auto df = "density_" + v.name + ".csv";
      write_density_csv(dir / df, v.density->centers(), v.density->density);
      files.push_back(df);
    }
    if (v.moments) {
      j["mean"] = v.moments->mean;
      j["variance"] = v.moments->variance;
      j["skewness"] = v.moments->skewness;
      j["stderr_mean"] = v.moments->stderr_mean;
      j["stderr_variance"] = v.moments->stderr_variance;
      j["stderr_skewness"] = v.moments->stderr_skewness;
    }
    if (v.l1_to_analytic) j["l1_to_analytic"] = *v.l1_to_analytic;
    vars[v.name] = j;
  }
  json summary = extra_summary.is_object() ? extra_summary : json::object();
  summary["variables"] = vars;
  summary["floor_events"] = result.floor_events;
  summary["steps"] = result.steps;
  summary["aborted"] = result.aborted();
  write_json_atomic(dir / "summary.json", summary);
  files.push_back("summary.json");
  return files;
}

json RunManifest::to_json() const {
  json runs_j = json::array();
  for (const auto& r : runs) {
    json j = {{"index", r.index},
              {"seed", base_seed},
              {"stream_id", r.stream_id},
              {"aborted", r.aborted},
              {"floor_events", r.floor_events},
              {"steps", r.steps}};
    if (r.aborted) j["error"] = r.error;
    if (r.file) j["file"] = *r.file;
    runs_j.push_back(j);
  }
  return {{"config", config},
          {"code_version", code_version},
          {"M_provenance", M_provenance},
          {"wall_clock_seconds", wall_seconds},
          {"base_seed", base_seed},
          {"runs", runs_j},
          {"outputs", outputs}};
}

}  // namespace smr
