#include "smr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>

#include <CLI11.hpp>
#include <json.hpp>

#include "smr/harness.hpp"

namespace smr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalFlags {
  std::string config;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;
  bool paper_scale = false;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

/// A value parsed from the command line that only overrides the config when
/// the flag was actually given.
template <class T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt != nullptr && opt->count() > 0; }
  void apply(T& target) const {
    if (given()) target = value;
  }
};

struct ModelFlags {
  Flag<std::string> model, coefficients, e_floor, scheme, M_from, ct_convention;
  Flag<double> epsilon, T, dt, M, sample_interval;
  Flag<int> K;
  Flag<bool> record_modes;
  Flag<bool> no_trajectories;
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  f.model.opt = sub->add_option("--model", f.model.value, "full | fast | reduced")
                    ->check(CLI::IsMember({"full", "fast", "reduced"}));
  f.coefficients.opt = sub->add_option("--coeffs", f.coefficients.value,
                                       "paper | projected | coefficient JSON file");
  f.epsilon.opt = sub->add_option("--eps", f.epsilon.value, "scale separation epsilon");
  f.T.opt = sub->add_option("--T", f.T.value, "run length per trajectory");
  f.K.opt = sub->add_option("--K", f.K.value, "ensemble size");
  f.dt.opt = sub->add_option("--dt", f.dt.value, "time step (default: per-model preset)");
  f.M.opt = sub->add_option("--M", f.M.value, "bath constant for the reduced model");
  f.M_from.opt = sub->add_option("--M-from", f.M_from.value,
                                 "take M from an estimate-m bath_summary.json");
  f.e_floor.opt = sub->add_option("--e-floor", f.e_floor.value, "clamp | reflect | reject")
                      ->check(CLI::IsMember({"clamp", "reflect", "reject"}));
  f.scheme.opt = sub->add_option("--scheme", f.scheme.value, "rk5 | rk2 | euler")
                     ->check(CLI::IsMember({"rk5", "rk2", "euler"}));
  f.sample_interval.opt =
      sub->add_option("--sample-interval", f.sample_interval.value, "time between samples");
  f.record_modes.opt = sub->add_flag("--record-modes", f.record_modes.value,
                                     "also record every fast mode y_k");
  f.no_trajectories.opt = sub->add_flag("--no-trajectories", f.no_trajectories.value,
                                        "do not write traj_<k>.csv files");
  f.ct_convention.opt =
      sub->add_option("--ct-convention", f.ct_convention.value, "area | inverse")
          ->check(CLI::IsMember({"area", "inverse"}));
}

double read_bath_constant(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    json doc;
    in >> doc;
    return doc.at("M").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void apply_model_flags(const ModelFlags& f, ExperimentConfig& c) {
  if (f.model.given()) c.model = model_kind_from_string(f.model.value);
  f.coefficients.apply(c.coefficients);
  f.epsilon.apply(c.epsilon);
  f.T.apply(c.T);
  f.K.apply(c.K);
  f.dt.apply(c.dt);
  if (f.M.given()) {
    c.M = f.M.value;
    c.M_source = "user";
  }
  if (f.M_from.given()) {
    c.M = read_bath_constant(f.M_from.value);
    c.M_source = "estimated:" + f.M_from.value;
  }
  if (f.e_floor.given()) c.e_floor = e_floor_policy_from_string(f.e_floor.value);
  if (f.scheme.given()) c.scheme = scheme_from_string(f.scheme.value);
  f.sample_interval.apply(c.sample_interval);
  if (f.record_modes.given()) c.record_modes = f.record_modes.value;
  if (f.no_trajectories.given()) c.save_trajectories = !f.no_trajectories.value;
  if (f.ct_convention.given())
    c.stats.ct_convention =
        f.ct_convention.value == "area" ? CtConvention::Area : CtConvention::InverseArea;
}

ExperimentConfig base_config(const GlobalFlags& g, const std::string& default_out) {
  ExperimentConfig c = g.config_opt->count() ? load_config(g.config) : ExperimentConfig{};
  if (!g.config_opt->count()) c.out_dir = default_out;
  if (g.seed_opt->count()) c.seed = g.seed;
  if (g.jobs_opt->count()) c.jobs = g.jobs;
  if (g.out_opt->count()) c.out_dir = g.out;
  return c;
}

bool is_slow_name(const std::string& v) { return v == "x" || v == "E"; }

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

std::string M_provenance(const ExperimentConfig& c) {
  if (c.model != ModelKind::Reduced) return "not used";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c.M);
  return c.M_source + " (M = " + buf + ")";
}

// --- validate ---------------------------------------------------------------

int cmd_validate(const std::string& coeffs, double tol, bool verbose, std::ostream& out) {
  const CoefficientSet set = resolve_coefficients(coeffs);
  const ValidationReport report = validate_conservation(set, tol);
  for (const auto& r : report.residuals) {
    const bool bad = std::abs(r.residual) > tol;
    if (bad || verbose) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-14s residual % .3e%s", r.label.c_str(), r.residual,
                    bad ? "  FAIL" : "");
      out << buf << '\n';
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "max |residual| = %.3e, tol = %.3e: %s", report.max_abs_residual,
                tol, report.pass ? "PASS" : "FAIL");
  out << buf << '\n';
  return report.pass ? kExitOk : kExitValidation;
}

// --- estimate-m -------------------------------------------------------------

json compatibility_to_json(const CompatibilityReport& r) {
  return {{"n", r.n},
          {"tol", r.tol},
          {"first_moments", r.first_moments},
          {"first_stderr", r.first_stderr},
          {"mixed_moments", r.mixed_moments},
          {"mixed_stderr", r.mixed_stderr},
          {"max_abs_first", r.max_abs_first},
          {"max_abs_mixed", r.max_abs_mixed},
          {"failures", r.failures},
          {"pass", r.pass}};
}

json bath_to_json(const BathStatistics& b) {
  return {{"M", b.M},
          {"stderr_M", b.stderr_M},
          {"Q", b.Q},
          {"stderr_Q", b.stderr_Q},
          {"E_level", b.energy_level},
          {"n", b.n},
          {"tau_max", b.tau_max},
          {"decayed", b.decayed},
          {"tail_estimate", b.tail_estimate},
          {"first_moments", b.first_moments},
          {"max_abs_mixed_moment", b.max_abs_mixed_moment},
          {"static_moment_time", b.static_moment_time},
          {"static_moment_sphere", b.static_moment_sphere},
          {"static_moment_sphere_stderr", b.static_moment_sphere_stderr},
          {"max_relative_drift", b.max_relative_drift},
          {"renormalizations", b.renormalizations},
          {"warnings", b.warnings}};
}

void write_bath_curve(const fs::path& path, const BathStatistics& b) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  std::fputs("tau,C_tau\n", f);
  for (std::size_t i = 0; i < b.tau.size(); ++i) std::fprintf(f, "%.17g,%.17g\n", b.tau[i], b.C[i]);
  std::fclose(f);
}

int cmd_estimate_m(const ExperimentConfig& c, const std::optional<double>& tau_cap,
                   const std::optional<double>& tau_fixed, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  const CoefficientSet set = resolve_coefficients(c.coefficients);
  const double level = c.energy_level > 0.0 ? c.energy_level : set.n;
  const double dt = c.dt > 0.0 ? c.dt : 1e-3;
  std::vector<std::string> outputs;
  int status = kExitOk;

  RngStream crng(c.seed, 0x636f6d70);
  FastRunOptions fo;
  fo.dt = dt;
  fo.T = c.compat_T;
  fo.record_stride = 10;
  fo.renormalize = true;
  const auto compat_run =
      run_fast_subsystem(set.yyy, set.n, sample_uniform_sphere(set.n, level, crng), fo);
  const auto compat = check_compatibility(compat_run.series, c.compat_tol);
  write_json_atomic(dir / "compatibility.json", compatibility_to_json(compat));
  outputs.push_back("compatibility.json");
  if (!compat.pass) status = kExitValidation;

  EstimateMOptions opts;
  opts.energy_level = level;
  opts.dt = dt;
  opts.T = c.bath_T;
  opts.n_runs = c.bath_runs;
  opts.seed = c.seed;
  if (tau_cap) opts.tau_cap = *tau_cap;
  opts.tau_fixed = tau_fixed;
  const BathStatistics bath = estimate_M(set, opts);
  write_bath_curve(dir / "bath_C.csv", bath);
  write_json_atomic(dir / "bath_summary.json", bath_to_json(bath));
  outputs.insert(outputs.end(), {"bath_C.csv", "bath_summary.json"});

  char buf[160];
  std::snprintf(buf, sizeof buf, "M = %.5f +- %.5f (E = %g, tau_max = %.2f)", bath.M,
                bath.stderr_M, level, bath.tau_max);
  out << buf << '\n';
  for (const auto& w : bath.warnings) out << "warning: " << w << '\n';
  out << "compatibility: " << (compat.pass ? "PASS" : "FAIL") << '\n';

  if (!c.rescaling_levels.empty()) {
    const auto rep = check_rescaling(set, c.rescaling_levels, opts);
    json levels = json::array();
    for (const auto& l : rep.levels)
      levels.push_back({{"E_level", l.energy_level},
                        {"Q", l.Q},
                        {"stderr_Q", l.stderr_Q},
                        {"M", l.M},
                        {"stderr_M", l.stderr_M}});
    write_json_atomic(dir / "rescaling.json", {{"levels", levels},
                                                {"raw_ratio", rep.raw_ratio},
                                                {"expected_ratio", rep.expected_ratio},
                                                {"max_pairwise_z", rep.max_pairwise_z},
                                                {"z_tolerance", rep.z_tolerance},
                                                {"pass", rep.pass}});
    outputs.push_back("rescaling.json");
    std::snprintf(buf, sizeof buf, "rescaling: Q ratio %.4f (expected %.4f), max z %.2f: %s",
                  rep.raw_ratio, rep.expected_ratio, rep.max_pairwise_z,
                  rep.pass ? "PASS" : "FAIL");
    out << buf << '\n';
    if (!rep.pass) status = kExitValidation;
  }

  ExperimentConfig snapshot = c;
  snapshot.model = ModelKind::Fast;
  snapshot.dt = dt;
  snapshot.energy_level = level;
  RunManifest m;
  m.config = config_to_json(snapshot);
  m.M_provenance = "estimated";
  m.base_seed = c.seed;
  m.outputs = outputs;
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json_atomic(dir / "manifest.json", m.to_json());
  return status;
}

// --- simulate / stats -------------------------------------------------------

json experiment_summary(const ExperimentConfig& c) {
  json j = {{"model", to_string(c.model)}, {"epsilon", c.epsilon}, {"T", c.T}, {"K", c.K}};
  if (c.model == ModelKind::Reduced) {
    j["M"] = c.M;
    j["M_source"] = c.M_source;
  }
  return j;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& c, const EnsembleResult& r,
                    std::vector<std::string> outputs) {
  RunManifest m;
  m.config = config_to_json(c);
  m.M_provenance = M_provenance(c);
  m.base_seed = c.seed;
  m.runs = r.trajectories;
  for (const auto& t : r.trajectories)
    if (t.file) outputs.push_back(*t.file);
  m.outputs = std::move(outputs);
  m.wall_seconds = r.wall_seconds;
  write_json_atomic(dir / "manifest.json", m.to_json());
}

EnsembleResult simulate_into(const ExperimentConfig& c, const fs::path& dir) {
  fs::create_directories(dir);
  const CoefficientSet set = resolve_coefficients(c.coefficients);
  EnsembleResult r = run_ensemble(c, set, dir);
  const auto outputs = write_ensemble_outputs(r, dir, experiment_summary(c));
  write_manifest(dir, c, r, outputs);
  return r;
}

void print_summary(const EnsembleResult& r, std::ostream& out) {
  for (const auto& v : r.variables) {
    char buf[200];
    int len = std::snprintf(buf, sizeof buf, "%-4s CT = %.4f", v.name.c_str(), v.ct.value);
    if (v.moments)
      len += std::snprintf(buf + len, sizeof buf - len, "  mean = %.4f  var = %.4f",
                           v.moments->mean, v.moments->variance);
    if (v.l1_to_analytic)
      std::snprintf(buf + len, sizeof buf - len, "  L1 = %.4f", *v.l1_to_analytic);
    out << buf << '\n';
  }
  if (r.floor_events > 0) out << "E-floor events: " << r.floor_events << '\n';
}

int cmd_simulate(const ExperimentConfig& c, std::ostream& out) {
  const auto r = simulate_into(c, c.out_dir);
  print_summary(r, out);
  out << "wrote " << c.out_dir << '\n';
  return kExitOk;
}

std::vector<std::pair<std::size_t, fs::path>> trajectory_files(const fs::path& dir) {
  static const std::regex pattern(R"(traj_(\d+)\.csv)");
  std::vector<std::pair<std::size_t, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoul(m[1]), entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_stats(const fs::path& in_dir, ExperimentConfig c, bool have_config, std::ostream& out) {
  if (!fs::is_directory(in_dir)) throw PreconditionError("no such directory " + in_dir.string());
  if (!have_config && fs::exists(in_dir / "manifest.json")) {
    std::ifstream in(in_dir / "manifest.json");
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ParseError("manifest.json: " + std::string(e.what()));
    }
    const auto out_dir = c.out_dir;
    c = config_from_json(doc.at("config"));
    c.out_dir = out_dir;
  }
  const auto files = trajectory_files(in_dir);
  if (files.empty()) throw PreconditionError("no traj_<k>.csv files in " + in_dir.string());
  const CoefficientSet set = resolve_coefficients(c.coefficients);

  std::vector<RunAnalysis> runs;
  std::vector<std::string> names;
  EnsembleResult r;
  for (const auto& [k, path] : files) {
    const TimeSeries ts = TimeSeries::read_csv(path);
    if (names.empty()) names = ts.names();
    if (ts.names() != names) throw ParseError(path.string() + ": columns differ from the first file");
    runs.push_back(analyze_run(ts, c.stats, set.gamma));
    TrajectoryRecord rec;
    rec.index = k;
    rec.stream_id = k;
    rec.file = path.filename().string();
    r.trajectories.push_back(rec);
  }
  r.variables = merge_runs(runs, names, c.stats, set.gamma, set.sigma, set.n);
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  json extra = experiment_summary(c);
  extra["source"] = in_dir.string();
  auto outputs = write_ensemble_outputs(r, dir, extra);
  RunManifest m;
  m.config = config_to_json(c);
  m.M_provenance = M_provenance(c);
  m.base_seed = c.seed;
  m.runs = r.trajectories;
  m.outputs = outputs;
  write_json_atomic(dir / (fs::equivalent(dir, in_dir) ? "stats_manifest.json" : "manifest.json"),
                    m.to_json());
  print_summary(r, out);
  return kExitOk;
}

// --- reproduce --------------------------------------------------------------

struct Preset {
  std::vector<double> eps;
  std::vector<double> eps_compare;  // pdf_E, cf_compare, kurt_compare
  double T_full;
  int K_full;
  double T_reduced;
  int K_reduced;
};

Preset desk_preset() { return {{1.0, 0.5}, {1.0, 0.5}, 2000.0, 4, 10000.0, 4}; }
Preset paper_preset() {
  return {{1.0, 0.5, 0.25, 0.1}, {0.25, 0.1}, 40000.0, 10, 40000.0, 10};
}

class Reproducer {
 public:
  Reproducer(ExperimentConfig base, Preset preset, std::ostream& out)
      : base_(std::move(base)), preset_(std::move(preset)), dir_(base_.out_dir), out_(out) {}

  const Preset& preset() const { return preset_; }
  const fs::path& dir() const { return dir_; }

  const EnsembleResult& full(double eps) {
    ExperimentConfig c = base_;
    c.model = ModelKind::Full;
    c.epsilon = eps;
    c.T = preset_.T_full;
    c.K = preset_.K_full;
    c.record_modes = false;
    return run("full_eps" + eps_tag(eps), c);
  }

  /// Shorter run that records every fast mode on a finer grid.
  const EnsembleResult& modes(double eps) {
    ExperimentConfig c = base_;
    c.model = ModelKind::Full;
    c.epsilon = eps;
    c.T = std::min(preset_.T_full, 400.0 * eps);
    c.K = preset_.K_full;
    c.record_modes = true;
    c.sample_interval = std::min(0.002, 0.008 * eps * eps);
    c.stats.cf_max_lag_y = base_.stats.cf_max_lag_y * eps * eps;
    return run("modes_eps" + eps_tag(eps), c);
  }

  const EnsembleResult& reduced() {
    ExperimentConfig c = base_;
    c.model = ModelKind::Reduced;
    c.T = preset_.T_reduced;
    c.K = preset_.K_reduced;
    c.record_modes = false;
    return run("reduced", c);
  }

  void curve(const std::string& file, const VariableSummary& v, bool kurt = false) {
    if (kurt)
      write_curve_csv(dir_ / file, "kurt", *v.kurt_lags, v.kurt->mean, v.kurt->std_err);
    else
      write_curve_csv(dir_ / file, "cf", v.lags, v.cf.mean, v.cf.std_err);
    files_.push_back(file);
  }

  void density(const std::string& file, const VariableSummary& v) {
    write_density_csv(dir_ / file, v.density->centers(), v.density->density);
    files_.push_back(file);
  }

  void add_file(const std::string& file) { files_.push_back(file); }

  void finish(const std::string& figure) {
    json exps = json::object();
    for (const auto& [key, r] : cache_) exps[key] = key;
    RunManifest m;
    m.config = config_to_json(base_);
    m.config["figure"] = figure;
    m.config["preset"] = {{"eps", preset_.eps},
                          {"eps_compare", preset_.eps_compare},
                          {"T_full", preset_.T_full},
                          {"K_full", preset_.K_full},
                          {"T_reduced", preset_.T_reduced},
                          {"K_reduced", preset_.K_reduced}};
    m.config["experiments"] = exps;
    ExperimentConfig reduced = base_;
    reduced.model = ModelKind::Reduced;
    m.M_provenance = M_provenance(reduced);
    m.base_seed = base_.seed;
    m.outputs = files_;
    for (const auto& [key, r] : cache_) m.wall_seconds += r.wall_seconds;
    write_json_atomic(dir_ / "manifest.json", m.to_json());
  }

 private:
  const EnsembleResult& run(const std::string& key, const ExperimentConfig& c) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    out_ << "running " << key << " (T = " << c.T << ", K = " << c.K << ")" << std::endl;
    auto r = simulate_into(c, dir_ / key);
    return cache_.emplace(key, std::move(r)).first->second;
  }

  ExperimentConfig base_;
  Preset preset_;
  fs::path dir_;
  std::ostream& out_;
  std::map<std::string, EnsembleResult> cache_;
  std::vector<std::string> files_;
};

int cmd_reproduce(const std::string& figure, Reproducer& rep, std::ostream& out) {
  fs::create_directories(rep.dir());
  const auto& p = rep.preset();
  if (figure == "fig1") {
    const auto& full = rep.full(1.0);
    const auto& modes = rep.modes(1.0);
    rep.curve("cf_x_full_eps1.csv", full.variable("x"));
    rep.curve("cf_E_full_eps1.csv", full.variable("E"));
    rep.curve("cf_y2_full_eps1.csv", modes.variable("y2"));
    rep.curve("cf_y7_full_eps1.csv", modes.variable("y7"));
  } else if (figure == "cfx_full" || figure == "cfe_full") {
    const std::string v = figure == "cfx_full" ? "x" : "E";
    for (double e : p.eps)
      rep.curve("cf_" + v + "_full_eps" + eps_tag(e) + ".csv", rep.full(e).variable(v));
  } else if (figure == "pdf_E") {
    for (double e : p.eps_compare)
      rep.density("density_E_full_eps" + eps_tag(e) + ".csv", rep.full(e).variable("E"));
    const auto& red = rep.reduced().variable("E");
    rep.density("density_E_reduced.csv", red);
    const auto set = resolve_coefficients("projected");
    const auto rho = analytic_density_E(set.gamma, set.sigma, set.n);
    const auto centers = red.density->centers();
    std::vector<double> values;
    for (double s : centers) values.push_back(rho(s));
    write_density_csv(rep.dir() / "density_E_analytic.csv", centers, values);
    rep.add_file("density_E_analytic.csv");
  } else if (figure == "cf_compare" || figure == "kurt_compare") {
    const bool kurt = figure == "kurt_compare";
    const std::string prefix = kurt ? "kurt_" : "cf_";
    for (double e : p.eps_compare) {
      const auto& r = rep.full(e);
      for (const char* v : {"x", "E"})
        rep.curve(prefix + v + "_full_eps" + eps_tag(e) + ".csv", r.variable(v), kurt);
    }
    const auto& red = rep.reduced();
    for (const char* v : {"x", "E"})
      rep.curve(prefix + v + "_reduced.csv", red.variable(v), kurt);
  } else if (figure == "ct_table") {
    std::vector<std::string> rows{"x", "E"};
    for (int k = 1; k <= 10; ++k) rows.push_back("y" + std::to_string(k));
    std::map<std::string, std::vector<double>> table;
    for (double e : p.eps) {
      const auto& slow = rep.full(e);
      const auto& fast = rep.modes(e);
      for (const auto& v : rows)
        table[v].push_back(is_slow_name(v) ? slow.variable(v).ct.value : fast.variable(v).ct.value);
    }
    std::FILE* f = std::fopen((rep.dir() / "ct_table.csv").c_str(), "w");
    if (!f) throw Error("cannot write ct_table.csv");
    std::fputs("variable", f);
    for (double e : p.eps) std::fprintf(f, ",eps_%s", eps_tag(e).c_str());
    std::fputs("\n", f);
    json j = json::object();
    for (const auto& v : rows) {
      std::fputs(v.c_str(), f);
      for (double ct : table[v]) std::fprintf(f, ",%.17g", ct);
      std::fputs("\n", f);
      j[v] = table[v];
    }
    std::fclose(f);
    write_json_atomic(rep.dir() / "ct_table.json", {{"eps", p.eps}, {"ct", j}});
    rep.add_file("ct_table.csv");
    rep.add_file("ct_table.json");
    for (const auto& v : rows) {
      char buf[160];
      int len = std::snprintf(buf, sizeof buf, "%-4s", v.c_str());
      for (double ct : table[v]) len += std::snprintf(buf + len, sizeof buf - len, "  %8.4f", ct);
      out << buf << '\n';
    }
  }
  rep.finish(figure);
  out << "wrote " << rep.dir().string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic mode reduction toolkit for a multiscale triad model", "smr"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  g.config_opt = app.add_option("--config", g.config, "experiment config (JSON)");
  g.seed_opt = app.add_option("--seed", g.seed, "base seed");
  g.jobs_opt = app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  g.out_opt = app.add_option("--out", g.out, "output directory");
  app.add_flag("--paper-scale", g.paper_scale, "paper-scale presets for reproduce");

  auto* validate = app.add_subcommand("validate", "check the conservation constraints");
  std::string v_coeffs = "paper";
  double v_tol = 5e-4;
  bool v_verbose = false;
  validate->add_option("coefficients", v_coeffs, "paper | projected | coefficient JSON file");
  validate->add_option("--tol", v_tol, "residual tolerance");
  validate->add_flag("--verbose", v_verbose, "list every triad");

  auto* estimate = app.add_subcommand("estimate-m", "estimate the bath constant M");
  Flag<std::string> e_coeffs;
  Flag<double> e_level, e_T, e_dt, e_compat_T, e_compat_tol;
  Flag<std::vector<double>> e_levels;
  Flag<int> e_runs;
  std::optional<double> e_tau_cap, e_tau_fixed;
  e_coeffs.opt = estimate->add_option("--coeffs", e_coeffs.value, "paper | projected | file");
  e_level.opt = estimate->add_option("--E", e_level.value, "energy shell (default n)");
  e_levels.opt = estimate->add_option("--levels", e_levels.value,
                                      "energy shells for the rescaling check")
                     ->delimiter(',');
  e_T.opt = estimate->add_option("--T", e_T.value, "length of each bath run");
  e_runs.opt = estimate->add_option("--runs", e_runs.value, "independent bath runs")
                   ->check(CLI::PositiveNumber);
  e_dt.opt = estimate->add_option("--dt", e_dt.value, "bath time step");
  e_compat_T.opt = estimate->add_option("--compat-T", e_compat_T.value,
                                        "compatibility run length");
  e_compat_tol.opt = estimate->add_option("--compat-tol", e_compat_tol.value,
                                          "compatibility tolerance");
  estimate->add_option("--tau-cap", e_tau_cap, "largest lag searched for the cutoff");
  estimate->add_option("--tau-fixed", e_tau_fixed, "integrate C(tau) to exactly this lag");

  auto* simulate = app.add_subcommand("simulate", "run an ensemble and its statistics");
  ModelFlags s_flags;
  add_model_flags(simulate, s_flags);

  auto* stats = app.add_subcommand("stats", "recompute statistics from saved trajectories");
  std::string st_in;
  stats->add_option("--in", st_in, "directory with traj_<k>.csv files")->required();

  auto* reproduce = app.add_subcommand("reproduce", "data behind a figure or table");
  std::string figure;
  reproduce
      ->add_option("figure", figure, "fig1 | cfx_full | cfe_full | pdf_E | cf_compare | "
                                     "kurt_compare | ct_table")
      ->required()
      ->check(CLI::IsMember(
          {"fig1", "cfx_full", "cfe_full", "pdf_E", "cf_compare", "kurt_compare", "ct_table"}));
  ModelFlags r_flags;
  add_model_flags(reproduce, r_flags);
  Flag<std::vector<double>> r_eps;
  Flag<double> r_T_reduced;
  Flag<int> r_K_reduced;
  r_eps.opt = reproduce->add_option("--eps-list", r_eps.value, "epsilon values")->delimiter(',');
  r_T_reduced.opt = reproduce->add_option("--T-reduced", r_T_reduced.value,
                                          "reduced-model run length");
  r_K_reduced.opt = reproduce->add_option("--K-reduced", r_K_reduced.value,
                                          "reduced-model ensemble size");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(v_coeffs, v_tol, v_verbose, out);

    if (*estimate) {
      ExperimentConfig c = base_config(g, "out/estimate-m");
      e_coeffs.apply(c.coefficients);
      e_level.apply(c.energy_level);
      e_levels.apply(c.rescaling_levels);
      e_T.apply(c.bath_T);
      e_runs.apply(c.bath_runs);
      e_dt.apply(c.dt);
      e_compat_T.apply(c.compat_T);
      e_compat_tol.apply(c.compat_tol);
      return cmd_estimate_m(c, e_tau_cap, e_tau_fixed, out);
    }

    if (*simulate) {
      ExperimentConfig c = base_config(g, "out/simulate");
      apply_model_flags(s_flags, c);
      return cmd_simulate(c, out);
    }

    if (*stats) {
      ExperimentConfig c = base_config(g, st_in);
      return cmd_stats(st_in, c, g.config_opt->count() > 0, out);
    }

    if (*reproduce) {
      ExperimentConfig c = base_config(g, "out/" + figure);
      apply_model_flags(r_flags, c);
      c.save_trajectories = r_flags.no_trajectories.given() ? !r_flags.no_trajectories.value
                                                            : false;
      Preset p = g.paper_scale ? paper_preset() : desk_preset();
      if (r_flags.epsilon.given()) p.eps = p.eps_compare = {r_flags.epsilon.value};
      if (r_eps.given()) p.eps = p.eps_compare = r_eps.value;
      if (r_flags.T.given()) p.T_full = r_flags.T.value;
      if (r_flags.K.given()) p.K_full = p.K_reduced = r_flags.K.value;
      if (r_T_reduced.given()) p.T_reduced = r_T_reduced.value;
      if (r_K_reduced.given()) p.K_reduced = r_K_reduced.value;
      Reproducer rep(c, p, out);
      return cmd_reproduce(figure, rep, out);
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IntegrationError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace smr
