#include "smr/integrate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace smr {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Rk5EulerNoise: return "rk5";
    case Scheme::Rk2EulerNoise: return "rk2";
    case Scheme::EulerMaruyama: return "euler";
  }
  return "rk5";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "rk5" || s == "RK5+EulerNoise") return Scheme::Rk5EulerNoise;
  if (s == "rk2" || s == "RK2+EulerNoise") return Scheme::Rk2EulerNoise;
  if (s == "euler" || s == "EulerMaruyama") return Scheme::EulerMaruyama;
  throw ParseError("unknown integration scheme '" + s + "'");
}

void StepperConfig::validate() const {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  if (record_stride < 1) throw PreconditionError("record_stride must be >= 1");
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x736d72u};
  engine_.seed(seq);
}

TimeSeries::TimeSeries(std::vector<std::string> names, double dt_sample, double t0)
    : names_(std::move(names)), dt_sample_(dt_sample), t0_(t0) {
  if (names_.empty()) throw PreconditionError("time series needs at least one column");
  if (!(dt_sample > 0.0)) throw PreconditionError("sampling interval must be positive");
}

void TimeSeries::append(std::span<const double> row) {
  if (row.size() != width()) throw PreconditionError("row width does not match series");
  values_.insert(values_.end(), row.begin(), row.end());
}

std::vector<double> TimeSeries::column(std::size_t col) const {
  if (col >= width()) throw PreconditionError("column index out of range");
  std::vector<double> out(size());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = at(r, col);
  return out;
}

std::size_t TimeSeries::column_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw PreconditionError("no column named '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<double> TimeSeries::column(const std::string& name) const {
  return column(column_index(name));
}

TimeSeries TimeSeries::tail(std::size_t skip_rows) const {
  if (skip_rows >= size()) throw PreconditionError("cannot drop every sample of a series");
  TimeSeries out(names_, dt_sample_, time(skip_rows));
  out.seed = seed;
  out.stream_id = stream_id;
  out.values_.assign(values_.begin() + static_cast<std::ptrdiff_t>(skip_rows * width()),
                     values_.end());
  return out;
}

void TimeSeries::write_csv(const std::filesystem::path& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  std::fputs("t", f);
  for (const auto& n : names_) std::fprintf(f, ",%s", n.c_str());
  std::fputc('\n', f);
  for (std::size_t r = 0; r < size(); ++r) {
    std::fprintf(f, "%.17g", time(r));
    for (std::size_t c = 0; c < width(); ++c) std::fprintf(f, ",%.17g", at(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

TimeSeries TimeSeries::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.front() != "t")
    throw ParseError(path.string() + ": header must start with 't,'");

  std::vector<double> times;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      if (col == 0)
        times.push_back(v);
      else
        values.push_back(v);
      ++col;
    }
    if (col != header.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
  }
  if (times.empty()) throw ParseError(path.string() + ": no samples");
  const double dt = times.size() > 1 ? times[1] - times[0] : 1.0;
  TimeSeries ts(std::vector<std::string>(header.begin() + 1, header.end()), dt, times[0]);
  ts.values_ = std::move(values);
  return ts;
}

void check_state(std::span<const double> z, double t) {
  for (double v : z) {
    if (!std::isfinite(v))
      throw IntegrationError("non-finite state", t, std::vector<double>(z.begin(), z.end()));
    if (std::abs(v) > kBlowUpThreshold)
      throw IntegrationError("blow-up: component exceeds 1e12", t,
                             std::vector<double>(z.begin(), z.end()));
  }
}

std::int64_t step_count(double T, double dt) {
  return static_cast<std::int64_t>(std::floor(T / dt * (1.0 + 1e-12)));
}

}  // namespace smr
