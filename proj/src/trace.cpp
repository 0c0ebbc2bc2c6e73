#include "gridfit/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gridfit/util.hpp"

namespace gridfit {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double FrequencyTrace::sample_at_time(double t_s) const {
  const double idx = t_s / dt_s;
  const auto i = static_cast<long long>(std::llround(idx));
  if (i < 0 || static_cast<std::size_t>(i) >= freq_hz.size()) {
    throw std::out_of_range("trace lookup outside series");
  }
  if (std::abs(static_cast<double>(i) * dt_s - t_s) > 1e-9) {
    throw std::invalid_argument("trace lookup off the sample grid");
  }
  return freq_hz[static_cast<std::size_t>(i)];
}

void FrequencyTrace::validate() const {
  require(std::isfinite(dt_s) && dt_s > 0.0, "trace dt must be positive");
  require(freq_hz.size() >= 2, "trace needs at least two samples");
  for (double f : freq_hz) {
    require(std::isfinite(f) && f >= 55.0 && f <= 65.0,
            "trace sample outside the plausible 55..65 Hz range");
  }
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::UnderFreq:
      return "under";
    case EventKind::OverFreq:
      return "over";
    default:
      return "cascade";
  }
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "under") return EventKind::UnderFreq;
  if (s == "over") return EventKind::OverFreq;
  if (s == "cascade") return EventKind::Cascade;
  throw std::invalid_argument("unknown event kind: " + s);
}

void EventSpec::validate() const {
  require(std::isfinite(nominal_hz) && nominal_hz >= 55.0 && nominal_hz <= 65.0,
          "event nominal_hz outside the plausible 55..65 Hz range");
  require(std::isfinite(start_time_s) && start_time_s >= 0.0,
          "event start_time_s must be non-negative");
  require(std::isfinite(nadir_deviation_hz) && nadir_deviation_hz >= 0.0,
          "event nadir_deviation_hz must be non-negative");
  if (nadir_deviation_hz == 0.0) return;
  require(nominal_hz - nadir_deviation_hz >= 55.0 && nominal_hz + nadir_deviation_hz <= 65.0,
          "event nadir leaves the plausible 55..65 Hz range");
  require(initial_rocof_hz_per_s > 0.0, "event initial_rocof must be positive");
  require(recovery_tau_s > 0.0, "event recovery_tau must be positive");
  require(settle_offset_hz >= 0.0 && settle_offset_hz < nadir_deviation_hz,
          "event settle_offset must lie in [0, nadir_deviation)");
  if ((nadir_deviation_hz - settle_offset_hz) / recovery_tau_s > initial_rocof_hz_per_s) {
    throw std::invalid_argument(
        "inconsistent event shape: recovery slope (nadir_deviation - settle_offset) / "
        "recovery_tau exceeds initial_rocof");
  }
}

double dip_pulse(double u) { return 1.0 - (1.0 + u) * std::exp(-u); }

namespace {

// Writes base + amp * pulse into dev[start..start+n_j], rescaled so the
// junction sample equals depth exactly. Returns the junction index.
std::size_t fill_dip(std::vector<double>& dev, std::size_t start, double base, double depth,
                     double rocof, double dt_s) {
  const double amp0 = (depth - base) / dip_pulse(kDipShapeSpan);
  const double tau_d = amp0 / (std::exp(1.0) * rocof);  // peak pulse slope is amp/(e*tau)
  const auto n_j = static_cast<std::size_t>(
      std::max(1.0, std::ceil(kDipShapeSpan * tau_d / dt_s - 1e-9)));
  const double u_end = static_cast<double>(n_j) * dt_s / tau_d;
  const double amp = (depth - base) / dip_pulse(u_end);
  for (std::size_t k = 0; k <= n_j && start + k < dev.size(); ++k) {
    dev[start + k] = base + amp * dip_pulse(static_cast<double>(k) * dt_s / tau_d);
  }
  return start + n_j;
}

void fill_recovery(std::vector<double>& dev, std::size_t junction, std::size_t count,
                   double from, double settle, double tau_s, double dt_s) {
  for (std::size_t k = 1; k <= count && junction + k < dev.size(); ++k) {
    dev[junction + k] =
        settle + (from - settle) * std::exp(-static_cast<double>(k) * dt_s / tau_s);
  }
}

}  // namespace

FrequencyTrace synthesize(const EventSpec& spec, double duration_s, double dt_s) {
  spec.validate();
  require(std::isfinite(dt_s) && dt_s > 0.0, "synthesize: dt must be positive");
  require(std::isfinite(duration_s) && duration_s >= dt_s,
          "synthesize: duration must cover at least one step");

  const auto n = static_cast<std::size_t>(std::floor(duration_s / dt_s + 1e-9)) + 1;
  FrequencyTrace trace;
  trace.dt_s = dt_s;
  trace.freq_hz.assign(n, spec.nominal_hz);
  if (spec.nadir_deviation_hz == 0.0) return trace;

  require(duration_s >= spec.start_time_s + 5.0 * spec.recovery_tau_s,
          "synthesize: trace too short to hold the event and its recovery");

  const auto i0 = static_cast<std::size_t>(
      std::max(0.0, std::ceil(spec.start_time_s / dt_s - 1e-9)));
  if (i0 >= n) return trace;

  const double depth = spec.nadir_deviation_hz;
  const double settle = spec.settle_offset_hz;
  const double tau = spec.recovery_tau_s;

  std::vector<double> dev(n, 0.0);
  const std::size_t j1 = fill_dip(dev, i0, 0.0, depth, spec.initial_rocof_hz_per_s, dt_s);
  if (spec.kind == EventKind::Cascade) {
    const auto n_rec =
        static_cast<std::size_t>(std::max(1.0, std::round(5.0 * tau / dt_s)));
    fill_recovery(dev, j1, n_rec - 1, depth, settle, tau, dt_s);
    // Second dip launches from the partially recovered level.
    const double level = settle + (depth - settle) * std::exp(-static_cast<double>(n_rec) * dt_s / tau);
    const std::size_t j2 =
        fill_dip(dev, j1 + n_rec, level, depth, spec.initial_rocof_hz_per_s, dt_s);
    fill_recovery(dev, j2, n, depth, settle, tau, dt_s);
  } else {
    fill_recovery(dev, j1, n, depth, settle, tau, dt_s);
  }

  const double sign = spec.kind == EventKind::OverFreq ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    trace.freq_hz[i] = spec.nominal_hz + sign * dev[i];
  }
  trace.validate();
  return trace;
}

namespace {

struct RawPoint {
  double t;
  double f;
};

std::vector<RawPoint> read_raw_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<RawPoint> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t_field;
    std::string f_field;
    if (!std::getline(row, t_field, ',') || !std::getline(row, f_field)) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": expected time_s,freq_hz");
    }
    try {
      points.push_back({std::stod(t_field), std::stod(f_field)});
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": cannot parse numbers");
    }
  }
  if (points.size() < 2) {
    throw std::runtime_error("trace file needs at least two samples: " + path);
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].t <= points[i - 1].t) {
      throw std::runtime_error("trace times must be strictly increasing: " + path);
    }
  }
  return points;
}

}  // namespace

FrequencyTrace ingest_trace(const std::string& path, double resample_dt_s) {
  if (resample_dt_s < 0.0) {
    throw std::invalid_argument("ingest_trace: resample dt must be non-negative");
  }
  std::vector<RawPoint> points = read_raw_trace(path);
  const double t0 = points[0].t;
  for (RawPoint& p : points) p.t -= t0;

  double min_gap = points[1].t;
  bool uniform = true;
  const double gap0 = points[1].t - points[0].t;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double gap = points[i].t - points[i - 1].t;
    min_gap = std::min(min_gap, gap);
    if (std::abs(gap - gap0) > 1e-9) uniform = false;
  }

  FrequencyTrace trace;
  if (uniform && (resample_dt_s == 0.0 || std::abs(resample_dt_s - gap0) <= 1e-9)) {
    trace.dt_s = gap0;
    trace.freq_hz.reserve(points.size());
    for (const RawPoint& p : points) trace.freq_hz.push_back(p.f);
  } else {
    const double dt = resample_dt_s > 0.0 ? resample_dt_s : min_gap;
    const double span = points.back().t;
    const auto n = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;
    trace.dt_s = dt;
    trace.freq_hz.reserve(n);
    std::size_t seg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double t = std::min(static_cast<double>(j) * dt, span);
      while (seg + 2 < points.size() && points[seg + 1].t < t) ++seg;
      const RawPoint& a = points[seg];
      const RawPoint& b = points[seg + 1];
      const double alpha = (t - a.t) / (b.t - a.t);
      trace.freq_hz.push_back(a.f + alpha * (b.f - a.f));
    }
  }
  trace.validate();
  return trace;
}

const char* const kTraceCsvHeader = "time_s,freq_hz";

std::string trace_to_csv(const FrequencyTrace& trace) {
  std::string out = kTraceCsvHeader;
  out += '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += format_general(trace.time_at(i));
    out += ',' + format_general(trace.freq_hz[i]);
    out += '\n';
  }
  return out;
}

void write_trace_csv(const FrequencyTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << trace_to_csv(trace);
}

}  // namespace gridfit
