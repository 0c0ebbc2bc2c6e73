#include "gridfit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "gridfit/util.hpp"

namespace gridfit {

const char* to_string(ResponseMode mode) {
  return mode == ResponseMode::Tracking ? "tracking" : "latching";
}

ResponseMode response_mode_from_string(const std::string& s) {
  if (s == "tracking") return ResponseMode::Tracking;
  if (s == "latching") return ResponseMode::Latching;
  throw std::invalid_argument("unknown response mode: " + s);
}

const char* to_string(RmvtMode mode) {
  return mode == RmvtMode::AtNadir ? "at_nadir" : "time_averaged";
}

RmvtMode rmvt_mode_from_string(const std::string& s) {
  if (s == "at_nadir") return RmvtMode::AtNadir;
  if (s == "time_averaged") return RmvtMode::TimeAveraged;
  throw std::invalid_argument("unknown rmvt mode: " + s);
}

const char* to_string(SwitchCause cause) {
  return cause == SwitchCause::Thermostat ? "thermostat" : "grid";
}

void SimConfig::validate() const {
  if (!(dt_s > 0.0) || !std::isfinite(dt_s)) {
    throw std::invalid_argument("sim dt must be positive");
  }
  if (window_s < dt_s) throw std::invalid_argument("sim window must cover at least one tick");
  const double ticks = std::round(window_s / dt_s);
  if (std::abs(ticks * dt_s - window_s) > 1e-9) {
    throw std::invalid_argument("sim window must be a whole number of ticks");
  }
  trace.validate();
  const double stride = std::round(dt_s / trace.dt_s);
  if (stride < 1.0 || std::abs(stride * trace.dt_s - dt_s) > 1e-9) {
    throw std::invalid_argument("sim dt must be a whole multiple of the trace dt");
  }
  if (ticks * stride > static_cast<double>(trace.size() - 1)) {
    throw std::invalid_argument("trace too short to cover the simulation window");
  }
  if (!(nadir_rearm_hz > 0.0)) {
    throw std::invalid_argument("nadir rearm must be positive");
  }
}

namespace {

// A device may be commanded off only while its thermostat is not demanding
// power, and on only while it is not demanding idle.
bool allows_off(const DeviceRecord& d) {
  return d.kind() == DeviceKind::Ac ? d.temp_f < d.on_trigger_f()
                                    : d.temp_f > d.on_trigger_f();
}

bool allows_on(const DeviceRecord& d) {
  return d.kind() == DeviceKind::Ac ? d.temp_f > d.off_trigger_f()
                                    : d.temp_f < d.off_trigger_f();
}

struct PendingCommand {
  std::size_t index;
  bool turn_on;
};

std::vector<NadirPoint> detect_nadirs(const SimulationResult& res, double rearm_hz) {
  const bool under = res.curve.direction == Service::UnderFrequency;
  const double edge = under ? res.curve.omega_u_hz : res.curve.omega_l_hz;
  std::vector<NadirPoint> out;
  bool armed = true;
  double high_water = 0.0;
  std::size_t peak_idx = 0;
  double low_water = 0.0;
  const auto commit = [&](std::size_t idx) {
    out.push_back({res.t_s[idx], res.freq_hz[idx], res.target_kw[idx], res.achieved_kw[idx]});
  };
  for (std::size_t k = 0; k < res.freq_hz.size(); ++k) {
    const double raw = under ? edge - res.freq_hz[k] : res.freq_hz[k] - edge;
    const double d = std::max(0.0, raw);
    if (armed) {
      if (d >= high_water) {
        high_water = d;
        peak_idx = k;
      }
      if (high_water > 0.0 && d <= high_water - rearm_hz) {
        commit(peak_idx);
        armed = false;
        low_water = d;
      }
    } else {
      low_water = std::min(low_water, d);
      if (d >= low_water + rearm_hz) {
        armed = true;
        high_water = d;
        peak_idx = k;
      }
    }
  }
  // Event still open at the end of the series.
  if (armed && high_water > 0.0) commit(peak_idx);
  return out;
}

}  // namespace

SimulationResult run(const std::vector<DeviceRecord>& population,
                     const ThresholdAssignment& assignment, const SimConfig& config) {
  config.validate();
  assignment.validate();

  std::unordered_map<int, std::size_t> index_by_id;
  index_by_id.reserve(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    population[i].validate();
    if (!index_by_id.emplace(population[i].id, i).second) {
      throw std::invalid_argument("duplicate device id " + std::to_string(population[i].id));
    }
  }

  struct Committed {
    std::size_t index;
    double threshold_hz;
  };
  std::vector<Committed> committed;
  committed.reserve(assignment.devices.size());
  for (const CommittedDevice& c : assignment.devices) {
    const auto it = index_by_id.find(c.device_id);
    if (it == index_by_id.end()) {
      throw std::invalid_argument("committed device " + std::to_string(c.device_id) +
                                  " not in population");
    }
    committed.push_back({it->second, c.threshold_hz});
  }

  // main takes grid commands; twin free-runs from the same initial state, so
  // uncommitted devices stay bitwise identical and cancel out of achieved_kw.
  std::vector<DeviceRecord> main = population;
  std::vector<DeviceRecord> twin = population;
  for (const Committed& c : committed) main[c.index].threshold_hz = c.threshold_hz;

  const std::size_t n = population.size();
  std::vector<LinearDynamics> dyn(n);
  std::vector<double> decay(n);
  for (std::size_t i = 0; i < n; ++i) {
    dyn[i] = population[i].dynamics();
    decay[i] = std::exp(-dyn[i].rate_per_s * config.dt_s);
  }

  const auto ticks = static_cast<std::size_t>(std::llround(config.window_s / config.dt_s));
  const auto stride = static_cast<std::size_t>(std::llround(config.dt_s / config.trace.dt_s));
  const bool under = assignment.curve.direction == Service::UnderFrequency;

  SimulationResult res;
  res.curve = assignment.curve;
  res.committed_capacity_kw = assignment.committed_kw;
  res.dt_s = config.dt_s;
  res.t_s.reserve(ticks + 1);
  res.freq_hz.reserve(ticks + 1);
  res.p_sigma_kw.reserve(ticks + 1);
  res.target_kw.reserve(ticks + 1);
  res.achieved_kw.reserve(ticks + 1);

  std::vector<PendingCommand> pending;
  for (std::size_t k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * config.dt_s;
    if (k > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        const bool was_on = main[i].on;
        advance_state(main[i], dyn[i], decay[i]);
        if (main[i].on != was_on) {
          res.switches.push_back({t, main[i].id, SwitchCause::Thermostat, main[i].on});
          main[i].responded = false;  // thermostat action releases the device
        }
        advance_state(twin[i], dyn[i], decay[i]);
      }
      // Commands carry one tick of latency and are re-checked against the
      // stepped state; a stale or comfort-violating command is dropped.
      for (const PendingCommand& cmd : pending) {
        DeviceRecord& dev = main[cmd.index];
        if (dev.on == cmd.turn_on) continue;
        if (cmd.turn_on ? !allows_on(dev) : !allows_off(dev)) continue;
        dev.on = cmd.turn_on;
        dev.responded = under ? !cmd.turn_on : cmd.turn_on;
        res.switches.push_back({t, dev.id, SwitchCause::Grid, dev.on});
      }
      pending.clear();
    }

    const double freq = config.trace.freq_hz[k * stride];
    double p_sigma = 0.0;
    for (const DeviceRecord& d : main) p_sigma += d.power_draw_kw();
    double achieved = 0.0;
    for (const Committed& c : committed) {
      const double diff = twin[c.index].power_draw_kw() - main[c.index].power_draw_kw();
      achieved += under ? diff : -diff;
    }
    res.t_s.push_back(t);
    res.freq_hz.push_back(freq);
    res.p_sigma_kw.push_back(p_sigma);
    res.target_kw.push_back(droop_target_kw(assignment, freq));
    res.achieved_kw.push_back(achieved);

    for (const Committed& c : committed) {
      DeviceRecord& dev = main[c.index];
      if (under) {
        if (freq <= c.threshold_hz) {
          if (dev.on && allows_off(dev)) pending.push_back({c.index, false});
        } else if (config.mode == ResponseMode::Tracking && dev.responded && !dev.on &&
                   allows_on(dev)) {
          pending.push_back({c.index, true});
        }
      } else {
        if (freq >= c.threshold_hz) {
          if (!dev.on && allows_on(dev)) pending.push_back({c.index, true});
        } else if (config.mode == ResponseMode::Tracking && dev.responded && dev.on &&
                   allows_off(dev)) {
          pending.push_back({c.index, false});
        }
      }
    }
  }

  res.nadirs = detect_nadirs(res, config.nadir_rearm_hz);
  if (!res.nadirs.empty()) res.rmvt = compute_rmvt(res, RmvtMode::AtNadir);
  return res;
}

double compute_rmvt(const SimulationResult& result, RmvtMode mode) {
  if (mode == RmvtMode::AtNadir) {
    if (result.nadirs.empty()) {
      throw std::domain_error("rmvt: no frequency events in the window");
    }
    double sum = 0.0;
    for (const NadirPoint& n : result.nadirs) {
      if (!(n.requested_kw > 0.0)) {
        throw std::domain_error("rmvt: nadir with no requested response");
      }
      sum += std::abs(1.0 - n.provided_kw / n.requested_kw);
    }
    return sum / static_cast<double>(result.nadirs.size());
  }
  const double floor_kw = 0.01 * result.committed_capacity_kw;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < result.target_kw.size(); ++k) {
    if (result.target_kw[k] > floor_kw) {
      sum += std::abs(1.0 - result.achieved_kw[k] / result.target_kw[k]);
      ++count;
    }
  }
  if (count == 0) throw std::domain_error("rmvt: no samples with active request");
  return sum / static_cast<double>(count);
}

double droop_target_kw(const ThresholdAssignment& assignment, double freq_hz) {
  const double band = assignment.curve.band_hz();
  const double frac = assignment.curve.direction == Service::UnderFrequency
                          ? (assignment.curve.omega_u_hz - freq_hz) / band
                          : (freq_hz - assignment.curve.omega_l_hz) / band;
  return std::clamp(frac, 0.0, 1.0) * assignment.committed_kw;
}

double static_shed_kw(const ThresholdAssignment& assignment, double freq_hz) {
  double total = 0.0;
  for (const CommittedDevice& d : assignment.devices) {
    const bool crossed = assignment.curve.direction == Service::UnderFrequency
                             ? d.threshold_hz >= freq_hz
                             : d.threshold_hz <= freq_hz;
    if (crossed) total += d.power_kw;
  }
  return total;
}

std::vector<DroopPoint> static_droop_sweep(const ThresholdAssignment& assignment) {
  assignment.validate();
  const bool under = assignment.curve.direction == Service::UnderFrequency;
  const double start_edge = under ? assignment.curve.omega_u_hz : assignment.curve.omega_l_hz;
  std::vector<DroopPoint> pts;
  pts.reserve(2 * assignment.devices.size() + 1);
  pts.push_back({start_edge, droop_target_kw(assignment, start_edge), 0.0});
  double prev_cum = 0.0;
  for (const CommittedDevice& d : assignment.devices) {
    const double ideal = droop_target_kw(assignment, d.threshold_hz);
    // Both sides of the jump; the gap between them is the device's rating.
    pts.push_back({d.threshold_hz, ideal, prev_cum});
    pts.push_back({d.threshold_hz, ideal, d.cumulative_kw});
    prev_cum = d.cumulative_kw;
  }
  return pts;
}

std::vector<SamplingErrorRow> evaluate_sampling_error(
    const std::vector<DeviceRecord>& population, const ThresholdAssignment& assignment,
    const FrequencyTrace& trace, const std::vector<double>& dts, double window_s) {
  if (dts.empty()) throw std::invalid_argument("evaluate_sampling_error: no tick sizes");
  trace.validate();
  const auto fine_count =
      static_cast<std::size_t>(std::floor(window_s / trace.dt_s + 1e-9)) + 1;
  if (fine_count > trace.size()) {
    throw std::invalid_argument("trace too short to cover the evaluation window");
  }

  const bool under = assignment.curve.direction == Service::UnderFrequency;
  const auto inside_band = [&](double f) {
    return f > assignment.curve.omega_l_hz && f < assignment.curve.omega_u_hz;
  };
  const auto past_near_edge = [&](double f) {
    return under ? f < assignment.curve.omega_u_hz : f > assignment.curve.omega_l_hz;
  };

  double rocof_cross = 0.0;
  bool found_cross = false;
  double max_inband_rocof = 0.0;
  for (std::size_t j = 1; j < fine_count; ++j) {
    const double f0 = trace.freq_hz[j - 1];
    const double f1 = trace.freq_hz[j];
    const double rocof = std::abs(f1 - f0) / trace.dt_s;
    if (!found_cross && past_near_edge(f1)) {
      rocof_cross = rocof;
      found_cross = true;
    }
    if (inside_band(f0) || inside_band(f1)) {
      max_inband_rocof = std::max(max_inband_rocof, rocof);
    }
  }

  std::vector<SamplingErrorRow> rows;
  rows.reserve(dts.size());
  for (double dt : dts) {
    SimConfig cfg;
    cfg.dt_s = dt;
    cfg.window_s = window_s;
    cfg.trace = trace;
    SimulationResult sim = run(population, assignment, cfg);

    // Hold the tick-rate response against the fine-grained request.
    double peak = 0.0;
    for (std::size_t j = 0; j < fine_count; ++j) {
      const double t = trace.time_at(j);
      const auto tick = std::min(sim.achieved_kw.size() - 1,
                                 static_cast<std::size_t>(std::floor(t / dt + 1e-9)));
      const double target_fine = droop_target_kw(assignment, trace.freq_hz[j]);
      peak = std::max(peak, std::abs(target_fine - sim.achieved_kw[tick]));
    }

    SamplingErrorRow row;
    row.dt_s = dt;
    row.peak_abs_error_kw = peak;
    row.peak_rel_error = peak / assignment.committed_kw;
    row.rocof_at_crossing_hz_per_s = rocof_cross;
    row.analytic_bound_rel = dt * max_inband_rocof / assignment.curve.band_hz();
    rows.push_back(row);
  }
  return rows;
}

const char* const kTimeseriesCsvHeader = "t_s,freq_hz,p_sigma_kw,target_kw,achieved_kw";
const char* const kSwitchlogCsvHeader = "t_s,device_id,cause";

std::string timeseries_to_csv(const SimulationResult& result) {
  std::string out = kTimeseriesCsvHeader;
  out += '\n';
  for (std::size_t k = 0; k < result.t_s.size(); ++k) {
    out += format_general(result.t_s[k]);
    out += ',' + format_general(result.freq_hz[k]);
    out += ',' + format_general(result.p_sigma_kw[k]);
    out += ',' + format_general(result.target_kw[k]);
    out += ',' + format_general(result.achieved_kw[k]);
    out += '\n';
  }
  return out;
}

void write_timeseries_csv(const SimulationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write timeseries file: " + path);
  out << timeseries_to_csv(result);
}

std::string switchlog_to_csv(const SimulationResult& result) {
  std::string out = kSwitchlogCsvHeader;
  out += '\n';
  for (const SwitchEvent& e : result.switches) {
    out += format_general(e.t_s);
    out += ',' + std::to_string(e.device_id);
    out += ',';
    out += to_string(e.cause);
    out += '\n';
  }
  return out;
}

void write_switchlog_csv(const SimulationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write switch log: " + path);
  out << switchlog_to_csv(result);
}

std::string summary_line(const SimulationResult& result) {
  double requested = 0.0;
  double provided = 0.0;
  for (const NadirPoint& n : result.nadirs) {
    requested += n.requested_kw;
    provided += n.provided_kw;
  }
  std::string line = "rmvt=";
  line += result.rmvt ? format_general(*result.rmvt) : "nan";
  line += ",requested_kw=" + format_general(requested);
  line += ",provided_kw=" + format_general(provided);
  line += ",events=" + std::to_string(result.nadirs.size());
  return line;
}

}  // namespace gridfit
