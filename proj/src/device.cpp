#include "gridfit/device.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gridfit/util.hpp"

namespace gridfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Time for T to decay from t0 toward equilibrium eq until it reaches the
// boundary tb. +inf when the boundary is not on the forward trajectory;
// callers handle the already-at-or-past-the-trigger case themselves.
double time_to_reach(double t0, double eq, double tb, double rate_per_s) {
  const double num = t0 - eq;
  const double den = tb - eq;
  if (den == 0.0 || (num > 0.0) != (den > 0.0)) return kInf;
  const double ratio = num / den;
  // ratio < 1 puts tb on the far side of the equilibrium; decay moves away.
  if (ratio <= 1.0) return (ratio == 1.0) ? 0.0 : kInf;
  return std::log(ratio) / rate_per_s;
}

}  // namespace

const char* to_string(DeviceKind kind) {
  return kind == DeviceKind::Ac ? "ac" : "ewh";
}

DeviceKind device_kind_from_string(const std::string& s) {
  if (s == "ac") return DeviceKind::Ac;
  if (s == "ewh") return DeviceKind::Ewh;
  throw std::invalid_argument("unknown device kind: " + s);
}

void AcParams::validate() const {
  require(power_kw > 0.0, "ac power_kw must be positive");
  require(thermal_resistance > 0.0, "ac thermal_resistance must be positive");
  require(thermal_capacitance > 0.0, "ac thermal_capacitance must be positive");
  require(efficiency > 0.0, "ac efficiency must be positive");
  require(deadband_f > 0.0, "ac deadband_f must be positive");
  // Cooling only makes sense against a warmer ambient.
  require(ambient_f > setpoint_f + deadband_f / 2.0,
          "ac ambient_f must exceed the upper deadband edge");
}

void EwhParams::validate() const {
  require(power_kw > 0.0, "ewh power_kw must be positive");
  require(tank_capacitance > 0.0, "ewh tank_capacitance must be positive");
  require(flow_rate >= 0.0, "ewh flow_rate must be non-negative");
  require(specific_heat > 0.0, "ewh specific_heat must be positive");
  require(loss_coeff > 0.0, "ewh loss_coeff must be positive");
  require(deadband_f > 0.0, "ewh deadband_f must be positive");
  require(inlet_temp_f < setpoint_f - deadband_f / 2.0,
          "ewh inlet_temp_f must sit below the lower deadband edge");
}

double EwhParams::rate_per_hr() const {
  return (flow_rate * specific_heat + loss_coeff) / tank_capacitance;
}

double EwhParams::equilibrium_f(bool heater_on) const {
  const double mixing = flow_rate * specific_heat + loss_coeff;  // kW per F
  const double drive = (heater_on ? power_kw : 0.0) +
                       flow_rate * specific_heat * inlet_temp_f +
                       loss_coeff * ambient_f;  // kW
  return drive / mixing;
}

GenericDeviceParams to_generic(const AcParams& p) {
  GenericDeviceParams g;
  const double tau_s = p.thermal_resistance * p.thermal_capacitance * kSecondsPerHour;
  g.a = -1.0 / tau_s;
  g.b = p.ambient_f / tau_s;
  g.c = -p.efficiency / (p.thermal_capacitance * kSecondsPerHour);
  g.h1 = -1.0;
  g.h2 = p.setpoint_f;
  g.delta = p.deadband_f;
  g.power_rating = p.power_kw;
  return g;
}

GenericDeviceParams to_generic(const EwhParams& p) {
  GenericDeviceParams g;
  const double cap_s = p.tank_capacitance * kSecondsPerHour;  // kWh/F in kW-seconds/F
  g.a = -p.rate_per_hr() / kSecondsPerHour;
  g.b = (p.flow_rate * p.specific_heat * p.inlet_temp_f + p.loss_coeff * p.ambient_f) / cap_s;
  g.c = 1.0 / cap_s;
  g.h1 = 1.0;
  g.h2 = -p.setpoint_f;
  g.delta = p.deadband_f;
  g.power_rating = p.power_kw;
  return g;
}

DeviceKind DeviceRecord::kind() const {
  return std::holds_alternative<AcParams>(params) ? DeviceKind::Ac : DeviceKind::Ewh;
}

double DeviceRecord::power_kw() const {
  return kind() == DeviceKind::Ac ? ac()->power_kw : ewh()->power_kw;
}

double DeviceRecord::setpoint_f() const {
  return kind() == DeviceKind::Ac ? ac()->setpoint_f : ewh()->setpoint_f;
}

double DeviceRecord::deadband_f() const {
  return kind() == DeviceKind::Ac ? ac()->deadband_f : ewh()->deadband_f;
}

double DeviceRecord::on_trigger_f() const {
  // AC demands cooling at the hot edge; EWH demands heating at the cold edge.
  return kind() == DeviceKind::Ac ? setpoint_f() + deadband_f() / 2.0
                                  : setpoint_f() - deadband_f() / 2.0;
}

double DeviceRecord::off_trigger_f() const {
  return kind() == DeviceKind::Ac ? setpoint_f() - deadband_f() / 2.0
                                  : setpoint_f() + deadband_f() / 2.0;
}

LinearDynamics DeviceRecord::dynamics() const {
  LinearDynamics dyn;
  if (const AcParams* p = ac()) {
    const double tau_s = p->thermal_resistance * p->thermal_capacitance * kSecondsPerHour;
    dyn.rate_per_s = 1.0 / tau_s;
    dyn.equilibrium_off_f = p->ambient_f;
    dyn.equilibrium_on_f = p->ambient_f - p->efficiency * p->power_kw * p->thermal_resistance;
  } else {
    const EwhParams* q = ewh();
    dyn.rate_per_s = q->rate_per_hr() / kSecondsPerHour;
    dyn.equilibrium_off_f = q->equilibrium_f(false);
    dyn.equilibrium_on_f = q->equilibrium_f(true);
  }
  return dyn;
}

void DeviceRecord::validate() const {
  if (const AcParams* p = ac()) {
    p->validate();
    require(temp_f <= p->ambient_f, "ac temperature above ambient");
  } else {
    ewh()->validate();
  }
  require(std::isfinite(temp_f), "device temperature must be finite");
}

void advance_state(DeviceRecord& dev, const LinearDynamics& dyn, double decay) {
  const double eq = dyn.equilibrium(dev.on);
  dev.temp_f = eq + (dev.temp_f - eq) * decay;
  // Hysteresis, checked at the step boundary only.
  if (dev.kind() == DeviceKind::Ac) {
    if (dev.temp_f >= dev.on_trigger_f()) {
      dev.on = true;
    } else if (dev.temp_f <= dev.off_trigger_f()) {
      dev.on = false;
    }
  } else {
    if (dev.temp_f <= dev.on_trigger_f()) {
      dev.on = true;
    } else if (dev.temp_f >= dev.off_trigger_f()) {
      dev.on = false;
    }
  }
}

DeviceRecord step_device(DeviceRecord dev, double dt_s) {
  if (!std::isfinite(dev.temp_f)) {
    throw std::domain_error("step_device: non-finite device temperature");
  }
  require(dt_s > 0.0, "step_device: dt must be positive");
  const LinearDynamics dyn = dev.dynamics();
  advance_state(dev, dyn, std::exp(-dyn.rate_per_s * dt_s));
  return dev;
}

double time_to_switch_off(const DeviceRecord& dev) {
  require(dev.on, "time_to_switch_off requires an on device");
  const bool fired = dev.kind() == DeviceKind::Ac ? dev.temp_f <= dev.off_trigger_f()
                                                  : dev.temp_f >= dev.off_trigger_f();
  if (fired) return 0.0;
  const LinearDynamics dyn = dev.dynamics();
  return time_to_reach(dev.temp_f, dyn.equilibrium_on_f, dev.off_trigger_f(), dyn.rate_per_s);
}

double time_to_switch_on(const DeviceRecord& dev) {
  require(!dev.on, "time_to_switch_on requires an off device");
  const bool fired = dev.kind() == DeviceKind::Ac ? dev.temp_f >= dev.on_trigger_f()
                                                  : dev.temp_f <= dev.on_trigger_f();
  if (fired) return 0.0;
  const LinearDynamics dyn = dev.dynamics();
  return time_to_reach(dev.temp_f, dyn.equilibrium_off_f, dev.on_trigger_f(), dyn.rate_per_s);
}

OnOffSplit window_on_off_durations(const DeviceRecord& dev, double window_s) {
  require(window_s > 0.0, "window_on_off_durations: window must be positive");
  OnOffSplit split;
  if (dev.on) {
    split.on_s = std::min(window_s, time_to_switch_off(dev));
  } else {
    const double wait = time_to_switch_on(dev);
    split.on_s = wait >= window_s ? 0.0 : std::max(0.0, window_s - wait);
  }
  split.off_s = window_s - split.on_s;
  if (split.on_s < window_s / 2.0) {
    // Re-derive on_s so the pair sums to the window exactly in floating point.
    split.on_s = window_s - split.off_s;
  }
  return split;
}

double steady_duty_cycle(const DeviceRecord& dev) {
  DeviceRecord leg = dev;
  leg.on = true;
  leg.temp_f = dev.on_trigger_f();
  const double on_leg = time_to_switch_off(leg);
  leg.on = false;
  leg.temp_f = dev.off_trigger_f();
  const double off_leg = time_to_switch_on(leg);
  if (std::isinf(on_leg) && std::isinf(off_leg)) return 0.5;
  if (std::isinf(on_leg)) return 1.0;
  if (std::isinf(off_leg)) return 0.0;
  return on_leg / (on_leg + off_leg);
}

const char* const kPopulationCsvHeader =
    "id,kind,power_kw,setpoint_f,deadband_f,ambient_f,thermal_resistance,"
    "thermal_capacitance,efficiency,tank_capacitance,flow_rate,specific_heat,"
    "loss_coeff,inlet_temp_f,temp_f,on";

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_field(const std::string& s, const char* name, int line_no) {
  if (s.empty()) {
    throw std::runtime_error("population line " + std::to_string(line_no) +
                             ": missing field " + name);
  }
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw std::runtime_error("population line " + std::to_string(line_no) +
                             ": bad number for " + name);
  }
}

}  // namespace

std::string population_to_csv(const std::vector<DeviceRecord>& devices) {
  std::string out = kPopulationCsvHeader;
  out += '\n';
  for (const DeviceRecord& d : devices) {
    out += std::to_string(d.id);
    out += ',';
    out += to_string(d.kind());
    if (const AcParams* p = d.ac()) {
      out += ',' + format_general(p->power_kw);
      out += ',' + format_general(p->setpoint_f);
      out += ',' + format_general(p->deadband_f);
      out += ',' + format_general(p->ambient_f);
      out += ',' + format_general(p->thermal_resistance);
      out += ',' + format_general(p->thermal_capacitance);
      out += ',' + format_general(p->efficiency);
      out += ",,,,,";  // no tank columns for an AC
    } else {
      const EwhParams* q = d.ewh();
      out += ',' + format_general(q->power_kw);
      out += ',' + format_general(q->setpoint_f);
      out += ',' + format_general(q->deadband_f);
      out += ',' + format_general(q->ambient_f);
      out += ",,,";  // no envelope columns for an EWH
      out += ',' + format_general(q->tank_capacitance);
      out += ',' + format_general(q->flow_rate);
      out += ',' + format_general(q->specific_heat);
      out += ',' + format_general(q->loss_coeff);
      out += ',' + format_general(q->inlet_temp_f);
    }
    out += ',' + format_general(d.temp_f);
    out += ',' + std::string(d.on ? "1" : "0");
    out += '\n';
  }
  return out;
}

std::vector<DeviceRecord> population_from_csv(const std::string& text) {
  std::vector<DeviceRecord> devices;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.rfind("id,", 0) == 0) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 16) {
      throw std::runtime_error("population line " + std::to_string(line_no) +
                               ": expected 16 fields, got " + std::to_string(f.size()));
    }
    DeviceRecord d;
    d.id = static_cast<int>(parse_field(f[0], "id", line_no));
    DeviceKind kind;
    try {
      kind = device_kind_from_string(f[1]);
    } catch (const std::exception&) {
      throw std::runtime_error("population line " + std::to_string(line_no) +
                               ": unknown kind " + f[1]);
    }
    if (kind == DeviceKind::Ac) {
      AcParams p;
      p.power_kw = parse_field(f[2], "power_kw", line_no);
      p.setpoint_f = parse_field(f[3], "setpoint_f", line_no);
      p.deadband_f = parse_field(f[4], "deadband_f", line_no);
      p.ambient_f = parse_field(f[5], "ambient_f", line_no);
      p.thermal_resistance = parse_field(f[6], "thermal_resistance", line_no);
      p.thermal_capacitance = parse_field(f[7], "thermal_capacitance", line_no);
      p.efficiency = parse_field(f[8], "efficiency", line_no);
      d.params = p;
    } else {
      EwhParams q;
      q.power_kw = parse_field(f[2], "power_kw", line_no);
      q.setpoint_f = parse_field(f[3], "setpoint_f", line_no);
      q.deadband_f = parse_field(f[4], "deadband_f", line_no);
      q.ambient_f = parse_field(f[5], "ambient_f", line_no);
      q.tank_capacitance = parse_field(f[9], "tank_capacitance", line_no);
      q.flow_rate = parse_field(f[10], "flow_rate", line_no);
      q.specific_heat = parse_field(f[11], "specific_heat", line_no);
      q.loss_coeff = parse_field(f[12], "loss_coeff", line_no);
      q.inlet_temp_f = parse_field(f[13], "inlet_temp_f", line_no);
      d.params = q;
    }
    d.temp_f = parse_field(f[14], "temp_f", line_no);
    d.on = parse_field(f[15], "on", line_no) != 0.0;
    d.validate();
    devices.push_back(d);
  }
  return devices;
}

std::vector<DeviceRecord> read_population(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open population file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return population_from_csv(buf.str());
}

void write_population(const std::vector<DeviceRecord>& devices, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write population file: " + path);
  out << population_to_csv(devices);
}

}  // namespace gridfit
