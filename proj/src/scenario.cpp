#include "gridfit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "gridfit/util.hpp"

namespace gridfit {

namespace {

using Json = nlohmann::ordered_json;

// Canonical 53-bit uniform draw, independent of the standard library's
// distribution implementations so seeds replay identically everywhere.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

}  // namespace

void ParamRange::validate(const char* name) const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw std::invalid_argument(std::string("range ") + name + " must satisfy lo <= hi");
  }
}

void AcRanges::validate() const {
  power_kw.validate("ac.power_kw");
  thermal_resistance.validate("ac.thermal_resistance");
  thermal_capacitance.validate("ac.thermal_capacitance");
  setpoint_f.validate("ac.setpoint_f");
  ambient_f.validate("ac.ambient_f");
  AcParams probe;  // worst corner: hottest setpoint against coolest ambient
  probe.power_kw = power_kw.lo;
  probe.thermal_resistance = thermal_resistance.lo;
  probe.thermal_capacitance = thermal_capacitance.lo;
  probe.efficiency = efficiency;
  probe.deadband_f = deadband_f;
  probe.setpoint_f = setpoint_f.hi;
  probe.ambient_f = ambient_f.lo;
  probe.validate();
}

void EwhRanges::validate() const {
  power_kw.validate("ewh.power_kw");
  tank_capacitance.validate("ewh.tank_capacitance");
  flow_rate.validate("ewh.flow_rate");
  loss_coeff.validate("ewh.loss_coeff");
  inlet_temp_f.validate("ewh.inlet_temp_f");
  ambient_f.validate("ewh.ambient_f");
  setpoint_f.validate("ewh.setpoint_f");
  EwhParams probe;  // worst corner: warmest inlet against coldest setpoint
  probe.power_kw = power_kw.lo;
  probe.tank_capacitance = tank_capacitance.lo;
  probe.flow_rate = flow_rate.lo;
  probe.specific_heat = specific_heat;
  probe.loss_coeff = loss_coeff.lo;
  probe.deadband_f = deadband_f;
  probe.inlet_temp_f = inlet_temp_f.hi;
  probe.ambient_f = ambient_f.lo;
  probe.setpoint_f = setpoint_f.lo;
  probe.validate();
}

void PopulationSpec::validate() const {
  if (ac_count < 0 || ewh_count < 0) {
    throw std::invalid_argument("population counts must be non-negative");
  }
  if (ac_count + ewh_count < 1) {
    throw std::invalid_argument("population must contain at least one device");
  }
  if (ac_count > 0) ac.validate();
  if (ewh_count > 0) ewh.validate();
}

const char* to_string(EventPlacement placement) {
  switch (placement) {
    case EventPlacement::Start:
      return "start";
    case EventPlacement::Middle:
      return "middle";
    default:
      return "end";
  }
}

EventPlacement event_placement_from_string(const std::string& s) {
  if (s == "start") return EventPlacement::Start;
  if (s == "middle") return EventPlacement::Middle;
  if (s == "end") return EventPlacement::End;
  throw std::invalid_argument("unknown event placement: " + s);
}

double placement_fraction(EventPlacement placement) {
  switch (placement) {
    case EventPlacement::Start:
      return 0.05;
    case EventPlacement::Middle:
      return 0.5;
    default:
      return 0.9;
  }
}

const char* to_string(AllocationMode mode) {
  return mode == AllocationMode::Priority ? "priority" : "shuffled";
}

AllocationMode allocation_mode_from_string(const std::string& s) {
  if (s == "priority") return AllocationMode::Priority;
  if (s == "shuffled") return AllocationMode::ShuffledBaseline;
  throw std::invalid_argument("unknown allocation mode: " + s);
}

void ScenarioConfig::validate() const {
  population.validate();
  under_curve.validate();
  over_curve.validate();
  if (under_curve.direction != Service::UnderFrequency ||
      over_curve.direction != Service::OverFrequency) {
    throw std::invalid_argument("band directions are fixed by their role");
  }
  if (!(commitment > 0.0) || commitment > 1.3) {
    throw std::invalid_argument("commitment must lie in (0, 1.3]");
  }
  if (!(dt_s > 0.0) || window_s < dt_s) {
    throw std::invalid_argument("window must cover at least one positive tick");
  }
  if (!(trace_dt_s > 0.0)) throw std::invalid_argument("trace_dt_s must be positive");
  if (ingest_resample_dt_s < 0.0) {
    throw std::invalid_argument("ingest_resample_dt_s must be non-negative");
  }
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (!(nadir_rearm_hz > 0.0)) throw std::invalid_argument("nadir_rearm_hz must be positive");
  event.validate();
  quality.validate();
}

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const char* context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::runtime_error("unknown config key '" + it.key() + "' in " + context);
    }
  }
}

Json range_to_json(const ParamRange& r) { return Json::array({r.lo, r.hi}); }

ParamRange range_from_json(const Json& j, const char* name, ParamRange fallback) {
  if (!j.contains(name)) return fallback;
  const Json& a = j.at(name);
  if (!a.is_array() || a.size() != 2) {
    throw std::runtime_error(std::string("config key '") + name + "' must be [lo, hi]");
  }
  return {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& cfg) {
  Json j;
  Json ac;
  ac["power_kw"] = range_to_json(cfg.population.ac.power_kw);
  ac["thermal_resistance"] = range_to_json(cfg.population.ac.thermal_resistance);
  ac["thermal_capacitance"] = range_to_json(cfg.population.ac.thermal_capacitance);
  ac["setpoint_f"] = range_to_json(cfg.population.ac.setpoint_f);
  ac["ambient_f"] = range_to_json(cfg.population.ac.ambient_f);
  ac["efficiency"] = cfg.population.ac.efficiency;
  ac["deadband_f"] = cfg.population.ac.deadband_f;
  Json ewh;
  ewh["power_kw"] = range_to_json(cfg.population.ewh.power_kw);
  ewh["tank_capacitance"] = range_to_json(cfg.population.ewh.tank_capacitance);
  ewh["flow_rate"] = range_to_json(cfg.population.ewh.flow_rate);
  ewh["specific_heat"] = cfg.population.ewh.specific_heat;
  ewh["loss_coeff"] = range_to_json(cfg.population.ewh.loss_coeff);
  ewh["inlet_temp_f"] = range_to_json(cfg.population.ewh.inlet_temp_f);
  ewh["ambient_f"] = range_to_json(cfg.population.ewh.ambient_f);
  ewh["setpoint_f"] = range_to_json(cfg.population.ewh.setpoint_f);
  ewh["deadband_f"] = cfg.population.ewh.deadband_f;
  j["population"] = Json{{"ac_count", cfg.population.ac_count},
                         {"ewh_count", cfg.population.ewh_count},
                         {"ac", ac},
                         {"ewh", ewh}};
  j["under_band"] = Json::array({cfg.under_curve.omega_l_hz, cfg.under_curve.omega_u_hz});
  j["over_band"] = Json::array({cfg.over_curve.omega_l_hz, cfg.over_curve.omega_u_hz});
  j["nominal_hz"] = cfg.under_curve.omega_0_hz;
  j["service"] = to_string(cfg.service);
  j["commitment"] = cfg.commitment;
  j["window_s"] = cfg.window_s;
  j["dt_s"] = cfg.dt_s;
  j["placement"] = to_string(cfg.placement);
  j["allocation"] = to_string(cfg.allocation);
  j["response_mode"] = to_string(cfg.response_mode);
  j["event"] = Json{{"kind", to_string(cfg.event.kind)},
                    {"nadir_deviation_hz", cfg.event.nadir_deviation_hz},
                    {"initial_rocof_hz_per_s", cfg.event.initial_rocof_hz_per_s},
                    {"recovery_tau_s", cfg.event.recovery_tau_s},
                    {"settle_offset_hz", cfg.event.settle_offset_hz}};
  j["trace_file"] = cfg.trace_file;
  j["trace_dt_s"] = cfg.trace_dt_s;
  j["ingest_resample_dt_s"] = cfg.ingest_resample_dt_s;
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  if (cfg.eps_kw) {
    j["eps_kw"] = *cfg.eps_kw;
  } else {
    j["eps_kw"] = nullptr;
  }
  j["quality"] = Json{{"beta_per_s", cfg.quality.beta_per_s}, {"delay_s", cfg.quality.delay_s}};
  j["rmvt_mode"] = to_string(cfg.rmvt_mode);
  j["nadir_rearm_hz"] = cfg.nadir_rearm_hz;
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json(const std::string& text) {
  const Json j = Json::parse(text);
  ScenarioConfig cfg;
  check_keys(j,
             {"population", "under_band", "over_band", "nominal_hz", "service", "commitment",
              "window_s", "dt_s", "placement", "allocation", "response_mode", "event",
              "trace_file", "trace_dt_s", "ingest_resample_dt_s", "runs", "seed", "eps_kw",
              "quality", "rmvt_mode", "nadir_rearm_hz"},
             "scenario");
  if (j.contains("population")) {
    const Json& p = j.at("population");
    check_keys(p, {"ac_count", "ewh_count", "ac", "ewh"}, "population");
    cfg.population.ac_count = p.value("ac_count", cfg.population.ac_count);
    cfg.population.ewh_count = p.value("ewh_count", cfg.population.ewh_count);
    if (p.contains("ac")) {
      const Json& a = p.at("ac");
      check_keys(a,
                 {"power_kw", "thermal_resistance", "thermal_capacitance", "setpoint_f",
                  "ambient_f", "efficiency", "deadband_f"},
                 "population.ac");
      AcRanges& r = cfg.population.ac;
      r.power_kw = range_from_json(a, "power_kw", r.power_kw);
      r.thermal_resistance = range_from_json(a, "thermal_resistance", r.thermal_resistance);
      r.thermal_capacitance = range_from_json(a, "thermal_capacitance", r.thermal_capacitance);
      r.setpoint_f = range_from_json(a, "setpoint_f", r.setpoint_f);
      r.ambient_f = range_from_json(a, "ambient_f", r.ambient_f);
      r.efficiency = a.value("efficiency", r.efficiency);
      r.deadband_f = a.value("deadband_f", r.deadband_f);
    }
    if (p.contains("ewh")) {
      const Json& e = p.at("ewh");
      check_keys(e,
                 {"power_kw", "tank_capacitance", "flow_rate", "specific_heat", "loss_coeff",
                  "inlet_temp_f", "ambient_f", "setpoint_f", "deadband_f"},
                 "population.ewh");
      EwhRanges& r = cfg.population.ewh;
      r.power_kw = range_from_json(e, "power_kw", r.power_kw);
      r.tank_capacitance = range_from_json(e, "tank_capacitance", r.tank_capacitance);
      r.flow_rate = range_from_json(e, "flow_rate", r.flow_rate);
      r.specific_heat = e.value("specific_heat", r.specific_heat);
      r.loss_coeff = range_from_json(e, "loss_coeff", r.loss_coeff);
      r.inlet_temp_f = range_from_json(e, "inlet_temp_f", r.inlet_temp_f);
      r.ambient_f = range_from_json(e, "ambient_f", r.ambient_f);
      r.setpoint_f = range_from_json(e, "setpoint_f", r.setpoint_f);
      r.deadband_f = e.value("deadband_f", r.deadband_f);
    }
  }
  if (j.contains("under_band")) {
    const Json& b = j.at("under_band");
    if (!b.is_array() || b.size() != 2) throw std::runtime_error("under_band must be [lo, hi]");
    cfg.under_curve.omega_l_hz = b[0].get<double>();
    cfg.under_curve.omega_u_hz = b[1].get<double>();
  }
  if (j.contains("over_band")) {
    const Json& b = j.at("over_band");
    if (!b.is_array() || b.size() != 2) throw std::runtime_error("over_band must be [lo, hi]");
    cfg.over_curve.omega_l_hz = b[0].get<double>();
    cfg.over_curve.omega_u_hz = b[1].get<double>();
  }
  if (j.contains("nominal_hz")) {
    const double nominal = j.at("nominal_hz").get<double>();
    cfg.under_curve.omega_0_hz = nominal;
    cfg.over_curve.omega_0_hz = nominal;
    cfg.event.nominal_hz = nominal;
  }
  if (j.contains("service")) cfg.service = service_from_string(j.at("service").get<std::string>());
  cfg.commitment = j.value("commitment", cfg.commitment);
  cfg.window_s = j.value("window_s", cfg.window_s);
  cfg.dt_s = j.value("dt_s", cfg.dt_s);
  if (j.contains("placement")) {
    cfg.placement = event_placement_from_string(j.at("placement").get<std::string>());
  }
  if (j.contains("allocation")) {
    cfg.allocation = allocation_mode_from_string(j.at("allocation").get<std::string>());
  }
  if (j.contains("response_mode")) {
    cfg.response_mode = response_mode_from_string(j.at("response_mode").get<std::string>());
  }
  if (j.contains("event")) {
    const Json& e = j.at("event");
    check_keys(e,
               {"kind", "nadir_deviation_hz", "initial_rocof_hz_per_s", "recovery_tau_s",
                "settle_offset_hz"},
               "event");
    if (e.contains("kind")) {
      cfg.event.kind = event_kind_from_string(e.at("kind").get<std::string>());
    }
    cfg.event.nadir_deviation_hz = e.value("nadir_deviation_hz", cfg.event.nadir_deviation_hz);
    cfg.event.initial_rocof_hz_per_s =
        e.value("initial_rocof_hz_per_s", cfg.event.initial_rocof_hz_per_s);
    cfg.event.recovery_tau_s = e.value("recovery_tau_s", cfg.event.recovery_tau_s);
    cfg.event.settle_offset_hz = e.value("settle_offset_hz", cfg.event.settle_offset_hz);
  }
  cfg.trace_file = j.value("trace_file", cfg.trace_file);
  cfg.trace_dt_s = j.value("trace_dt_s", cfg.trace_dt_s);
  cfg.ingest_resample_dt_s = j.value("ingest_resample_dt_s", cfg.ingest_resample_dt_s);
  cfg.runs = j.value("runs", cfg.runs);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("eps_kw") && !j.at("eps_kw").is_null()) {
    cfg.eps_kw = j.at("eps_kw").get<double>();
  }
  if (j.contains("quality")) {
    const Json& q = j.at("quality");
    check_keys(q, {"beta_per_s", "delay_s"}, "quality");
    cfg.quality.beta_per_s = q.value("beta_per_s", cfg.quality.beta_per_s);
    cfg.quality.delay_s = q.value("delay_s", cfg.quality.delay_s);
  }
  if (j.contains("rmvt_mode")) {
    cfg.rmvt_mode = rmvt_mode_from_string(j.at("rmvt_mode").get<std::string>());
  }
  cfg.nadir_rearm_hz = j.value("nadir_rearm_hz", cfg.nadir_rearm_hz);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << scenario_to_json(cfg);
}

namespace {

void draw_initial_state(DeviceRecord& d, std::mt19937_64& rng) {
  const double lo = std::min(d.on_trigger_f(), d.off_trigger_f());
  const double hi = std::max(d.on_trigger_f(), d.off_trigger_f());
  d.temp_f = uniform(rng, lo, hi);
  d.on = uniform(rng, 0.0, 1.0) < steady_duty_cycle(d);
  d.threshold_hz.reset();
  d.responded = false;
}

}  // namespace

std::vector<DeviceRecord> generate_population(const PopulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<DeviceRecord> out;
  out.reserve(static_cast<std::size_t>(spec.ac_count + spec.ewh_count));
  int id = 0;
  for (int i = 0; i < spec.ac_count; ++i) {
    AcParams p;
    p.power_kw = uniform(rng, spec.ac.power_kw.lo, spec.ac.power_kw.hi);
    p.thermal_resistance =
        uniform(rng, spec.ac.thermal_resistance.lo, spec.ac.thermal_resistance.hi);
    p.thermal_capacitance =
        uniform(rng, spec.ac.thermal_capacitance.lo, spec.ac.thermal_capacitance.hi);
    p.setpoint_f = uniform(rng, spec.ac.setpoint_f.lo, spec.ac.setpoint_f.hi);
    p.ambient_f = uniform(rng, spec.ac.ambient_f.lo, spec.ac.ambient_f.hi);
    p.efficiency = spec.ac.efficiency;
    p.deadband_f = spec.ac.deadband_f;
    DeviceRecord d;
    d.id = id++;
    d.params = p;
    draw_initial_state(d, rng);
    d.validate();
    out.push_back(d);
  }
  for (int i = 0; i < spec.ewh_count; ++i) {
    EwhParams p;
    p.power_kw = uniform(rng, spec.ewh.power_kw.lo, spec.ewh.power_kw.hi);
    p.tank_capacitance =
        uniform(rng, spec.ewh.tank_capacitance.lo, spec.ewh.tank_capacitance.hi);
    p.flow_rate = uniform(rng, spec.ewh.flow_rate.lo, spec.ewh.flow_rate.hi);
    p.specific_heat = spec.ewh.specific_heat;
    p.loss_coeff = uniform(rng, spec.ewh.loss_coeff.lo, spec.ewh.loss_coeff.hi);
    p.inlet_temp_f = uniform(rng, spec.ewh.inlet_temp_f.lo, spec.ewh.inlet_temp_f.hi);
    p.ambient_f = uniform(rng, spec.ewh.ambient_f.lo, spec.ewh.ambient_f.hi);
    p.setpoint_f = uniform(rng, spec.ewh.setpoint_f.lo, spec.ewh.setpoint_f.hi);
    p.deadband_f = spec.ewh.deadband_f;
    DeviceRecord d;
    d.id = id++;
    d.params = p;
    draw_initial_state(d, rng);
    d.validate();
    out.push_back(d);
  }
  return out;
}

std::vector<DeviceRecord> redraw_initial_state(std::vector<DeviceRecord> population,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (DeviceRecord& d : population) draw_initial_state(d, rng);
  return population;
}

ScenarioOutput run_scenario_with_population(const ScenarioConfig& cfg,
                                            const std::vector<DeviceRecord>& population,
                                            std::uint64_t shuffle_seed) {
  cfg.validate();
  ScenarioOutput out;
  out.population = population;
  out.reports = fitness_table(population, cfg.service, cfg.window_s, cfg.quality);
  const double capability = expected_capability_kw(out.reports, population);
  if (!(capability > 0.0)) {
    throw std::runtime_error("population offers no capability for this service");
  }
  const double requested = cfg.commitment * capability;

  const std::vector<int> order = cfg.allocation == AllocationMode::Priority
                                     ? prioritize(out.reports, population)
                                     : shuffled_order(population, shuffle_seed);
  const Selection selection = select_committed(order, population, requested, cfg.eps_kw);

  ResponseCurveSpec curve =
      cfg.service == Service::UnderFrequency ? cfg.under_curve : cfg.over_curve;
  curve.capacity_kw = requested;
  out.assignment = assign_thresholds(selection, population, out.reports, curve);

  if (!cfg.trace_file.empty()) {
    out.trace = ingest_trace(cfg.trace_file, cfg.ingest_resample_dt_s);
  } else {
    EventSpec event = cfg.event;
    event.start_time_s = placement_fraction(cfg.placement) * cfg.window_s;
    out.trace = synthesize(event, cfg.window_s, cfg.trace_dt_s);
  }

  SimConfig sim;
  sim.dt_s = cfg.dt_s;
  sim.window_s = cfg.window_s;
  sim.mode = cfg.response_mode;
  sim.trace = out.trace;
  sim.nadir_rearm_hz = cfg.nadir_rearm_hz;
  out.result = run(population, out.assignment, sim);
  return out;
}

ScenarioOutput run_scenario(const ScenarioConfig& cfg) {
  const std::vector<DeviceRecord> population =
      generate_population(cfg.population, mix_seed(cfg.seed, kPopulationSeedTag));
  return run_scenario_with_population(cfg, population, mix_seed(cfg.seed, kShuffleSeedTag));
}

std::vector<SweepRow> commitment_sweep(const ScenarioConfig& cfg,
                                       const std::vector<double>& levels) {
  cfg.validate();
  if (levels.empty()) throw std::invalid_argument("commitment_sweep: no levels");
  for (double level : levels) {
    if (!(level > 0.0) || level > 1.3) {
      throw std::invalid_argument("commitment_sweep: levels must lie in (0, 1.3]");
    }
  }
  const std::vector<DeviceRecord> base =
      generate_population(cfg.population, mix_seed(cfg.seed, kPopulationSeedTag));

  std::vector<SweepRow> rows;
  rows.reserve(levels.size());
  for (double level : levels) {
    ScenarioConfig level_cfg = cfg;
    level_cfg.commitment = level;
    std::vector<double> rmvts;
    double requested_sum = 0.0;
    double committed_sum = 0.0;
    rmvts.reserve(static_cast<std::size_t>(cfg.runs));
    // Same run seeds at every level, so rows differ only through the level.
    for (int r = 0; r < cfg.runs; ++r) {
      const std::uint64_t run_seed =
          mix_seed(mix_seed(cfg.seed, kRunSeedTag), static_cast<std::uint64_t>(r));
      const std::vector<DeviceRecord> state = redraw_initial_state(base, run_seed);
      const ScenarioOutput out =
          run_scenario_with_population(level_cfg, state, mix_seed(run_seed, kShuffleSeedTag));
      rmvts.push_back(compute_rmvt(out.result, cfg.rmvt_mode));
      requested_sum += out.assignment.requested_kw;
      committed_sum += out.assignment.committed_kw;
    }
    SweepRow row;
    row.level = level;
    row.requested_kw = requested_sum / static_cast<double>(cfg.runs);
    row.committed_kw = committed_sum / static_cast<double>(cfg.runs);
    row.mean_rmvt = mean_of(rmvts);
    row.std_rmvt = sample_std(rmvts, row.mean_rmvt);
    row.runs = cfg.runs;
    rows.push_back(row);
  }
  return rows;
}

const char* const kSweepCsvHeader = "level,requested_kw,committed_kw,mean_rmvt,std_rmvt,runs";

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = kSweepCsvHeader;
  out += '\n';
  for (const SweepRow& r : rows) {
    out += format_fixed(r.level, 6);
    out += ',' + format_fixed(r.requested_kw, 3);
    out += ',' + format_fixed(r.committed_kw, 3);
    out += ',' + format_fixed(r.mean_rmvt, 6);
    out += ',' + format_fixed(r.std_rmvt, 6);
    out += ',' + std::to_string(r.runs);
    out += '\n';
  }
  return out;
}

const char* const kMonteCarloCsvHeader =
    "window_s,placement,allocation,mean_rmvt,std_rmvt,runs";

std::string MonteCarloTable::to_csv() const {
  std::string out = kMonteCarloCsvHeader;
  out += '\n';
  for (const MonteCarloCell& c : cells) {
    out += format_general(c.window_s);
    out += ',';
    out += to_string(c.placement);
    out += ',';
    out += to_string(c.allocation);
    out += ',' + format_fixed(c.mean_rmvt, 6);
    out += ',' + format_fixed(c.std_rmvt, 6);
    out += ',' + std::to_string(c.runs);
    out += '\n';
  }
  return out;
}

MonteCarloTable montecarlo(const ScenarioConfig& cfg, int n_runs) {
  cfg.validate();
  if (n_runs < 1) throw std::invalid_argument("montecarlo: needs at least one run");
  const std::vector<double> windows = {300.0, 900.0};
  const std::vector<EventPlacement> placements = {EventPlacement::Start,
                                                  EventPlacement::Middle, EventPlacement::End};
  const std::vector<AllocationMode> allocations = {AllocationMode::Priority,
                                                   AllocationMode::ShuffledBaseline};
  const std::vector<DeviceRecord> base =
      generate_population(cfg.population, mix_seed(cfg.seed, kPopulationSeedTag));

  MonteCarloTable table;
  table.cells.reserve(windows.size() * placements.size() * allocations.size());
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    for (std::size_t pi = 0; pi < placements.size(); ++pi) {
      for (const AllocationMode allocation : allocations) {
        ScenarioConfig cell_cfg = cfg;
        cell_cfg.window_s = windows[wi];
        cell_cfg.placement = placements[pi];
        cell_cfg.allocation = allocation;
        std::vector<double> rmvts;
        rmvts.reserve(static_cast<std::size_t>(n_runs));
        for (int r = 0; r < n_runs; ++r) {
          // The run seed ignores allocation, so priority and shuffled cells
          // face identical initial states.
          const std::uint64_t cell_key = wi * placements.size() + pi;
          const std::uint64_t run_seed =
              mix_seed(mix_seed(cfg.seed, kRunSeedTag),
                       cell_key * 1000003ull + static_cast<std::uint64_t>(r));
          const std::vector<DeviceRecord> state = redraw_initial_state(base, run_seed);
          const ScenarioOutput out = run_scenario_with_population(
              cell_cfg, state, mix_seed(run_seed, kShuffleSeedTag));
          rmvts.push_back(compute_rmvt(out.result, cfg.rmvt_mode));
        }
        MonteCarloCell cell;
        cell.window_s = windows[wi];
        cell.placement = placements[pi];
        cell.allocation = allocation;
        cell.mean_rmvt = mean_of(rmvts);
        cell.std_rmvt = sample_std(rmvts, cell.mean_rmvt);
        cell.runs = n_runs;
        table.cells.push_back(cell);
      }
    }
  }
  return table;
}

}  // namespace gridfit
