#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gridfit/scenario.hpp"
#include "gridfit/util.hpp"

namespace {

using namespace gridfit;

// Raw flag values; applied to a ScenarioConfig only when the flag was seen,
// so config-file settings survive unless explicitly overridden.
struct CommonValues {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string population_path;
  std::string out_path;

  int ac_count = 0;
  int ewh_count = 0;
  std::vector<double> ac_power, ac_resistance, ac_capacitance, ac_setpoint, ac_ambient;
  double ac_efficiency = 0.0;
  double ac_deadband = 0.0;
  std::vector<double> ewh_power, ewh_tank, ewh_flow, ewh_loss, ewh_inlet, ewh_ambient,
      ewh_setpoint;
  double ewh_specific_heat = 0.0;
  double ewh_deadband = 0.0;

  std::vector<double> under_band, over_band;
  double nominal = 60.0;
  std::string service, placement, allocation, response_mode, rmvt_mode, event_kind;
  double commitment = 0.0;
  double window = 0.0;
  double dt = 0.0;
  double nadir_deviation = 0.0;
  double rocof = 0.0;
  double recovery_tau = 0.0;
  double settle_offset = 0.0;
  std::string trace_file;
  double trace_dt = 0.0;
  double ingest_resample_dt = 0.0;
  int runs = 0;
  double eps = 0.0;
  double beta = 0.0;
  double delay = 0.0;
  double nadir_rearm = 0.0;
};

void add_common_options(CLI::App* sub, CommonValues& v) {
  sub->add_option("--config", v.config_path, "Scenario config JSON; flags override its fields");
  sub->add_option("--seed", v.seed, "Master seed for all randomness")->required();
  sub->add_option("--out", v.out_path, "Output CSV path (stdout when omitted)");

  sub->add_option("--ac-count", v.ac_count, "Number of cooling loads");
  sub->add_option("--ewh-count", v.ewh_count, "Number of water heaters");
  sub->add_option("--ac-power", v.ac_power, "AC rating range, kW")->expected(2);
  sub->add_option("--ac-resistance", v.ac_resistance, "AC thermal resistance range")->expected(2);
  sub->add_option("--ac-capacitance", v.ac_capacitance, "AC thermal capacitance range")
      ->expected(2);
  sub->add_option("--ac-setpoint", v.ac_setpoint, "AC setpoint range, F")->expected(2);
  sub->add_option("--ac-ambient", v.ac_ambient, "AC ambient range, F")->expected(2);
  sub->add_option("--ac-efficiency", v.ac_efficiency, "AC coefficient of performance");
  sub->add_option("--ac-deadband", v.ac_deadband, "AC deadband width, F");
  sub->add_option("--ewh-power", v.ewh_power, "EWH rating range, kW")->expected(2);
  sub->add_option("--ewh-tank", v.ewh_tank, "EWH tank capacitance range, kWh/F")->expected(2);
  sub->add_option("--ewh-flow", v.ewh_flow, "EWH draw rate range, lb/hr")->expected(2);
  sub->add_option("--ewh-specific-heat", v.ewh_specific_heat, "Water specific heat, kWh/(lb F)");
  sub->add_option("--ewh-loss", v.ewh_loss, "EWH standing loss range, kW/F")->expected(2);
  sub->add_option("--ewh-inlet", v.ewh_inlet, "EWH inlet temperature range, F")->expected(2);
  sub->add_option("--ewh-ambient", v.ewh_ambient, "EWH ambient range, F")->expected(2);
  sub->add_option("--ewh-setpoint", v.ewh_setpoint, "EWH setpoint range, F")->expected(2);
  sub->add_option("--ewh-deadband", v.ewh_deadband, "EWH deadband width, F");

  sub->add_option("--under-band", v.under_band, "Under-frequency band: lo hi, Hz")->expected(2);
  sub->add_option("--over-band", v.over_band, "Over-frequency band: lo hi, Hz")->expected(2);
  sub->add_option("--nominal", v.nominal, "Nominal frequency, Hz");
  sub->add_option("--service", v.service, "Service direction: under|over");
  sub->add_option("--commitment", v.commitment, "Requested fraction of expected capability");
  sub->add_option("--window", v.window, "Service window, s");
  sub->add_option("--dt", v.dt, "Control tick, s");
  sub->add_option("--placement", v.placement, "Event placement: start|middle|end");
  sub->add_option("--allocation", v.allocation, "Threshold order: priority|shuffled");
  sub->add_option("--response-mode", v.response_mode, "Command policy: tracking|latching");
  sub->add_option("--event-kind", v.event_kind, "Synthetic event: under|over|cascade");
  sub->add_option("--nadir-deviation", v.nadir_deviation, "Event depth, Hz");
  sub->add_option("--rocof", v.rocof, "Peak rate of change, Hz/s");
  sub->add_option("--recovery-tau", v.recovery_tau, "Recovery time constant, s");
  sub->add_option("--settle-offset", v.settle_offset, "Post-event offset, Hz");
  sub->add_option("--trace-file", v.trace_file, "Use a recorded trace instead of synthesis");
  sub->add_option("--trace-dt", v.trace_dt, "Synthetic trace sampling, s");
  sub->add_option("--ingest-resample-dt", v.ingest_resample_dt,
                  "Resample ingested traces onto this grid, s (0 keeps native)");
  sub->add_option("--runs", v.runs, "Initial-state redraws per cell or level");
  sub->add_option("--eps", v.eps, "Explicit capacity tolerance, kW");
  sub->add_option("--beta", v.beta, "Quality decay rate, 1/s");
  sub->add_option("--delay", v.delay, "Actuation delay, s");
  sub->add_option("--rmvt-mode", v.rmvt_mode, "Error metric: at_nadir|time_averaged");
  sub->add_option("--nadir-rearm", v.nadir_rearm, "Deviation backoff that closes an event, Hz");
}

ScenarioConfig build_config(const CLI::App& sub, const CommonValues& v) {
  ScenarioConfig cfg;
  if (sub.count("--config") > 0) cfg = load_scenario(v.config_path);
  const auto has = [&sub](const char* name) { return sub.count(name) > 0; };

  cfg.seed = v.seed;
  if (has("--ac-count")) cfg.population.ac_count = v.ac_count;
  if (has("--ewh-count")) cfg.population.ewh_count = v.ewh_count;
  if (has("--ac-power")) cfg.population.ac.power_kw = {v.ac_power[0], v.ac_power[1]};
  if (has("--ac-resistance")) {
    cfg.population.ac.thermal_resistance = {v.ac_resistance[0], v.ac_resistance[1]};
  }
  if (has("--ac-capacitance")) {
    cfg.population.ac.thermal_capacitance = {v.ac_capacitance[0], v.ac_capacitance[1]};
  }
  if (has("--ac-setpoint")) cfg.population.ac.setpoint_f = {v.ac_setpoint[0], v.ac_setpoint[1]};
  if (has("--ac-ambient")) cfg.population.ac.ambient_f = {v.ac_ambient[0], v.ac_ambient[1]};
  if (has("--ac-efficiency")) cfg.population.ac.efficiency = v.ac_efficiency;
  if (has("--ac-deadband")) cfg.population.ac.deadband_f = v.ac_deadband;
  if (has("--ewh-power")) cfg.population.ewh.power_kw = {v.ewh_power[0], v.ewh_power[1]};
  if (has("--ewh-tank")) {
    cfg.population.ewh.tank_capacitance = {v.ewh_tank[0], v.ewh_tank[1]};
  }
  if (has("--ewh-flow")) cfg.population.ewh.flow_rate = {v.ewh_flow[0], v.ewh_flow[1]};
  if (has("--ewh-specific-heat")) cfg.population.ewh.specific_heat = v.ewh_specific_heat;
  if (has("--ewh-loss")) cfg.population.ewh.loss_coeff = {v.ewh_loss[0], v.ewh_loss[1]};
  if (has("--ewh-inlet")) cfg.population.ewh.inlet_temp_f = {v.ewh_inlet[0], v.ewh_inlet[1]};
  if (has("--ewh-ambient")) cfg.population.ewh.ambient_f = {v.ewh_ambient[0], v.ewh_ambient[1]};
  if (has("--ewh-setpoint")) cfg.population.ewh.setpoint_f = {v.ewh_setpoint[0], v.ewh_setpoint[1]};
  if (has("--ewh-deadband")) cfg.population.ewh.deadband_f = v.ewh_deadband;

  if (has("--under-band")) {
    cfg.under_curve.omega_l_hz = v.under_band[0];
    cfg.under_curve.omega_u_hz = v.under_band[1];
  }
  if (has("--over-band")) {
    cfg.over_curve.omega_l_hz = v.over_band[0];
    cfg.over_curve.omega_u_hz = v.over_band[1];
  }
  if (has("--nominal")) {
    cfg.under_curve.omega_0_hz = v.nominal;
    cfg.over_curve.omega_0_hz = v.nominal;
    cfg.event.nominal_hz = v.nominal;
  }
  if (has("--service")) cfg.service = service_from_string(v.service);
  if (has("--commitment")) cfg.commitment = v.commitment;
  if (has("--window")) cfg.window_s = v.window;
  if (has("--dt")) cfg.dt_s = v.dt;
  if (has("--placement")) cfg.placement = event_placement_from_string(v.placement);
  if (has("--allocation")) cfg.allocation = allocation_mode_from_string(v.allocation);
  if (has("--response-mode")) cfg.response_mode = response_mode_from_string(v.response_mode);
  if (has("--event-kind")) cfg.event.kind = event_kind_from_string(v.event_kind);
  if (has("--nadir-deviation")) cfg.event.nadir_deviation_hz = v.nadir_deviation;
  if (has("--rocof")) cfg.event.initial_rocof_hz_per_s = v.rocof;
  if (has("--recovery-tau")) cfg.event.recovery_tau_s = v.recovery_tau;
  if (has("--settle-offset")) cfg.event.settle_offset_hz = v.settle_offset;
  if (has("--trace-file")) cfg.trace_file = v.trace_file;
  if (has("--trace-dt")) cfg.trace_dt_s = v.trace_dt;
  if (has("--ingest-resample-dt")) cfg.ingest_resample_dt_s = v.ingest_resample_dt;
  if (has("--runs")) cfg.runs = v.runs;
  if (has("--eps")) cfg.eps_kw = v.eps;
  if (has("--beta")) cfg.quality.beta_per_s = v.beta;
  if (has("--delay")) cfg.quality.delay_s = v.delay;
  if (has("--rmvt-mode")) cfg.rmvt_mode = rmvt_mode_from_string(v.rmvt_mode);
  if (has("--nadir-rearm")) cfg.nadir_rearm_hz = v.nadir_rearm;
  cfg.validate();
  return cfg;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write output file: " + out_path);
  out << text;
}

std::vector<DeviceRecord> obtain_population(const ScenarioConfig& cfg,
                                            const std::string& population_path) {
  if (!population_path.empty()) return read_population(population_path);
  return generate_population(cfg.population, mix_seed(cfg.seed, kPopulationSeedTag));
}

double total_rating_kw(const std::vector<DeviceRecord>& devices) {
  double total = 0.0;
  for (const DeviceRecord& d : devices) total += d.power_kw();
  return total;
}

void run_generate(const ScenarioConfig& cfg, const CommonValues& v) {
  const std::vector<DeviceRecord> population =
      generate_population(cfg.population, mix_seed(cfg.seed, kPopulationSeedTag));
  emit(v.out_path, population_to_csv(population));
  int acs = 0;
  for (const DeviceRecord& d : population) acs += d.kind() == DeviceKind::Ac ? 1 : 0;
  std::cerr << "devices=" << population.size() << " ac=" << acs
            << " ewh=" << population.size() - static_cast<std::size_t>(acs)
            << " rating_kw=" << format_fixed(total_rating_kw(population), 3) << '\n';
}

void run_fitness(const ScenarioConfig& cfg, const CommonValues& v) {
  const std::vector<DeviceRecord> population = obtain_population(cfg, v.population_path);
  const std::vector<FitnessReport> reports =
      fitness_table(population, cfg.service, cfg.window_s, cfg.quality);
  emit(v.out_path, fitness_to_csv(reports));
  std::cerr << "devices=" << population.size() << " service=" << to_string(cfg.service)
            << " capability_kw=" << format_fixed(expected_capability_kw(reports, population), 3)
            << " guaranteed_kw=" << format_fixed(max_guaranteed_capacity(reports, population), 3)
            << '\n';
}

ThresholdAssignment allocate_for(const ScenarioConfig& cfg,
                                 const std::vector<DeviceRecord>& population) {
  const std::vector<FitnessReport> reports =
      fitness_table(population, cfg.service, cfg.window_s, cfg.quality);
  const double requested = cfg.commitment * expected_capability_kw(reports, population);
  const std::vector<int> order =
      cfg.allocation == AllocationMode::Priority
          ? prioritize(reports, population)
          : shuffled_order(population, mix_seed(cfg.seed, kShuffleSeedTag));
  const Selection selection = select_committed(order, population, requested, cfg.eps_kw);
  ResponseCurveSpec curve =
      cfg.service == Service::UnderFrequency ? cfg.under_curve : cfg.over_curve;
  curve.capacity_kw = requested;
  return assign_thresholds(selection, population, reports, curve);
}

void run_allocate(const ScenarioConfig& cfg, const CommonValues& v) {
  const std::vector<DeviceRecord> population = obtain_population(cfg, v.population_path);
  const ThresholdAssignment assignment = allocate_for(cfg, population);
  emit(v.out_path, assignment_to_csv(assignment));
  std::cerr << "requested_kw=" << format_fixed(assignment.requested_kw, 3)
            << " committed_kw=" << format_fixed(assignment.committed_kw, 3)
            << " error_kw=" << format_fixed(assignment.capacity_error_kw, 3)
            << " within_tolerance=" << (assignment.within_tolerance ? 1 : 0)
            << " devices=" << assignment.devices.size()
            << " success=" << format_fixed(assignment.success_probability, 6)
            << " failure_lb=" << format_fixed(assignment.failure_probability_lower_bound, 6)
            << " error_bound=" << format_fixed(discrete_error_bound(assignment), 6) << '\n';
}

struct SimOutputs {
  std::string switch_log_path;
  std::string trace_out_path;
  std::string assignment_out_path;
  std::string fitness_out_path;
};

void run_simulate(const ScenarioConfig& cfg, const CommonValues& v, const SimOutputs& so) {
  const std::vector<DeviceRecord> population = obtain_population(cfg, v.population_path);
  const ScenarioOutput out =
      run_scenario_with_population(cfg, population, mix_seed(cfg.seed, kShuffleSeedTag));
  emit(v.out_path, timeseries_to_csv(out.result));
  if (!so.switch_log_path.empty()) write_switchlog_csv(out.result, so.switch_log_path);
  if (!so.trace_out_path.empty()) write_trace_csv(out.trace, so.trace_out_path);
  if (!so.assignment_out_path.empty()) write_assignment_csv(out.assignment, so.assignment_out_path);
  if (!so.fitness_out_path.empty()) write_fitness_csv(out.reports, so.fitness_out_path);
  std::cerr << summary_line(out.result) << '\n';
}

void run_sweep(const ScenarioConfig& cfg, const CommonValues& v,
               const std::vector<double>& levels) {
  const std::vector<SweepRow> rows = commitment_sweep(cfg, levels);
  emit(v.out_path, sweep_to_csv(rows));
  std::cerr << "levels=" << rows.size() << " runs_per_level=" << cfg.runs << '\n';
}

void run_montecarlo(const ScenarioConfig& cfg, const CommonValues& v) {
  const MonteCarloTable table = montecarlo(cfg, cfg.runs);
  emit(v.out_path, table.to_csv());
  std::cerr << "cells=" << table.cells.size() << " runs_per_cell=" << cfg.runs << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fitness-prioritized frequency response for thermostatic fleets"};
  app.require_subcommand(1);

  CommonValues v;
  SimOutputs so;
  std::vector<double> levels{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.1, 1.2};

  CLI::App* c_generate =
      app.add_subcommand("generate", "Draw a device population and write it as CSV");
  CLI::App* c_fitness =
      app.add_subcommand("fitness", "Rate device availability for a service window");
  CLI::App* c_allocate =
      app.add_subcommand("allocate", "Select committed devices and assign thresholds");
  CLI::App* c_simulate =
      app.add_subcommand("simulate", "Run one event simulation and write the timeseries");
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "Sweep commitment levels and report tracking error");
  CLI::App* c_montecarlo =
      app.add_subcommand("montecarlo", "Window x placement x allocation error study");

  for (CLI::App* sub : {c_generate, c_fitness, c_allocate, c_simulate, c_sweep, c_montecarlo}) {
    add_common_options(sub, v);
  }
  for (CLI::App* sub : {c_fitness, c_allocate, c_simulate}) {
    sub->add_option("--population", v.population_path,
                    "Device population CSV (generated from the seed when omitted)");
  }
  c_simulate->add_option("--switch-log", so.switch_log_path, "Write switch events CSV here");
  c_simulate->add_option("--trace-out", so.trace_out_path, "Write the frequency trace CSV here");
  c_simulate->add_option("--assignment-out", so.assignment_out_path,
                         "Write the threshold assignment CSV here");
  c_simulate->add_option("--fitness-out", so.fitness_out_path, "Write the fitness CSV here");
  c_sweep->add_option("--levels", levels, "Commitment fractions to sweep")->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const ScenarioConfig cfg = build_config(*sub, v);
    if (sub == c_generate) {
      run_generate(cfg, v);
    } else if (sub == c_fitness) {
      run_fitness(cfg, v);
    } else if (sub == c_allocate) {
      run_allocate(cfg, v);
    } else if (sub == c_simulate) {
      run_simulate(cfg, v, so);
    } else if (sub == c_sweep) {
      run_sweep(cfg, v, levels);
    } else {
      run_montecarlo(cfg, v);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
