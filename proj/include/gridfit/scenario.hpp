#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridfit/simulation.hpp"

namespace gridfit {

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;

  void validate(const char* name) const;
};

// Envelope parameter ranges for generated cooling loads. Efficiency and
// deadband are held fixed across the fleet.
struct AcRanges {
  ParamRange power_kw{5.5, 6.5};
  ParamRange thermal_resistance{2.0, 2.4};
  ParamRange thermal_capacitance{3.24, 3.96};
  ParamRange setpoint_f{70.0, 74.0};
  ParamRange ambient_f{80.0, 95.0};
  double efficiency = 2.5;
  double deadband_f = 2.0;

  void validate() const;
};

// Tank parameter ranges for generated water heaters. Zero draw by default, so
// the only load on the tank is standing loss.
struct EwhRanges {
  ParamRange power_kw{4.0, 5.0};
  ParamRange tank_capacitance{0.115, 0.20};
  ParamRange flow_rate{0.0, 0.0};
  double specific_heat = 2.93e-4;
  ParamRange loss_coeff{8e-4, 1.2e-3};
  ParamRange inlet_temp_f{55.0, 65.0};
  ParamRange ambient_f{65.0, 75.0};
  ParamRange setpoint_f{120.0, 130.0};
  double deadband_f = 4.0;

  void validate() const;
};

struct PopulationSpec {
  int ac_count = 200;
  int ewh_count = 200;
  AcRanges ac;
  EwhRanges ewh;

  void validate() const;
};

enum class EventPlacement { Start, Middle, End };

const char* to_string(EventPlacement placement);
EventPlacement event_placement_from_string(const std::string& s);

// Fraction of the window at which the event launches.
double placement_fraction(EventPlacement placement);

enum class AllocationMode { Priority, ShuffledBaseline };

const char* to_string(AllocationMode mode);
AllocationMode allocation_mode_from_string(const std::string& s);

// Everything needed to reproduce a study end to end. All randomness hangs off
// seed; equal configs give byte-identical outputs.
struct ScenarioConfig {
  PopulationSpec population;
  ResponseCurveSpec under_curve{Service::UnderFrequency, 59.7, 59.995, 60.0, 0.0};
  ResponseCurveSpec over_curve{Service::OverFrequency, 60.005, 60.3, 60.0, 0.0};
  Service service = Service::UnderFrequency;
  double commitment = 0.6;  // requested fraction of expected capability
  double window_s = 300.0;
  double dt_s = 1.0;
  EventPlacement placement = EventPlacement::Middle;
  AllocationMode allocation = AllocationMode::Priority;
  ResponseMode response_mode = ResponseMode::Tracking;
  EventSpec event{EventKind::Cascade, 0.0, 0.36, 0.10, 2.5, 0.12, 60.0};
  std::string trace_file;  // when set, replaces the synthetic event
  double trace_dt_s = 0.5;
  double ingest_resample_dt_s = 0.0;  // 0 keeps the file's native grid
  int runs = 30;
  std::uint64_t seed = 1;
  std::optional<double> eps_kw;
  QualityParams quality;
  RmvtMode rmvt_mode = RmvtMode::AtNadir;
  double nadir_rearm_hz = 0.05;

  void validate() const;
};

std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

// Sub-seed tags; see mix_seed.
inline constexpr std::uint64_t kPopulationSeedTag = 1;
inline constexpr std::uint64_t kRunSeedTag = 2;
inline constexpr std::uint64_t kShuffleSeedTag = 3;

// Draws device parameters and an initial state. ACs come first, ids are
// sequential from zero.
std::vector<DeviceRecord> generate_population(const PopulationSpec& spec, std::uint64_t seed);

// Fresh temperatures and switch states for an existing fleet: temperature
// uniform over the deadband, on with the device's steady duty cycle.
std::vector<DeviceRecord> redraw_initial_state(std::vector<DeviceRecord> population,
                                               std::uint64_t seed);

struct ScenarioOutput {
  std::vector<DeviceRecord> population;  // state the run started from
  std::vector<FitnessReport> reports;
  ThresholdAssignment assignment;
  FrequencyTrace trace;
  SimulationResult result;
};

// One full pass: rate, allocate, synthesize or ingest the trace, simulate.
ScenarioOutput run_scenario_with_population(const ScenarioConfig& cfg,
                                            const std::vector<DeviceRecord>& population,
                                            std::uint64_t shuffle_seed);

// Convenience wrapper that also generates the population from cfg.seed.
ScenarioOutput run_scenario(const ScenarioConfig& cfg);

struct SweepRow {
  double level = 0.0;
  double requested_kw = 0.0;  // mean across runs
  double committed_kw = 0.0;  // mean across runs
  double mean_rmvt = 0.0;
  double std_rmvt = 0.0;
  int runs = 0;
};

// Re-runs the scenario at each commitment level with paired initial-state
// seeds, so differences between levels are not clouded by redraw noise.
std::vector<SweepRow> commitment_sweep(const ScenarioConfig& cfg,
                                       const std::vector<double>& levels);

extern const char* const kSweepCsvHeader;

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

struct MonteCarloCell {
  double window_s = 0.0;
  EventPlacement placement = EventPlacement::Start;
  AllocationMode allocation = AllocationMode::Priority;
  double mean_rmvt = 0.0;
  double std_rmvt = 0.0;
  int runs = 0;
};

struct MonteCarloTable {
  std::vector<MonteCarloCell> cells;

  // Fixed six-decimal formatting so equal studies emit identical bytes.
  std::string to_csv() const;
};

extern const char* const kMonteCarloCsvHeader;

// Full factorial study: windows {300, 900} x placements {start, middle, end}
// x allocations {priority, shuffled}, n_runs initial-state redraws per cell.
// Priority and shuffled cells share run seeds.
MonteCarloTable montecarlo(const ScenarioConfig& cfg, int n_runs);

}  // namespace gridfit
