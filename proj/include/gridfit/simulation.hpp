#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridfit/allocation.hpp"
#include "gridfit/trace.hpp"

namespace gridfit {

// Tracking restores a responded device once frequency recovers past its
// threshold; Latching holds the command for the rest of the window.
enum class ResponseMode { Tracking, Latching };

const char* to_string(ResponseMode mode);
ResponseMode response_mode_from_string(const std::string& s);

enum class RmvtMode { AtNadir, TimeAveraged };

const char* to_string(RmvtMode mode);
RmvtMode rmvt_mode_from_string(const std::string& s);

enum class SwitchCause { Thermostat, Grid };

const char* to_string(SwitchCause cause);

struct SwitchEvent {
  double t_s = 0.0;
  int device_id = 0;
  SwitchCause cause = SwitchCause::Thermostat;
  bool turned_on = false;
};

struct NadirPoint {
  double t_s = 0.0;
  double freq_hz = 0.0;
  double requested_kw = 0.0;
  double provided_kw = 0.0;
};

struct SimConfig {
  double dt_s = 1.0;
  double window_s = 300.0;
  ResponseMode mode = ResponseMode::Tracking;
  FrequencyTrace trace;
  double nadir_rearm_hz = 0.05;  // deviation must back off this far to close an event

  void validate() const;
};

struct SimulationResult {
  std::vector<double> t_s;
  std::vector<double> freq_hz;
  std::vector<double> p_sigma_kw;   // aggregate draw of the responsive population
  std::vector<double> target_kw;    // droop response the curve asks for
  std::vector<double> achieved_kw;  // relief vs the uncontrolled twin population
  std::vector<SwitchEvent> switches;
  std::vector<NadirPoint> nadirs;
  std::optional<double> rmvt;  // at-nadir value, present when events occurred
  ResponseCurveSpec curve;
  double committed_capacity_kw = 0.0;
  double dt_s = 0.0;
};

// Steps the population against the trace, actuating committed devices at
// their thresholds with a one-tick command latency. End-use always wins:
// commands that would push a device past its comfort band are dropped, and
// thermostat action overrides any standing command.
SimulationResult run(const std::vector<DeviceRecord>& population,
                     const ThresholdAssignment& assignment, const SimConfig& config);

// Relative mismatch between requested and provided response. AtNadir averages
// over detected events; TimeAveraged averages over samples where the curve
// requests more than 1% of committed capacity. Throws when no data qualifies.
double compute_rmvt(const SimulationResult& result, RmvtMode mode);

// Ideal droop line through the band, clamped to [0, committed].
double droop_target_kw(const ThresholdAssignment& assignment, double freq_hz);

// Capacity shed at freq_hz when every committed device responds: the sum of
// ratings whose thresholds have been crossed.
double static_shed_kw(const ThresholdAssignment& assignment, double freq_hz);

struct DroopPoint {
  double freq_hz = 0.0;
  double ideal_kw = 0.0;
  double staircase_kw = 0.0;
};

// Corner points of the designed staircase: both sides of every threshold plus
// the band edge where response begins. Deviation from the ideal line is
// extremal at these corners.
std::vector<DroopPoint> static_droop_sweep(const ThresholdAssignment& assignment);

struct SamplingErrorRow {
  double dt_s = 0.0;
  double peak_abs_error_kw = 0.0;
  double peak_rel_error = 0.0;
  double rocof_at_crossing_hz_per_s = 0.0;
  double analytic_bound_rel = 0.0;  // dt * max in-band rocof / band width
};

// Measures how coarsening the control tick degrades tracking: the simulated
// response is held against the fine-grained target between ticks.
std::vector<SamplingErrorRow> evaluate_sampling_error(
    const std::vector<DeviceRecord>& population, const ThresholdAssignment& assignment,
    const FrequencyTrace& trace, const std::vector<double>& dts, double window_s);

extern const char* const kTimeseriesCsvHeader;
extern const char* const kSwitchlogCsvHeader;

std::string timeseries_to_csv(const SimulationResult& result);
void write_timeseries_csv(const SimulationResult& result, const std::string& path);

std::string switchlog_to_csv(const SimulationResult& result);
void write_switchlog_csv(const SimulationResult& result, const std::string& path);

// One-line digest: rmvt, summed nadir request and provision, event count.
std::string summary_line(const SimulationResult& result);

}  // namespace gridfit
