// Switching thermostatic load models: air conditioners and electric water
// heaters with hysteresis deadbands, exact exponential stepping, and
// closed-form residence times.
#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gridfit {

inline constexpr double kSecondsPerHour = 3600.0;

enum class DeviceKind { Ac, Ewh };

const char* to_string(DeviceKind kind);
DeviceKind device_kind_from_string(const std::string& s);

// Air conditioner. Thermal capacitance is in kWh/F and resistance in F/kW,
// so capacitance * resistance is a time constant in hours; all public time
// arguments are seconds and the conversion happens inside the dynamics.
struct AcParams {
  double power_kw = 6.0;
  double thermal_resistance = 2.2;    // F per kW
  double thermal_capacitance = 3.6;   // kWh per F
  double efficiency = 2.5;            // coefficient of performance
  double setpoint_f = 72.0;
  double deadband_f = 2.0;
  double ambient_f = 90.0;            // outdoor air temperature

  void validate() const;
};

// Electric water heater. Flow is a hot water draw in lb/hr with the matching
// specific heat in kWh/(lb F); the loss coefficient and draw together set a
// per-hour decay rate, converted to seconds inside the dynamics.
struct EwhParams {
  double power_kw = 4.5;
  double tank_capacitance = 0.16;     // kWh per F
  double flow_rate = 0.0;             // lb per hr
  double specific_heat = 2.93e-4;     // kWh per (lb F)
  double loss_coeff = 1.0e-3;         // kW per F
  double inlet_temp_f = 60.0;
  double ambient_f = 70.0;            // indoor air around the tank
  double setpoint_f = 125.0;
  double deadband_f = 4.0;

  void validate() const;
  double rate_per_hr() const;                 // (flow*c_p + loss)/capacitance
  double equilibrium_f(bool heater_on) const; // b(s)/a
};

// Both device kinds reduce to dT/dt = -rate * (T - equilibrium(state)).
struct LinearDynamics {
  double rate_per_s = 0.0;
  double equilibrium_on_f = 0.0;
  double equilibrium_off_f = 0.0;

  double equilibrium(bool on) const { return on ? equilibrium_on_f : equilibrium_off_f; }
};

// Generic switching-load form dx/dt = a*x + b + c*p with the hysteresis
// output y = h1*x + h2 and deadband delta. Both concrete models map onto it;
// there is no separate generic simulation path.
struct GenericDeviceParams {
  double a = 0.0;             // 1/s
  double b = 0.0;             // F/s
  double c = 0.0;             // F/(s kW)
  double h1 = 0.0;            // +/-1
  double h2 = 0.0;
  double delta = 0.0;         // deadband width, F
  double power_rating = 0.0;  // kW
};

GenericDeviceParams to_generic(const AcParams& p);
GenericDeviceParams to_generic(const EwhParams& p);

struct DeviceRecord {
  int id = 0;
  std::variant<AcParams, EwhParams> params = AcParams{};
  double temp_f = 72.0;
  bool on = false;
  std::optional<double> threshold_hz;  // set while committed to a response band
  bool responded = false;              // true while grid-switched away from baseline

  DeviceKind kind() const;
  const AcParams* ac() const { return std::get_if<AcParams>(&params); }
  const EwhParams* ewh() const { return std::get_if<EwhParams>(&params); }

  double power_kw() const;
  double power_draw_kw() const { return on ? power_kw() : 0.0; }
  double setpoint_f() const;
  double deadband_f() const;

  // Edge at which the thermostat forces the device on (AC: hot edge,
  // EWH: cold edge) and the opposite edge where it forces it off.
  double on_trigger_f() const;
  double off_trigger_f() const;

  LinearDynamics dynamics() const;
  void validate() const;
};

// Advances one step with exogenous conditions held constant, then applies the
// hysteresis rule at the step boundary. Exact for the linear dynamics; no
// integrator truncation error.
DeviceRecord step_device(DeviceRecord dev, double dt_s);

// Shared low-level step used by step_device and the ensemble simulator.
// decay must equal exp(-dyn.rate_per_s * dt).
void advance_state(DeviceRecord& dev, const LinearDynamics& dyn, double decay);

// Closed-form residence times from the device's current state. Return
// +infinity when the relevant boundary is unreachable. Calling
// time_to_switch_off on an off device (or the mirror) is a contract error.
double time_to_switch_off(const DeviceRecord& dev);
double time_to_switch_on(const DeviceRecord& dev);

struct OnOffSplit {
  double on_s = 0.0;
  double off_s = 0.0;
};

// Splits a control window into expected on and off durations assuming at most
// the first thermostat crossing matters. on_s + off_s == window_s exactly.
OnOffSplit window_on_off_durations(const DeviceRecord& dev, double window_s);

// Fraction of a steady hysteresis cycle spent on, measured edge to edge.
double steady_duty_cycle(const DeviceRecord& dev);

// Population file I/O. One device per line; column order is fixed and
// documented in the README. Fields that do not apply to a kind stay empty.
extern const char* const kPopulationCsvHeader;

std::vector<DeviceRecord> read_population(const std::string& path);
void write_population(const std::vector<DeviceRecord>& devices, const std::string& path);
std::string population_to_csv(const std::vector<DeviceRecord>& devices);
std::vector<DeviceRecord> population_from_csv(const std::string& text);

}  // namespace gridfit
