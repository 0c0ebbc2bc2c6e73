#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "gridfit/simulation.hpp"
#include "test_support.hpp"

using namespace gridfit;

namespace {

FitnessReport perfect_report(int id) {
  FitnessReport r;
  r.device_id = id;
  r.availability = 1.0;
  r.quality = 1.0;
  r.fitness = 1.0;
  r.window_s = 300.0;
  return r;
}

struct Rig {
  std::vector<DeviceRecord> population;
  ThresholdAssignment assignment;
};

// One committed cooler holding the whole band; threshold lands on omega_l.
Rig single_ac_rig(double temp_f) {
  Rig rig;
  rig.population = {testsup::make_ac(0, temp_f, true)};
  ResponseCurveSpec curve;
  curve.capacity_kw = 6.0;
  const Selection sel = select_committed({0}, rig.population, 6.0);
  rig.assignment = assign_thresholds(sel, rig.population, {perfect_report(0)}, curve);
  return rig;
}

// One committed idle heater on the over-frequency side; threshold on omega_u.
Rig single_ewh_rig(double temp_f) {
  Rig rig;
  rig.population = {testsup::make_ewh(0, temp_f, false)};
  ResponseCurveSpec curve;
  curve.direction = Service::OverFrequency;
  curve.omega_l_hz = 60.005;
  curve.omega_u_hz = 60.3;
  curve.capacity_kw = 4.5;
  const Selection sel = select_committed({0}, rig.population, 4.5);
  rig.assignment = assign_thresholds(sel, rig.population, {perfect_report(0)}, curve);
  return rig;
}

FrequencyTrace make_trace(std::vector<double> freq, double dt = 1.0) {
  FrequencyTrace t;
  t.dt_s = dt;
  t.freq_hz = std::move(freq);
  return t;
}

SimConfig make_config(FrequencyTrace trace, double window_s, double dt = 1.0) {
  SimConfig cfg;
  cfg.dt_s = dt;
  cfg.window_s = window_s;
  cfg.trace = std::move(trace);
  return cfg;
}

int grid_switches(const SimulationResult& res) {
  int n = 0;
  for (const SwitchEvent& e : res.switches) n += e.cause == SwitchCause::Grid ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("committed devices respond one tick after the crossing") {
  const Rig rig = single_ac_rig(72.0);
  SUBCASE("trace starts below the threshold") {
    const auto res =
        run(rig.population, rig.assignment, make_config(make_trace(std::vector<double>(11, 59.6)), 10.0));
    REQUIRE(res.achieved_kw.size() == 11);
    CHECK(res.achieved_kw[0] == 0.0);
    for (std::size_t k = 1; k <= 10; ++k) CHECK(res.achieved_kw[k] == 6.0);
    CHECK(res.p_sigma_kw[0] == 6.0);
    CHECK(res.p_sigma_kw[1] == 0.0);
    for (double target : res.target_kw) CHECK(target == 6.0);
    REQUIRE(grid_switches(res) == 1);
    CHECK(res.switches[0].t_s == 1.0);
    CHECK(res.switches[0].cause == SwitchCause::Grid);
    CHECK_FALSE(res.switches[0].turned_on);
  }
  SUBCASE("crossing at the second sample shifts the response by one tick") {
    const auto res = run(rig.population, rig.assignment,
                         make_config(make_trace({60.0, 59.6, 59.6, 59.6, 59.6}), 4.0));
    CHECK(res.achieved_kw[0] == 0.0);
    CHECK(res.achieved_kw[1] == 0.0);
    CHECK(res.achieved_kw[2] == 6.0);
    CHECK(res.achieved_kw[3] == 6.0);
  }
}

TEST_CASE("comfort-violating commands are never issued") {
  // Thermostat is demanding cooling; the shed command must be withheld.
  const Rig rig = single_ac_rig(73.5);
  const auto res =
      run(rig.population, rig.assignment, make_config(make_trace(std::vector<double>(11, 59.6)), 10.0));
  CHECK(grid_switches(res) == 0);
  for (double a : res.achieved_kw) CHECK(a == 0.0);
}

TEST_CASE("thermostat action beats a pending command") {
  // The device crosses its cold edge during the latency tick, so the grid
  // command arrives moot: one thermostat switch, no grid switch, no relief.
  const Rig rig = single_ac_rig(71.0001);
  const auto res = run(rig.population, rig.assignment,
                       make_config(make_trace({59.6, 59.6, 60.0, 60.0}), 3.0));
  REQUIRE(res.switches.size() == 1);
  CHECK(res.switches[0].cause == SwitchCause::Thermostat);
  CHECK_FALSE(res.switches[0].turned_on);
  CHECK(res.switches[0].t_s == 1.0);
  CHECK(grid_switches(res) == 0);
  // The twin turned off at the same instant, so no relief is claimed.
  for (double a : res.achieved_kw) CHECK(a == 0.0);
}

TEST_CASE("tracking restores responded devices; latching holds them") {
  const Rig rig = single_ac_rig(72.0);
  const FrequencyTrace trace = make_trace({59.6, 59.6, 59.6, 60.0, 60.0, 60.0, 60.0});
  SUBCASE("tracking") {
    SimConfig cfg = make_config(trace, 6.0);
    cfg.mode = ResponseMode::Tracking;
    const auto res = run(rig.population, rig.assignment, cfg);
    CHECK(res.achieved_kw[1] == 6.0);
    CHECK(res.achieved_kw[2] == 6.0);
    CHECK(res.achieved_kw[3] == 6.0);  // recovery seen at k=3, restore lands at k=4
    CHECK(res.achieved_kw[4] == 0.0);
    CHECK(res.achieved_kw[5] == 0.0);
    REQUIRE(grid_switches(res) == 2);
    CHECK(res.switches[0].turned_on == false);
    CHECK(res.switches[1].turned_on == true);
    CHECK(res.switches[1].t_s == 4.0);
  }
  SUBCASE("latching") {
    SimConfig cfg = make_config(trace, 6.0);
    cfg.mode = ResponseMode::Latching;
    const auto res = run(rig.population, rig.assignment, cfg);
    for (std::size_t k = 1; k <= 6; ++k) CHECK(res.achieved_kw[k] == 6.0);
    CHECK(grid_switches(res) == 1);
  }
}

TEST_CASE("over-frequency commands add load and track recovery") {
  const Rig rig = single_ewh_rig(126.0);
  const auto res = run(rig.population, rig.assignment,
                       make_config(make_trace({60.35, 60.35, 60.1, 60.1, 60.1}), 4.0));
  CHECK(res.achieved_kw[0] == 0.0);
  CHECK(res.achieved_kw[1] == 4.5);
  CHECK(res.achieved_kw[2] == 4.5);  // recovery seen at k=2, release lands at k=3
  CHECK(res.achieved_kw[3] == 0.0);
  CHECK(res.target_kw[0] == 4.5);
  REQUIRE(grid_switches(res) == 2);
  CHECK(res.switches[0].turned_on == true);
  CHECK(res.switches[1].turned_on == false);
}

TEST_CASE("a flat trace at nominal leaves the population untouched") {
  std::mt19937_64 rng(140);
  std::vector<DeviceRecord> population;
  for (int i = 0; i < 10; ++i) population.push_back(testsup::random_device(rng, i));
  std::vector<FitnessReport> reports;
  for (int i = 0; i < 10; ++i) reports.push_back(perfect_report(i));
  const double capacity =
      population[0].power_kw() + population[1].power_kw() + population[2].power_kw();
  ResponseCurveSpec curve;
  curve.capacity_kw = capacity;
  const Selection sel = select_committed({0, 1, 2}, population, capacity, 0.0);
  const ThresholdAssignment assignment = assign_thresholds(sel, population, reports, curve);

  const auto res = run(population, assignment,
                       make_config(make_trace(std::vector<double>(301, 60.0)), 300.0));
  CHECK(grid_switches(res) == 0);
  for (double a : res.achieved_kw) CHECK(a == 0.0);
  for (double t : res.target_kw) CHECK(t == 0.0);
  CHECK(res.nadirs.empty());
  CHECK_FALSE(res.rmvt.has_value());
  CHECK_THROWS_AS(compute_rmvt(res, RmvtMode::AtNadir), std::domain_error);
  CHECK_THROWS_AS(compute_rmvt(res, RmvtMode::TimeAveraged), std::domain_error);
}

TEST_CASE("repeated runs are bitwise identical") {
  std::mt19937_64 rng(141);
  std::vector<DeviceRecord> population;
  std::vector<FitnessReport> reports;
  std::vector<int> order;
  double capacity = 0.0;
  for (int i = 0; i < 12; ++i) {
    population.push_back(testsup::random_device(rng, i));
    reports.push_back(perfect_report(i));
    if (i < 6) {
      order.push_back(i);
      capacity += population.back().power_kw();
    }
  }
  ResponseCurveSpec curve;
  curve.capacity_kw = capacity;
  const Selection sel = select_committed(order, population, capacity, 0.0);
  const ThresholdAssignment assignment = assign_thresholds(sel, population, reports, curve);
  EventSpec spec;
  spec.kind = EventKind::Cascade;
  spec.start_time_s = 20.0;
  spec.nadir_deviation_hz = 0.36;
  spec.settle_offset_hz = 0.12;
  const FrequencyTrace trace = synthesize(spec, 300.0, 0.5);

  const auto a = run(population, assignment, make_config(trace, 300.0));
  const auto b = run(population, assignment, make_config(trace, 300.0));
  CHECK(timeseries_to_csv(a) == timeseries_to_csv(b));
  CHECK(switchlog_to_csv(a) == switchlog_to_csv(b));
  CHECK(a.nadirs.size() == b.nadirs.size());
}

TEST_CASE("nadir detection splits and merges events by the rearm margin") {
  const Rig rig = single_ac_rig(72.0);
  SUBCASE("a full recovery between dips gives two events") {
    const auto res = run(rig.population, rig.assignment,
                         make_config(make_trace({60.0, 59.8, 59.9, 59.8, 60.0}), 4.0));
    REQUIRE(res.nadirs.size() == 2);
    CHECK(res.nadirs[0].t_s == 1.0);
    CHECK(res.nadirs[1].t_s == 3.0);
    CHECK(res.nadirs[0].freq_hz == 59.8);
  }
  SUBCASE("a shallow wobble stays one event at its deepest point") {
    const auto res = run(rig.population, rig.assignment,
                         make_config(make_trace({60.0, 59.8, 59.82, 59.78, 59.8}), 4.0));
    REQUIRE(res.nadirs.size() == 1);
    CHECK(res.nadirs[0].t_s == 3.0);
    CHECK(res.nadirs[0].freq_hz == 59.78);
  }
  SUBCASE("a dip still open at the end of the window is committed") {
    const auto res = run(rig.population, rig.assignment,
                         make_config(make_trace({60.0, 59.9, 59.8, 59.75, 59.72}), 4.0));
    REQUIRE(res.nadirs.size() == 1);
    CHECK(res.nadirs[0].t_s == 4.0);
    CHECK(res.nadirs[0].freq_hz == 59.72);
    CHECK(res.nadirs[0].requested_kw > 0.0);
  }
}

TEST_CASE("rmvt averages the relative miss") {
  SUBCASE("at the nadir") {
    SimulationResult res;
    res.nadirs.push_back({100.0, 59.64, 3103.0, 3097.0});
    CHECK(compute_rmvt(res, RmvtMode::AtNadir) == doctest::Approx(6.0 / 3103.0).epsilon(1e-12));
    res.nadirs.push_back({200.0, 59.7, 200.0, 210.0});
    CHECK(compute_rmvt(res, RmvtMode::AtNadir) ==
          doctest::Approx(0.5 * (6.0 / 3103.0 + 0.05)).epsilon(1e-12));
    res.nadirs.push_back({300.0, 59.9, 0.0, 0.0});
    CHECK_THROWS_AS(compute_rmvt(res, RmvtMode::AtNadir), std::domain_error);
  }
  SUBCASE("averaged over samples above the request floor") {
    SimulationResult res;
    res.committed_capacity_kw = 100.0;
    res.target_kw = {0.0, 0.5, 50.0, 100.0};
    res.achieved_kw = {0.0, 0.0, 45.0, 100.0};
    CHECK(compute_rmvt(res, RmvtMode::TimeAveraged) == doctest::Approx(0.05).epsilon(1e-12));
  }
}

TEST_CASE("ideal droop clamps to the band") {
  const Rig rig = single_ac_rig(72.0);
  const ThresholdAssignment& a = rig.assignment;
  CHECK(droop_target_kw(a, 60.0) == 0.0);
  CHECK(droop_target_kw(a, 59.995) == 0.0);
  CHECK(droop_target_kw(a, 59.7) == 6.0);
  CHECK(droop_target_kw(a, 59.5) == 6.0);
  CHECK(droop_target_kw(a, 59.8475) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("static staircase stays within one rating of the ideal line") {
  std::vector<DeviceRecord> devices;
  const double powers[] = {5.0, 3.0, 2.0};
  std::vector<FitnessReport> reports;
  for (int i = 0; i < 3; ++i) {
    DeviceRecord d = testsup::make_ac(i);
    std::get<AcParams>(d.params).power_kw = powers[i];
    devices.push_back(d);
    reports.push_back(perfect_report(i));
  }
  ResponseCurveSpec curve;
  curve.capacity_kw = 10.0;
  const Selection sel = select_committed({0, 1, 2}, devices, 10.0, 0.0);
  const ThresholdAssignment a = assign_thresholds(sel, devices, reports, curve);

  SUBCASE("corner rows bracket every jump") {
    const auto pts = static_droop_sweep(a);
    REQUIRE(pts.size() == 7);
    CHECK(pts[0].freq_hz == a.curve.omega_u_hz);
    CHECK(pts[0].ideal_kw == 0.0);
    CHECK(pts[0].staircase_kw == 0.0);
    double worst = 0.0;
    for (const DroopPoint& p : pts) {
      worst = std::max(worst, std::abs(p.ideal_kw - p.staircase_kw));
    }
    CHECK(worst == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(pts.back().staircase_kw == 10.0);
    // The ideal line passes through each cumulative level at its threshold.
    for (std::size_t i = 0; i < a.devices.size(); ++i) {
      CHECK(pts[2 * i + 2].staircase_kw == a.devices[i].cumulative_kw);
      CHECK(pts[2 * i + 1].ideal_kw ==
            doctest::Approx(a.devices[i].cumulative_kw).epsilon(1e-9));
    }
  }
  SUBCASE("dense scan never exceeds the one-rating bound") {
    const double max_rating = a.max_committed_rating_kw();
    for (int i = 0; i <= 2950; ++i) {
      const double f = a.curve.omega_l_hz + a.curve.band_hz() * i / 2950.0;
      CHECK(std::abs(droop_target_kw(a, f) - static_shed_kw(a, f)) <=
            max_rating * (1.0 + 1e-9));
    }
  }
  SUBCASE("shed is trigger-inclusive") {
    CHECK(static_shed_kw(a, a.curve.omega_u_hz) == 0.0);
    CHECK(static_shed_kw(a, a.devices[0].threshold_hz) == 5.0);
    CHECK(static_shed_kw(a, a.devices[1].threshold_hz) == 8.0);
    CHECK(static_shed_kw(a, a.curve.omega_l_hz) == 10.0);
    CHECK(static_shed_kw(a, 59.5) == 10.0);
  }
}

TEST_CASE("sampling error rows carry the analytic bound") {
  const Rig rig = single_ac_rig(72.0);
  FrequencyTrace trace;
  trace.dt_s = 0.25;
  for (int j = 0; j <= 48; ++j) {
    trace.freq_hz.push_back(60.05 - 0.05 * (0.25 * j));
  }
  const auto rows =
      evaluate_sampling_error(rig.population, rig.assignment, trace, {1.0, 2.0}, 8.0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dt_s == 1.0);
  CHECK(rows[1].dt_s == 2.0);
  CHECK(rows[0].analytic_bound_rel == doctest::Approx(1.0 * 0.05 / 0.295).epsilon(1e-9));
  CHECK(rows[1].analytic_bound_rel == doctest::Approx(2.0 * 0.05 / 0.295).epsilon(1e-9));
  CHECK(rows[0].rocof_at_crossing_hz_per_s == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(rows[1].rocof_at_crossing_hz_per_s == doctest::Approx(0.05).epsilon(1e-9));
  for (const SamplingErrorRow& r : rows) {
    CHECK(r.peak_abs_error_kw >= 0.0);
    CHECK(r.peak_rel_error == r.peak_abs_error_kw / rig.assignment.committed_kw);
  }
  CHECK_THROWS_AS(
      evaluate_sampling_error(rig.population, rig.assignment, trace, {}, 8.0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      evaluate_sampling_error(rig.population, rig.assignment, trace, {1.0}, 100.0),
      std::invalid_argument);
}

TEST_CASE("simulation config validation") {
  const Rig rig = single_ac_rig(72.0);
  const FrequencyTrace trace = make_trace(std::vector<double>(11, 60.0));
  SUBCASE("window must be whole ticks") {
    CHECK_THROWS_AS(run(rig.population, rig.assignment, make_config(trace, 10.5)),
                    std::invalid_argument);
  }
  SUBCASE("tick must be a multiple of the trace step") {
    CHECK_THROWS_AS(run(rig.population, rig.assignment, make_config(make_trace(std::vector<double>(31, 60.0), 0.4), 10.0)),
                    std::invalid_argument);
  }
  SUBCASE("trace must cover the window") {
    CHECK_THROWS_AS(run(rig.population, rig.assignment, make_config(trace, 20.0)),
                    std::invalid_argument);
  }
  SUBCASE("rearm margin must be positive") {
    SimConfig cfg = make_config(trace, 10.0);
    cfg.nadir_rearm_hz = 0.0;
    CHECK_THROWS_AS(run(rig.population, rig.assignment, cfg), std::invalid_argument);
  }
  SUBCASE("population ids must be unique") {
    std::vector<DeviceRecord> pop = {testsup::make_ac(0, 72.0, true),
                                     testsup::make_ac(0, 72.0, false)};
    CHECK_THROWS_AS(run(pop, rig.assignment, make_config(trace, 10.0)),
                    std::invalid_argument);
  }
  SUBCASE("committed devices must exist in the population") {
    const std::vector<DeviceRecord> pop = {testsup::make_ac(7, 72.0, true)};
    CHECK_THROWS_AS(run(pop, rig.assignment, make_config(trace, 10.0)),
                    std::invalid_argument);
  }
}

TEST_CASE("timeseries and switch log serialize with headers") {
  const Rig rig = single_ac_rig(72.0);
  const auto res =
      run(rig.population, rig.assignment, make_config(make_trace(std::vector<double>(11, 59.6)), 10.0));
  const std::string ts = timeseries_to_csv(res);
  CHECK(ts.rfind(kTimeseriesCsvHeader, 0) == 0);
  std::size_t lines = 0;
  for (char c : ts) lines += c == '\n' ? 1 : 0;
  CHECK(lines == res.t_s.size() + 1);
  const std::string sl = switchlog_to_csv(res);
  CHECK(sl.rfind(kSwitchlogCsvHeader, 0) == 0);
  CHECK(sl.find("grid") != std::string::npos);
  // Constant depression: one event, fully served at its deepest sample.
  CHECK(summary_line(res) == "rmvt=0,requested_kw=6,provided_kw=6,events=1");
}

TEST_CASE("mode and cause names round trip") {
  CHECK(std::string(to_string(ResponseMode::Tracking)) == "tracking");
  CHECK(std::string(to_string(ResponseMode::Latching)) == "latching");
  CHECK(response_mode_from_string("tracking") == ResponseMode::Tracking);
  CHECK(response_mode_from_string("latching") == ResponseMode::Latching);
  CHECK_THROWS_AS(response_mode_from_string("sticky"), std::invalid_argument);
  CHECK(std::string(to_string(RmvtMode::AtNadir)) == "at_nadir");
  CHECK(std::string(to_string(RmvtMode::TimeAveraged)) == "time_averaged");
  CHECK(rmvt_mode_from_string("at_nadir") == RmvtMode::AtNadir);
  CHECK(rmvt_mode_from_string("time_averaged") == RmvtMode::TimeAveraged);
  CHECK_THROWS_AS(rmvt_mode_from_string("peak"), std::invalid_argument);
  CHECK(std::string(to_string(SwitchCause::Thermostat)) == "thermostat");
  CHECK(std::string(to_string(SwitchCause::Grid)) == "grid");
}
