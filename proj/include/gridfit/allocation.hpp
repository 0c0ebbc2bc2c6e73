#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridfit/fitness.hpp"

namespace gridfit {

// Droop band for one service direction. omega_l_hz < omega_u_hz always; the
// under-frequency band sits below nominal, the over-frequency band above.
// First responders trigger at the edge nearest nominal.
struct ResponseCurveSpec {
  Service direction = Service::UnderFrequency;
  double omega_l_hz = 59.7;
  double omega_u_hz = 59.995;
  double omega_0_hz = 60.0;
  double capacity_kw = 0.0;

  double band_hz() const { return omega_u_hz - omega_l_hz; }
  void validate() const;
};

struct CommittedDevice {
  int rank = 0;  // 1-based position in the commitment order
  int device_id = 0;
  double power_kw = 0.0;
  double fitness = 0.0;
  double threshold_hz = 0.0;
  double cumulative_kw = 0.0;
};

struct Selection {
  std::vector<int> device_ids;  // committed prefix, in order
  double requested_kw = 0.0;
  double committed_kw = 0.0;
  double capacity_error_kw = 0.0;  // committed minus requested
  bool within_tolerance = true;
};

struct ThresholdAssignment {
  ResponseCurveSpec curve;
  double requested_kw = 0.0;
  double committed_kw = 0.0;
  double capacity_error_kw = 0.0;
  bool within_tolerance = true;
  double success_probability = 1.0;
  double failure_probability_lower_bound = 0.0;
  std::vector<CommittedDevice> devices;

  double max_committed_rating_kw() const;
  void validate() const;
};

// Device ids ordered best-first: fitness descending, then rating descending,
// then id ascending so the order is total. Throws on duplicate ids or on a
// device missing from the fitness table.
std::vector<int> prioritize(const std::vector<FitnessReport>& reports,
                            const std::vector<DeviceRecord>& devices);

// Uniform random order, used as the no-prioritization baseline.
std::vector<int> shuffled_order(const std::vector<DeviceRecord>& devices, std::uint64_t seed);

// Walks the order accumulating ratings until the running sum lands within
// tolerance of capacity_kw. Tolerance defaults to the largest rating seen so
// far, which a discrete sum can always meet at the crossing point; an explicit
// eps_kw may be unsatisfiable, in which case the closest prefix is returned
// with within_tolerance false.
Selection select_committed(const std::vector<int>& order,
                           const std::vector<DeviceRecord>& devices, double capacity_kw,
                           std::optional<double> eps_kw = std::nullopt);

// Spreads the committed devices across the droop band in commitment order.
// Device i triggers once frequency crosses the edge-nearest-nominal plus the
// band scaled by its share of the committed sum; the last device sits exactly
// on the far edge.
ThresholdAssignment assign_thresholds(const Selection& selection,
                                      const std::vector<DeviceRecord>& devices,
                                      const std::vector<FitnessReport>& reports,
                                      const ResponseCurveSpec& curve);

double success_probability(const std::vector<CommittedDevice>& devices);
double failure_probability_lower_bound(const std::vector<CommittedDevice>& devices);

// Total rating of devices certain to be responsive over the window.
double max_guaranteed_capacity(const std::vector<FitnessReport>& reports,
                               const std::vector<DeviceRecord>& devices,
                               double fitness_tol = 1e-12);

// Fitness-weighted total rating: the response the population can be expected
// to deliver over the rating window. Commitment levels are fractions of this.
double expected_capability_kw(const std::vector<FitnessReport>& reports,
                              const std::vector<DeviceRecord>& devices);

// Worst-case relative mismatch between a discrete staircase and the ideal
// droop line: one device rating against the committed total.
double discrete_error_bound(const ThresholdAssignment& assignment);

// Committed capacity needed before the staircase error drops below epsilon.
double required_capacity_for_error(double max_rating_kw, double epsilon);

extern const char* const kAssignmentCsvHeader;

std::string assignment_to_csv(const ThresholdAssignment& assignment);
void write_assignment_csv(const ThresholdAssignment& assignment, const std::string& path);

}  // namespace gridfit
