#include "gridfit/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "gridfit/util.hpp"

namespace gridfit {

namespace {

std::unordered_map<int, const DeviceRecord*> index_devices(
    const std::vector<DeviceRecord>& devices) {
  std::unordered_map<int, const DeviceRecord*> by_id;
  by_id.reserve(devices.size());
  for (const DeviceRecord& d : devices) {
    if (!by_id.emplace(d.id, &d).second) {
      throw std::invalid_argument("duplicate device id " + std::to_string(d.id));
    }
  }
  return by_id;
}

const DeviceRecord& device_by_id(const std::unordered_map<int, const DeviceRecord*>& by_id,
                                 int id) {
  const auto it = by_id.find(id);
  if (it == by_id.end()) {
    throw std::invalid_argument("unknown device id " + std::to_string(id));
  }
  return *it->second;
}

}  // namespace

void ResponseCurveSpec::validate() const {
  if (!std::isfinite(omega_l_hz) || !std::isfinite(omega_u_hz) || !std::isfinite(omega_0_hz)) {
    throw std::invalid_argument("response curve edges must be finite");
  }
  if (omega_l_hz >= omega_u_hz) {
    throw std::invalid_argument("response curve requires omega_l < omega_u");
  }
  if (direction == Service::UnderFrequency && omega_u_hz >= omega_0_hz) {
    throw std::invalid_argument("under-frequency band must sit below nominal");
  }
  if (direction == Service::OverFrequency && omega_l_hz <= omega_0_hz) {
    throw std::invalid_argument("over-frequency band must sit above nominal");
  }
}

double ThresholdAssignment::max_committed_rating_kw() const {
  double max_kw = 0.0;
  for (const CommittedDevice& d : devices) max_kw = std::max(max_kw, d.power_kw);
  return max_kw;
}

void ThresholdAssignment::validate() const {
  curve.validate();
  double prev_cum = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const CommittedDevice& d = devices[i];
    if (d.threshold_hz < curve.omega_l_hz || d.threshold_hz > curve.omega_u_hz) {
      throw std::domain_error("threshold outside the droop band");
    }
    if (d.cumulative_kw <= prev_cum) {
      throw std::domain_error("cumulative capacity must be strictly increasing");
    }
    prev_cum = d.cumulative_kw;
    if (i == 0) continue;
    const double step = d.threshold_hz - devices[i - 1].threshold_hz;
    // Later commitments trigger deeper into the band.
    const bool ordered =
        curve.direction == Service::UnderFrequency ? step < 0.0 : step > 0.0;
    if (!ordered) throw std::domain_error("thresholds must be strictly ordered");
  }
}

std::vector<int> prioritize(const std::vector<FitnessReport>& reports,
                            const std::vector<DeviceRecord>& devices) {
  const auto by_id = index_devices(devices);
  std::unordered_map<int, double> fitness_by_id;
  fitness_by_id.reserve(reports.size());
  for (const FitnessReport& r : reports) fitness_by_id[r.device_id] = r.fitness;

  struct Key {
    double fitness;
    double power;
    int id;
  };
  std::vector<Key> keys;
  keys.reserve(devices.size());
  for (const DeviceRecord& d : devices) {
    const auto it = fitness_by_id.find(d.id);
    if (it == fitness_by_id.end()) {
      throw std::invalid_argument("device " + std::to_string(d.id) + " has no fitness report");
    }
    keys.push_back({it->second, d.power_kw(), d.id});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    if (a.power != b.power) return a.power > b.power;
    return a.id < b.id;
  });

  std::vector<int> order;
  order.reserve(keys.size());
  for (const Key& k : keys) order.push_back(k.id);
  return order;
}

std::vector<int> shuffled_order(const std::vector<DeviceRecord>& devices, std::uint64_t seed) {
  index_devices(devices);  // reject duplicate ids
  std::vector<int> order;
  order.reserve(devices.size());
  for (const DeviceRecord& d : devices) order.push_back(d.id);
  // Fisher-Yates with an explicit bounded draw so the order does not depend
  // on the standard library's shuffle implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Selection select_committed(const std::vector<int>& order,
                           const std::vector<DeviceRecord>& devices, double capacity_kw,
                           std::optional<double> eps_kw) {
  if (order.empty()) throw std::invalid_argument("select_committed: empty order");
  if (!(capacity_kw > 0.0)) {
    throw std::invalid_argument("select_committed: capacity must be positive");
  }
  if (eps_kw && *eps_kw < 0.0) {
    throw std::invalid_argument("select_committed: eps must be non-negative");
  }
  const auto by_id = index_devices(devices);

  Selection sel;
  sel.requested_kw = capacity_kw;

  double sum = 0.0;
  double max_rating = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  std::size_t best_m = 0;
  double best_sum = 0.0;
  for (std::size_t m = 1; m <= order.size(); ++m) {
    const DeviceRecord& d = device_by_id(by_id, order[m - 1]);
    sum += d.power_kw();
    max_rating = std::max(max_rating, d.power_kw());
    const double err = std::abs(capacity_kw - sum);
    const double eps = eps_kw ? *eps_kw : max_rating;
    if (err <= eps) {
      sel.device_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
      sel.committed_kw = sum;
      sel.capacity_error_kw = sum - capacity_kw;
      sel.within_tolerance = true;
      return sel;
    }
    if (err < best_err) {
      best_err = err;
      best_m = m;
      best_sum = sum;
    }
  }
  // No prefix met the tolerance; fall back to the closest one.
  sel.device_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best_m));
  sel.committed_kw = best_sum;
  sel.capacity_error_kw = best_sum - capacity_kw;
  sel.within_tolerance = false;
  return sel;
}

ThresholdAssignment assign_thresholds(const Selection& selection,
                                      const std::vector<DeviceRecord>& devices,
                                      const std::vector<FitnessReport>& reports,
                                      const ResponseCurveSpec& curve) {
  curve.validate();
  if (selection.device_ids.empty()) {
    throw std::invalid_argument("assign_thresholds: empty selection");
  }
  const auto by_id = index_devices(devices);
  std::unordered_map<int, double> fitness_by_id;
  fitness_by_id.reserve(reports.size());
  for (const FitnessReport& r : reports) fitness_by_id[r.device_id] = r.fitness;

  ThresholdAssignment out;
  out.curve = curve;
  out.requested_kw = selection.requested_kw;
  out.committed_kw = selection.committed_kw;
  out.capacity_error_kw = selection.capacity_error_kw;
  out.within_tolerance = selection.within_tolerance;

  const double band = curve.band_hz();
  double cum = 0.0;
  int rank = 0;
  double min_fitness = 1.0;
  double product = 1.0;
  for (int id : selection.device_ids) {
    const DeviceRecord& d = device_by_id(by_id, id);
    const auto fit = fitness_by_id.find(id);
    if (fit == fitness_by_id.end()) {
      throw std::invalid_argument("device " + std::to_string(id) + " has no fitness report");
    }
    cum += d.power_kw();
    const double frac = cum / selection.committed_kw;
    CommittedDevice c;
    c.rank = ++rank;
    c.device_id = id;
    c.power_kw = d.power_kw();
    c.fitness = fit->second;
    c.cumulative_kw = cum;
    if (frac == 1.0) {
      // Land the final device exactly on the far band edge.
      c.threshold_hz = curve.direction == Service::UnderFrequency ? curve.omega_l_hz
                                                                  : curve.omega_u_hz;
    } else {
      c.threshold_hz = curve.direction == Service::UnderFrequency
                           ? curve.omega_u_hz - band * frac
                           : curve.omega_l_hz + band * frac;
    }
    min_fitness = std::min(min_fitness, c.fitness);
    product *= c.fitness;
    out.devices.push_back(c);
  }
  out.success_probability = product;
  out.failure_probability_lower_bound = 1.0 - min_fitness;
  out.validate();
  return out;
}

double success_probability(const std::vector<CommittedDevice>& devices) {
  double product = 1.0;
  for (const CommittedDevice& d : devices) product *= d.fitness;
  return product;
}

double failure_probability_lower_bound(const std::vector<CommittedDevice>& devices) {
  double min_fitness = 1.0;
  for (const CommittedDevice& d : devices) min_fitness = std::min(min_fitness, d.fitness);
  return 1.0 - min_fitness;
}

double max_guaranteed_capacity(const std::vector<FitnessReport>& reports,
                               const std::vector<DeviceRecord>& devices, double fitness_tol) {
  const auto by_id = index_devices(devices);
  double total = 0.0;
  for (const FitnessReport& r : reports) {
    if (std::abs(r.fitness - 1.0) <= fitness_tol) {
      total += device_by_id(by_id, r.device_id).power_kw();
    }
  }
  return total;
}

double expected_capability_kw(const std::vector<FitnessReport>& reports,
                              const std::vector<DeviceRecord>& devices) {
  const auto by_id = index_devices(devices);
  double total = 0.0;
  for (const FitnessReport& r : reports) {
    total += r.fitness * device_by_id(by_id, r.device_id).power_kw();
  }
  return total;
}

double discrete_error_bound(const ThresholdAssignment& assignment) {
  if (assignment.devices.empty() || assignment.committed_kw <= 0.0) {
    throw std::invalid_argument("discrete_error_bound: empty assignment");
  }
  return assignment.max_committed_rating_kw() / assignment.committed_kw;
}

double required_capacity_for_error(double max_rating_kw, double epsilon) {
  if (!(max_rating_kw > 0.0)) {
    throw std::invalid_argument("required_capacity_for_error: rating must be positive");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("required_capacity_for_error: epsilon must be positive");
  }
  return max_rating_kw / epsilon;
}

const char* const kAssignmentCsvHeader =
    "rank,device_id,power_kw,fitness,threshold_hz,cumulative_kw";

std::string assignment_to_csv(const ThresholdAssignment& assignment) {
  std::string out = kAssignmentCsvHeader;
  out += '\n';
  for (const CommittedDevice& d : assignment.devices) {
    out += std::to_string(d.rank);
    out += ',' + std::to_string(d.device_id);
    out += ',' + format_general(d.power_kw);
    out += ',' + format_general(d.fitness);
    out += ',' + format_general(d.threshold_hz);
    out += ',' + format_general(d.cumulative_kw);
    out += '\n';
  }
  return out;
}

void write_assignment_csv(const ThresholdAssignment& assignment, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write assignment file: " + path);
  out << assignment_to_csv(assignment);
}

}  // namespace gridfit
