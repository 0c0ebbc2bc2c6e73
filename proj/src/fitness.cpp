#include "gridfit/fitness.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gridfit/util.hpp"

namespace gridfit {

const char* to_string(Service service) {
  return service == Service::UnderFrequency ? "under" : "over";
}

Service service_from_string(const std::string& s) {
  if (s == "under") return Service::UnderFrequency;
  if (s == "over") return Service::OverFrequency;
  throw std::invalid_argument("unknown service: " + s);
}

void QualityParams::validate() const {
  if (beta_per_s < 0.0) throw std::invalid_argument("beta_per_s must be non-negative");
  if (delay_s < 0.0) throw std::invalid_argument("delay_s must be non-negative");
}

double availability_under(const DeviceRecord& dev, double window_s) {
  return window_on_off_durations(dev, window_s).on_s / window_s;
}

double availability_over(const DeviceRecord& dev, double window_s) {
  // Complement of the on fraction, so the pair sums to exactly 1.
  return 1.0 - availability_under(dev, window_s);
}

double quality(const QualityParams& params) {
  params.validate();
  return std::exp(-params.beta_per_s * params.delay_s);
}

double fitness(const DeviceRecord& dev, Service service, double window_s,
               const QualityParams& params) {
  const double avail = service == Service::UnderFrequency
                           ? availability_under(dev, window_s)
                           : availability_over(dev, window_s);
  return avail * quality(params);
}

FitnessReport rate_device(const DeviceRecord& dev, Service service, double window_s,
                          const QualityParams& params) {
  FitnessReport r;
  r.device_id = dev.id;
  r.service = service;
  r.availability = service == Service::UnderFrequency ? availability_under(dev, window_s)
                                                      : availability_over(dev, window_s);
  r.quality = quality(params);
  r.fitness = r.availability * r.quality;
  r.window_s = window_s;
  return r;
}

std::vector<FitnessReport> fitness_table(const std::vector<DeviceRecord>& devices,
                                         Service service, double window_s,
                                         const QualityParams& params) {
  std::vector<FitnessReport> table;
  table.reserve(devices.size());
  for (const DeviceRecord& d : devices) {
    table.push_back(rate_device(d, service, window_s, params));
  }
  return table;
}

const char* const kFitnessCsvHeader = "device_id,service,availability,quality,fitness,window_s";

std::string fitness_to_csv(const std::vector<FitnessReport>& reports) {
  std::string out = kFitnessCsvHeader;
  out += '\n';
  for (const FitnessReport& r : reports) {
    out += std::to_string(r.device_id);
    out += ',';
    out += to_string(r.service);
    out += ',' + format_general(r.availability);
    out += ',' + format_general(r.quality);
    out += ',' + format_general(r.fitness);
    out += ',' + format_general(r.window_s);
    out += '\n';
  }
  return out;
}

void write_fitness_csv(const std::vector<FitnessReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fitness file: " + path);
  out << fitness_to_csv(reports);
}

}  // namespace gridfit
