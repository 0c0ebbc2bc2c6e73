#pragma once

#include <string>
#include <vector>

#include "gridfit/device.hpp"

namespace gridfit {

// Which direction of grid support a device is being rated for. Under-frequency
// support sheds load (the device must be drawing power to help); over-frequency
// support adds load (the device must be idle to help).
enum class Service { UnderFrequency, OverFrequency };

const char* to_string(Service service);
Service service_from_string(const std::string& s);

// Responsiveness discount. beta_per_s is the decay rate applied to the
// device's actuation delay; zero delay rates a perfect 1.
struct QualityParams {
  double beta_per_s = 0.1;
  double delay_s = 0.0;

  void validate() const;
};

struct FitnessReport {
  int device_id = 0;
  Service service = Service::UnderFrequency;
  double availability = 0.0;
  double quality = 1.0;
  double fitness = 0.0;
  double window_s = 0.0;
};

// Fraction of the next window_s seconds the device spends drawing power,
// assuming no external commands. Closed form from the exponential dynamics.
double availability_under(const DeviceRecord& dev, double window_s);

// Complement: fraction of the window spent idle. The two always sum to 1.
double availability_over(const DeviceRecord& dev, double window_s);

double quality(const QualityParams& params);

double fitness(const DeviceRecord& dev, Service service, double window_s,
               const QualityParams& params = {});

FitnessReport rate_device(const DeviceRecord& dev, Service service, double window_s,
                          const QualityParams& params = {});

std::vector<FitnessReport> fitness_table(const std::vector<DeviceRecord>& devices,
                                         Service service, double window_s,
                                         const QualityParams& params = {});

extern const char* const kFitnessCsvHeader;

std::string fitness_to_csv(const std::vector<FitnessReport>& reports);
void write_fitness_csv(const std::vector<FitnessReport>& reports, const std::string& path);

}  // namespace gridfit
