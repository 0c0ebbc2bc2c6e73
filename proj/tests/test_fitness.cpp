#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "gridfit/fitness.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gridfit;

TEST_CASE("availabilities are exact complements") {
  std::mt19937_64 rng(120);
  for (int i = 0; i < 300; ++i) {
    const DeviceRecord d = testsup::random_device(rng, i);
    for (double w : {300.0, 900.0}) {
      const double under = availability_under(d, w);
      const double over = availability_over(d, w);
      CHECK(under + over == 1.0);
      CHECK(under >= 0.0);
      CHECK(under <= 1.0);
    }
  }
}

TEST_CASE("availability matches Monte Carlo occupancy sampling") {
  std::mt19937_64 rng(121);
  for (int i = 0; i < 25; ++i) {
    const DeviceRecord d = testsup::random_device(rng, i);
    const double closed = availability_under(d, 300.0);
    const double sampled = oracles::mc_availability(d, 300.0, 10000, 7000 + i);
    CHECK(std::abs(closed - sampled) <= 0.02);
  }
}

TEST_CASE("availability matches the fine-step timeline") {
  std::mt19937_64 rng(122);
  for (int i = 0; i < 40; ++i) {
    const DeviceRecord d = testsup::random_device(rng, i);
    const double closed = availability_under(d, 300.0) * 300.0;
    CHECK(std::abs(closed - oracles::fine_on_seconds(d, 300.0)) <= 0.1);
  }
}

TEST_CASE("quality discounts actuation delay") {
  CHECK(quality({0.1, 0.0}) == 1.0);
  CHECK(quality({0.0, 30.0}) == 1.0);
  CHECK(quality({0.1, 5.0}) == std::exp(-0.1 * 5.0));
  CHECK(quality({0.2, 10.0}) < quality({0.2, 5.0}));
  CHECK_THROWS_AS(quality({-0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(quality({0.1, -1.0}), std::invalid_argument);
}

TEST_CASE("fitness is availability times quality") {
  std::mt19937_64 rng(123);
  const QualityParams qp{0.1, 3.0};
  for (int i = 0; i < 50; ++i) {
    const DeviceRecord d = testsup::random_device(rng, i);
    for (Service svc : {Service::UnderFrequency, Service::OverFrequency}) {
      const double avail = svc == Service::UnderFrequency ? availability_under(d, 300.0)
                                                          : availability_over(d, 300.0);
      CHECK(fitness(d, svc, 300.0, qp) == avail * quality(qp));
      const FitnessReport r = rate_device(d, svc, 300.0, qp);
      CHECK(r.device_id == d.id);
      CHECK(r.service == svc);
      CHECK(r.availability == avail);
      CHECK(r.fitness == r.availability * r.quality);
      CHECK(r.window_s == 300.0);
    }
  }
}

TEST_CASE("devices pinned in one state rate at the extremes") {
  // Heater idle and hours from the cold edge: useless for shed, perfect for add.
  const DeviceRecord idle = testsup::make_ewh(0, 126.0, false);
  CHECK(availability_under(idle, 300.0) == 0.0);
  CHECK(availability_over(idle, 300.0) == 1.0);
  // Cooler that stays on through the whole window.
  const DeviceRecord busy = testsup::make_ac(0, 72.9, true);
  CHECK(availability_under(busy, 300.0) == 1.0);
  CHECK(availability_over(busy, 300.0) == 0.0);
}

TEST_CASE("fitness table covers every device in order") {
  std::mt19937_64 rng(124);
  std::vector<DeviceRecord> pop;
  for (int i = 0; i < 20; ++i) pop.push_back(testsup::random_device(rng, 100 + i));
  const auto table = fitness_table(pop, Service::UnderFrequency, 300.0);
  REQUIRE(table.size() == pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    CHECK(table[i].device_id == pop[i].id);
    CHECK(table[i].fitness == fitness(pop[i], Service::UnderFrequency, 300.0));
  }
  const std::string csv = fitness_to_csv(table);
  CHECK(csv.rfind(kFitnessCsvHeader, 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == pop.size() + 1);
}

TEST_CASE("service names round trip") {
  CHECK(std::string(to_string(Service::UnderFrequency)) == "under");
  CHECK(std::string(to_string(Service::OverFrequency)) == "over");
  CHECK(service_from_string("under") == Service::UnderFrequency);
  CHECK(service_from_string("over") == Service::OverFrequency);
  CHECK_THROWS_AS(service_from_string("sideways"), std::invalid_argument);
}
