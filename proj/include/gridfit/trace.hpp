#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gridfit {

// Uniformly sampled frequency series. Sample i sits at t = i * dt_s.
struct FrequencyTrace {
  double dt_s = 1.0;
  std::vector<double> freq_hz;

  std::size_t size() const { return freq_hz.size(); }
  double duration_s() const {
    return freq_hz.empty() ? 0.0 : dt_s * static_cast<double>(freq_hz.size() - 1);
  }
  double time_at(std::size_t i) const { return dt_s * static_cast<double>(i); }

  // Exact-grid lookup; throws if t does not land on a sample.
  double sample_at_time(double t_s) const;

  void validate() const;
};

enum class EventKind { UnderFreq, OverFreq, Cascade };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

// Synthetic disturbance shape: a critically damped dip to the stated nadir
// deviation, then exponential recovery toward the settle offset. Cascade
// repeats the dip once the first recovery has run five time constants.
struct EventSpec {
  EventKind kind = EventKind::UnderFreq;
  double start_time_s = 0.0;
  double nadir_deviation_hz = 0.3;
  double initial_rocof_hz_per_s = 0.1;  // peak rate of change during the dip
  double recovery_tau_s = 2.5;
  double settle_offset_hz = 0.12;
  double nominal_hz = 60.0;

  void validate() const;
};

// Dip pulse: rises 0 -> 1 with zero initial slope and peak slope 1/e at u=1.
double dip_pulse(double u);

// Where the pulse is cut over to the recovery, in pulse units. At this span
// the pulse has covered all but ~2.7% of its asymptote.
inline constexpr double kDipShapeSpan = 5.5;

// Samples the event on a uniform grid. The dip junction is snapped to the
// grid and rescaled so one sample sits exactly at the nadir, and no
// sample-to-sample change exceeds initial_rocof * dt.
FrequencyTrace synthesize(const EventSpec& spec, double duration_s, double dt_s);

// Reads a time_s,freq_hz CSV. Non-uniform or mismatched spacing is linearly
// resampled onto a uniform grid (resample_dt_s, or the smallest observed gap
// when zero). Times are shifted so the series starts at zero.
FrequencyTrace ingest_trace(const std::string& path, double resample_dt_s = 0.0);

extern const char* const kTraceCsvHeader;

std::string trace_to_csv(const FrequencyTrace& trace);
void write_trace_csv(const FrequencyTrace& trace, const std::string& path);

}  // namespace gridfit
