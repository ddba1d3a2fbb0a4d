#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace voltlab {

using Timestamp = std::chrono::sys_seconds;

// "YYYY-MM-DDTHH:MM:SS" (UTC, no offset suffix).
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

enum class Channel { kIrradiance, kLoadP, kLoadQ };

std::string_view to_string(Channel channel);
Channel parse_channel(std::string_view text);

// Fixed-resolution series. Immutable once built through make().
class TimeSeries {
 public:
  static TimeSeries make(Channel channel, std::string unit, Timestamp start,
                         std::chrono::seconds resolution, std::vector<double> values);

  Channel channel() const { return channel_; }
  const std::string& unit() const { return unit_; }
  Timestamp start() const { return start_; }
  Timestamp end() const { return start_ + resolution_ * (values_.size() - 1); }
  std::chrono::seconds resolution() const { return resolution_; }
  const std::vector<double>& values() const { return values_; }

 private:
  TimeSeries() = default;

  Channel channel_ = Channel::kIrradiance;
  std::string unit_;
  Timestamp start_{};
  std::chrono::seconds resolution_{0};
  std::vector<double> values_;
};

// Reads the two-column text format:
//   # channel=irradiance unit=W/m2
//   2021-07-01T00:00:00, 0.0
// Rows must be strictly increasing at one fixed resolution.
TimeSeries ingest(std::string_view document);
TimeSeries ingest_file(const std::filesystem::path& path);

std::string to_document(const TimeSeries& series);

// Linear interpolation; exact at sample instants. Throws std::out_of_range
// outside [start, end].
double sample(const TimeSeries& series, Timestamp t);

// Linear PV model capped at rated output. active_limit scales the cap
// (0.9 keeps reactive headroom at full sun).
double pv_power(double irradiance_w_m2, double s_rated_mva, double active_limit = 1.0);

enum class DayType { kClear, kOvercast, kSeasonalYear };

DayType parse_day_type(std::string_view text);

// Synthetic hourly irradiance. kClear and kOvercast cover one day starting
// at `start` (25 samples, midnight to midnight); kSeasonalYear covers 365
// days from `start`. Deterministic for a given seed.
TimeSeries synth_weather(DayType day_type, std::uint64_t seed, Timestamp start);

}  // namespace voltlab
