#include "voltlab/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "voltlab/errors.hpp"
#include "voltlab/json_fields.hpp"
#include "voltlab/rng.hpp"

namespace voltlab {

namespace chr = std::chrono;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, int& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  text = trim(text);
  // 0123456789012345678
  // YYYY-MM-DDTHH:MM:SS
  const auto bad = [&] { return ParseError("invalid timestamp \"" + std::string(text) + "\""); };
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':')
    throw bad();
  int y, mo, d, h, mi, s;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
      !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), s))
    throw bad();
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) throw bad();
  return chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi} + chr::seconds{s};
}

std::string format_timestamp(Timestamp t) {
  const auto day = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{day};
  const chr::hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::kIrradiance:
      return "irradiance";
    case Channel::kLoadP:
      return "load_p";
    case Channel::kLoadQ:
      return "load_q";
  }
  return "irradiance";
}

Channel parse_channel(std::string_view text) {
  if (text == "irradiance") return Channel::kIrradiance;
  if (text == "load_p") return Channel::kLoadP;
  if (text == "load_q") return Channel::kLoadQ;
  throw ParseError("unknown channel \"" + std::string(text) + "\"");
}

TimeSeries TimeSeries::make(Channel channel, std::string unit, Timestamp start,
                            chr::seconds resolution, std::vector<double> values) {
  if (resolution.count() <= 0) throw ValidationError("time series resolution must be positive");
  if (values.empty()) throw ValidationError("time series has no samples");
  if (channel == Channel::kIrradiance) {
    for (size_t i = 0; i < values.size(); ++i)
      if (values[i] < 0.0)
        throw ValidationError("negative irradiance at " +
                              format_timestamp(start + resolution * i));
  }
  TimeSeries ts;
  ts.channel_ = channel;
  ts.unit_ = std::move(unit);
  ts.start_ = start;
  ts.resolution_ = resolution;
  ts.values_ = std::move(values);
  return ts;
}

TimeSeries ingest(std::string_view document) {
  std::optional<Channel> channel;
  std::string unit;
  std::vector<Timestamp> stamps;
  std::vector<double> values;

  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= document.size()) {
    const size_t nl = document.find('\n', pos);
    std::string_view line =
        document.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? document.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    if (line.front() == '#') {
      // Header: "# channel=irradiance unit=W/m2"
      std::istringstream ss{std::string(line.substr(1))};
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "channel") {
          try {
            channel = parse_channel(val);
          } catch (const ParseError& e) {
            throw ParseError(where + e.what());
          }
        } else if (key == "unit") {
          unit = val;
        }
      }
      continue;
    }

    const auto comma = line.find(',');
    if (comma == std::string_view::npos)
      throw ParseError(where + "expected \"timestamp, value\"");
    Timestamp t;
    try {
      t = parse_timestamp(line.substr(0, comma));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    double v;
    if (!parse_double(trim(line.substr(comma + 1)), v))
      throw ParseError(where + "invalid value \"" + std::string(trim(line.substr(comma + 1))) + "\"");
    stamps.push_back(t);
    values.push_back(v);
  }

  if (!channel) throw ParseError("missing header line naming the channel (# channel=... unit=...)");
  if (values.empty()) throw ValidationError("time series document has no rows");
  if (values.size() < 2)
    throw ValidationError("time series needs at least two rows to fix its resolution");

  const chr::seconds resolution = stamps[1] - stamps[0];
  if (resolution.count() <= 0)
    throw ValidationError("timestamps not increasing at " + format_timestamp(stamps[1]));
  for (size_t i = 1; i < stamps.size(); ++i) {
    const Timestamp expected = stamps[i - 1] + resolution;
    if (stamps[i] <= stamps[i - 1])
      throw ValidationError("timestamps not increasing at " + format_timestamp(stamps[i]));
    if (stamps[i] != expected)
      throw ValidationError("missing timestamp " + format_timestamp(expected));
  }
  return TimeSeries::make(*channel, unit, stamps.front(), resolution, std::move(values));
}

TimeSeries ingest_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return ingest(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string to_document(const TimeSeries& series) {
  std::string out = "# channel=" + std::string(to_string(series.channel())) +
                    " unit=" + series.unit() + "\n";
  char buf[64];
  for (size_t i = 0; i < series.values().size(); ++i) {
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, series.values()[i]);
    out += format_timestamp(series.start() + series.resolution() * i);
    out += ", ";
    out.append(buf, p);
    out += '\n';
  }
  return out;
}

double sample(const TimeSeries& series, Timestamp t) {
  if (t < series.start() || t > series.end())
    throw std::out_of_range("sample: " + format_timestamp(t) + " outside series span [" +
                            format_timestamp(series.start()) + ", " +
                            format_timestamp(series.end()) + "]");
  const auto offset = (t - series.start()).count();
  const auto res = series.resolution().count();
  const auto idx = static_cast<size_t>(offset / res);
  const auto rem = offset % res;
  const auto& v = series.values();
  if (rem == 0) return v[idx];
  const double w = static_cast<double>(rem) / static_cast<double>(res);
  return v[idx] + w * (v[idx + 1] - v[idx]);
}

double pv_power(double irradiance_w_m2, double s_rated_mva, double active_limit) {
  return active_limit * s_rated_mva * std::min(1.0, std::max(0.0, irradiance_w_m2) / 1000.0);
}

DayType parse_day_type(std::string_view text) {
  if (text == "clear") return DayType::kClear;
  if (text == "overcast") return DayType::kOvercast;
  if (text == "seasonal_year") return DayType::kSeasonalYear;
  throw ParseError("unknown day type \"" + std::string(text) + "\"");
}

namespace {

// Half-sine arc centred on 12:00 with the given day length in hours.
double daylight_arc(double hour, double day_length, double peak) {
  const double sunrise = 12.0 - day_length / 2.0;
  const double x = (hour - sunrise) / day_length;
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return peak * std::sin(std::numbers::pi * x);
}

}  // namespace

TimeSeries synth_weather(DayType day_type, std::uint64_t seed, Timestamp start) {
  constexpr double kSummerDayLength = 16.0;
  Rng rng(seed);
  std::vector<double> values;

  switch (day_type) {
    case DayType::kClear:
      for (int h = 0; h <= 24; ++h) values.push_back(daylight_arc(h, kSummerDayLength, 1000.0));
      break;
    case DayType::kOvercast:
      for (int h = 0; h <= 24; ++h)
        values.push_back(daylight_arc(h, kSummerDayLength, 300.0) * rng.uniform(0.8, 1.2));
      break;
    case DayType::kSeasonalYear: {
      const auto first_day = chr::floor<chr::days>(start);
      const chr::year_month_day ymd{first_day};
      const auto jan1 = chr::sys_days{ymd.year() / chr::January / 1};
      const int doy0 = static_cast<int>((first_day - jan1).count());
      for (int day = 0; day < 365; ++day) {
        // Day 172 (21 June) carries the longest and brightest arc.
        const double phase = 2.0 * std::numbers::pi * ((doy0 + day) % 365 - 171) / 365.0;
        const double day_length = 12.0 + 4.0 * std::cos(phase);
        const double clouds = rng.uniform(0.75, 1.0);
        const double peak = 1000.0 * (0.6 + 0.4 * std::cos(phase)) * clouds;
        for (int h = 0; h < 24; ++h) values.push_back(daylight_arc(h, day_length, peak));
      }
      values.push_back(0.0);
      break;
    }
  }
  return TimeSeries::make(Channel::kIrradiance, "W/m2", start, chr::hours{1}, std::move(values));
}

}  // namespace voltlab
