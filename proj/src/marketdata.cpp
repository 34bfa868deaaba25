/*
 * Copyright 2026 The csgp-hedge Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "csgp/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include "csgp/errors.hpp"

namespace csgp {

namespace {

using std::chrono::day;
using std::chrono::month;
using std::chrono::sys_days;
using std::chrono::year;
using std::chrono::year_month;
using std::chrono::year_month_day;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

template <typename T>
bool parse_int(std::string_view s, T &out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double &out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail_line(std::size_t line, const std::string &what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

// Reads the header and data rows, checking the header and column count.
// Calls `row(fields, line_number)` for every nonblank data line.
template <typename F>
void read_csv(std::istream &in, std::string_view expected_header, F &&row) {
  std::string line;
  std::size_t n = 0;
  bool header_seen = false;
  const std::size_t columns = split_fields(expected_header).size();
  while (std::getline(in, line)) {
    ++n;
    std::string_view view = line;
    if (n == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    view = trim(view);
    if (!header_seen) {
      if (view != expected_header) {
        fail_line(n, "unexpected header '" + std::string(view) + "', expected '" +
                         std::string(expected_header) + "'");
      }
      header_seen = true;
      continue;
    }
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() != columns) {
      fail_line(n, "expected " + std::to_string(columns) + " fields, found " +
                       std::to_string(fields.size()));
    }
    row(fields, n);
  }
  if (!header_seen) throw DataError("line 1: missing header");
}

std::ifstream open_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace

HourStamp HourStamp::from_date(year_month_day date, int hour) {
  if (!date.ok()) throw ConfigError("invalid calendar date");
  if (hour < 0 || hour > 23) throw ConfigError("hour must lie in 0..23");
  return {static_cast<std::int64_t>(sys_days(date).time_since_epoch().count()) * 24 + hour};
}

year_month_day HourStamp::date() const {
  return year_month_day(sys_days(std::chrono::days(floor_div(value, 24))));
}

int HourStamp::hour() const {
  return static_cast<int>(value - floor_div(value, 24) * 24);
}

std::chrono::weekday HourStamp::weekday() const {
  return std::chrono::weekday(sys_days(std::chrono::days(floor_div(value, 24))));
}

std::string HourStamp::iso() const {
  char buf[32];
  const auto d = date();
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()), hour());
  return buf;
}

std::optional<year_month_day> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
      !parse_int(s.substr(8, 2), d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year(y), month(m), day(d)};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::optional<year_month> parse_month(std::string_view s) {
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m)) return std::nullopt;
  const year_month ym{year(y), month(m)};
  if (!ym.ok()) return std::nullopt;
  return ym;
}

std::string format_month(year_month ym) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", static_cast<int>(ym.year()),
                static_cast<unsigned>(ym.month()));
  return buf;
}

std::string format_date(year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<std::int64_t> parse_timestamp_minutes(std::string_view s) {
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return std::nullopt;
  const auto date = parse_date(s.substr(0, 10));
  if (!date) return std::nullopt;
  int hh = 0;
  int mm = 0;
  if (!parse_int(s.substr(11, 2), hh) || !parse_int(s.substr(14, 2), mm)) return std::nullopt;
  if (hh > 23 || mm > 59 || hh < 0 || mm < 0) return std::nullopt;
  if (s.size() != 16) {
    int ss = 0;
    if (s.size() != 19 || s[16] != ':' || !parse_int(s.substr(17, 2), ss) || ss != 0) {
      return std::nullopt;
    }
  }
  return HourStamp::from_date(*date, hh).value * 60 + mm;
}

std::vector<HourStamp> month_hours(year_month ym) {
  if (!ym.ok()) throw ConfigError("invalid month");
  const HourStamp begin = HourStamp::from_date(ym / day(1));
  const HourStamp end = HourStamp::from_date((ym + std::chrono::months(1)) / day(1));
  std::vector<HourStamp> out;
  out.reserve(static_cast<std::size_t>(end - begin));
  for (HourStamp h = begin; h < end; h = h + 1) out.push_back(h);
  return out;
}

std::string_view unit_name(Unit unit) {
  switch (unit) {
    case Unit::kGbpPerMwh:
      return "GBP/MWh";
    case Unit::kMwh:
      return "MWh";
    case Unit::kNormalized:
      return "normalized";
  }
  return "?";
}

void HourlySeries::validate() const {
  if (hours.size() != values.size()) throw DataError("hourly series columns differ in length");
  for (std::size_t i = 0; i < hours.size(); ++i) {
    if (!std::isfinite(values[i])) throw DataError("non-finite value at " + hours[i].iso());
    if (i > 0 && !(hours[i - 1] < hours[i])) {
      throw DataError("hours not strictly increasing at " + hours[i].iso());
    }
  }
}

std::optional<std::size_t> HourlySeries::find(HourStamp hour) const {
  const auto it = std::lower_bound(hours.begin(), hours.end(), hour);
  if (it == hours.end() || *it != hour) return std::nullopt;
  return static_cast<std::size_t>(it - hours.begin());
}

HourlySeries HourlySeries::slice(HourStamp begin, HourStamp end) const {
  const auto lo = std::lower_bound(hours.begin(), hours.end(), begin) - hours.begin();
  const auto hi = std::lower_bound(hours.begin(), hours.end(), end) - hours.begin();
  HourlySeries out;
  out.unit = unit;
  if (hi > lo) {
    out.hours.assign(hours.begin() + lo, hours.begin() + hi);
    out.values.assign(values.begin() + lo, values.begin() + hi);
  }
  return out;
}

std::vector<HourStamp> HourlySeries::missing(HourStamp begin, HourStamp end) const {
  std::vector<HourStamp> out;
  auto it = std::lower_bound(hours.begin(), hours.end(), begin);
  for (HourStamp h = begin; h < end; h = h + 1) {
    if (it != hours.end() && *it == h) {
      ++it;
    } else {
      out.push_back(h);
    }
  }
  return out;
}

LoadConversion demand_to_load(const RawDemandSeries &raw, GapPolicy policy) {
  if (raw.minutes.size() != raw.demand_mw.size()) {
    throw DataError("demand columns differ in length");
  }
  LoadConversion out;
  out.load.unit = Unit::kMwh;
  if (raw.minutes.empty()) return out;
  struct Slot {
    int at_00 = 0;
    int at_30 = 0;
    double sum = 0.0;
  };
  std::map<std::int64_t, Slot> slots;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::int64_t m = raw.minutes[i];
    const std::int64_t minute = m - floor_div(m, 60) * 60;
    if (minute != 0 && minute != 30) {
      throw DataError("demand reading off the half-hour grid at " +
                      HourStamp{floor_div(m, 60)}.iso());
    }
    if (!std::isfinite(raw.demand_mw[i])) throw DataError("non-finite demand reading");
    Slot &s = slots[floor_div(m, 60)];
    (minute == 0 ? s.at_00 : s.at_30) += 1;
    s.sum += raw.demand_mw[i];
  }
  const std::int64_t first = slots.begin()->first;
  const std::int64_t last = slots.rbegin()->first;
  for (std::int64_t h = first; h <= last; ++h) {
    const auto it = slots.find(h);
    if (it == slots.end() || it->second.at_00 != 1 || it->second.at_30 != 1) {
      out.gaps.push_back({h});
      continue;
    }
    out.load.hours.push_back({h});
    out.load.values.push_back(0.5 * it->second.sum);
  }
  if (policy == GapPolicy::kThrow && !out.gaps.empty()) {
    std::vector<std::string> stamps;
    for (const auto &g : out.gaps) stamps.push_back(g.iso());
    const std::string what = std::to_string(out.gaps.size()) +
                             " hour(s) lack both half-hour readings, first " + stamps.front();
    throw GapError(what, std::move(stamps));
  }
  return out;
}

SeriesStatistics series_statistics(std::span<const double> values) {
  if (values.empty()) throw DegenerateStatsError("statistics of an empty series");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  if (!(sd > 0.0)) throw DegenerateStatsError("series has zero variance");
  return {mean, sd};
}

CapStatistics capping_statistics(const HourlySeries &price, const HourlySeries &load,
                                 double num_sd) {
  if (!(num_sd > 0.0)) throw ConfigError("capping width must be positive");
  return {series_statistics(price.values), series_statistics(load.values), num_sd};
}

CapResult cap_spikes(const HourlySeries &price, const HourlySeries &load,
                     const CapStatistics &stats) {
  if (price.hours != load.hours) throw DataError("price and load are not on the same hourly grid");
  CapResult out{price, load, {}, 0};
  const double plo = stats.price.mean - stats.num_sd * stats.price.sd;
  const double phi = stats.price.mean + stats.num_sd * stats.price.sd;
  const double llo = stats.load.mean - stats.num_sd * stats.load.sd;
  const double lhi = stats.load.mean + stats.num_sd * stats.load.sd;
  for (std::size_t i = 0; i < price.size(); ++i) {
    const double p = price.values[i];
    if (p >= plo && p <= phi) continue;
    const double l = load.values[i];
    CapEvent ev{price.hours[i], p, std::clamp(p, plo, phi), l, std::clamp(l, llo, lhi)};
    out.price.values[i] = ev.price_after;
    out.load.values[i] = ev.load_after;
    if (ev.load_after != l) ++out.load_clipped;
    out.log.push_back(ev);
  }
  return out;
}

CapResult cap_spikes(const HourlySeries &price, const HourlySeries &load) {
  return cap_spikes(price, load, capping_statistics(price, load));
}

HourlySeries normalize_load(const HourlySeries &load, double global_max) {
  if (!(global_max > 0.0) || !std::isfinite(global_max)) {
    throw ConfigError("normalization maximum must be positive");
  }
  HourlySeries out = load;
  out.unit = Unit::kNormalized;
  for (double &v : out.values) v /= global_max;
  return out;
}

HourClass classify_hour(HourStamp hour) {
  const unsigned wd = hour.weekday().iso_encoding();  // Mon = 1 .. Sun = 7
  const int h = hour.hour();
  return (wd <= 5 && h >= 7 && h <= 18) ? HourClass::kPeak : HourClass::kOffPeak;
}

MonthPartition partition_month(year_month ym) {
  MonthPartition out;
  for (HourStamp h : month_hours(ym)) {
    (classify_hour(h) == HourClass::kPeak ? out.peak : out.off_peak).push_back(h);
  }
  return out;
}

SdBuckets sd_buckets(std::span<const double> values) {
  SdBuckets out;
  out.stats = series_statistics(values);
  out.total = values.size();
  for (double v : values) {
    const double z = std::abs(v - out.stats.mean) / out.stats.sd;
    const auto b = std::min<std::size_t>(kSdBuckets - 1, static_cast<std::size_t>(z));
    ++out.counts[b];
  }
  for (std::size_t b = 0; b < kSdBuckets; ++b) {
    out.percent[b] = 100.0 * static_cast<double>(out.counts[b]) / static_cast<double>(out.total);
  }
  return out;
}

SdHistogram sd_bucket_histogram(const HourlySeries &series) {
  std::vector<double> peak;
  std::vector<double> off;
  for (std::size_t i = 0; i < series.size(); ++i) {
    (classify_hour(series.hours[i]) == HourClass::kPeak ? peak : off).push_back(series.values[i]);
  }
  if (peak.empty() || off.empty()) {
    throw DegenerateStatsError("histogram needs both peak and off-peak hours");
  }
  return {sd_buckets(peak), sd_buckets(off)};
}

HourlySeries read_spot_csv(std::istream &in) {
  HourlySeries out;
  out.unit = Unit::kGbpPerMwh;
  read_csv(in, "timestamp,price_gbp_mwh", [&](const auto &f, std::size_t n) {
    const auto minutes = parse_timestamp_minutes(f[0]);
    if (!minutes) fail_line(n, "bad timestamp '" + std::string(f[0]) + "'");
    if (*minutes % 60 != 0) fail_line(n, "spot timestamp not on the hour");
    double v = 0.0;
    if (!parse_double(f[1], v)) fail_line(n, "bad price '" + std::string(f[1]) + "'");
    const HourStamp h{*minutes / 60};
    if (!out.hours.empty() && !(out.hours.back() < h)) {
      fail_line(n, "timestamps must be strictly increasing");
    }
    out.hours.push_back(h);
    out.values.push_back(v);
  });
  return out;
}

RawDemandSeries read_demand_csv(std::istream &in) {
  RawDemandSeries out;
  read_csv(in, "timestamp,demand_mw", [&](const auto &f, std::size_t n) {
    const auto minutes = parse_timestamp_minutes(f[0]);
    if (!minutes) fail_line(n, "bad timestamp '" + std::string(f[0]) + "'");
    if (*minutes % 30 != 0) fail_line(n, "demand timestamp not at :00 or :30");
    double v = 0.0;
    if (!parse_double(f[1], v) || v < 0.0) fail_line(n, "bad demand '" + std::string(f[1]) + "'");
    if (!out.minutes.empty() && *minutes < out.minutes.back()) {
      fail_line(n, "timestamps must not decrease");
    }
    out.minutes.push_back(*minutes);
    out.demand_mw.push_back(v);
  });
  return out;
}

std::vector<ForwardQuote> read_forwards_csv(std::istream &in) {
  std::vector<ForwardQuote> out;
  std::set<std::pair<int, int>> seen;
  read_csv(in, "delivery_month,quote_date,base_close,peak_close",
           [&](const auto &f, std::size_t n) {
             const auto ym = parse_month(f[0]);
             if (!ym) fail_line(n, "bad delivery month '" + std::string(f[0]) + "'");
             const auto qd = parse_date(f[1]);
             if (!qd) fail_line(n, "bad quote date '" + std::string(f[1]) + "'");
             ForwardQuote q{*ym, *qd, 0.0, 0.0};
             if (!parse_double(f[2], q.base)) fail_line(n, "bad base price");
             if (!parse_double(f[3], q.peak)) fail_line(n, "bad peak price");
             if (!(q.base > 0.0) || q.peak < q.base) {
               fail_line(n, "forward prices must satisfy 0 < base <= peak");
             }
             const int mkey = static_cast<int>(ym->year()) * 12 + static_cast<int>(static_cast<unsigned>(ym->month()));
             const int dkey = static_cast<int>(sys_days(*qd).time_since_epoch().count());
             if (!seen.insert({mkey, dkey}).second) fail_line(n, "duplicate quote");
             out.push_back(q);
           });
  return out;
}

HourlySeries read_spot_csv(const std::string &path) {
  auto in = open_file(path);
  return read_spot_csv(in);
}

RawDemandSeries read_demand_csv(const std::string &path) {
  auto in = open_file(path);
  return read_demand_csv(in);
}

std::vector<ForwardQuote> read_forwards_csv(const std::string &path) {
  auto in = open_file(path);
  return read_forwards_csv(in);
}

}  // namespace csgp
