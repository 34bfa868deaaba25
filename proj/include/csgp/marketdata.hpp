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

#ifndef CSGP_MARKETDATA_HPP_
#define CSGP_MARKETDATA_HPP_

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csgp {

/// Whole hours since 1970-01-01T00:00, naive local time.
struct HourStamp {
  std::int64_t value = 0;

  static HourStamp from_date(std::chrono::year_month_day date, int hour = 0);
  std::chrono::year_month_day date() const;
  int hour() const;
  std::chrono::weekday weekday() const;
  /// `YYYY-MM-DDTHH:00`.
  std::string iso() const;

  HourStamp operator+(std::int64_t hours) const { return {value + hours}; }
  std::int64_t operator-(HourStamp other) const { return value - other.value; }
  auto operator<=>(const HourStamp &) const = default;
};

/// Parses `YYYY-MM-DD[T ]HH:MM[:SS]` into minutes since the epoch.
std::optional<std::int64_t> parse_timestamp_minutes(std::string_view text);
std::optional<std::chrono::year_month_day> parse_date(std::string_view text);
/// `YYYY-MM`.
std::optional<std::chrono::year_month> parse_month(std::string_view text);
std::string format_month(std::chrono::year_month month);
std::string format_date(std::chrono::year_month_day date);

/// Every hour of a calendar month, in order.
std::vector<HourStamp> month_hours(std::chrono::year_month month);

enum class Unit { kGbpPerMwh, kMwh, kNormalized };

std::string_view unit_name(Unit unit);

struct HourlySeries {
  std::vector<HourStamp> hours;
  std::vector<double> values;
  Unit unit = Unit::kGbpPerMwh;

  std::size_t size() const { return hours.size(); }
  /// Strictly increasing hours, finite values, equal lengths.
  void validate() const;
  /// Index of `hour`, if present.
  std::optional<std::size_t> find(HourStamp hour) const;
  /// Sub-series with hours in [begin, end).
  HourlySeries slice(HourStamp begin, HourStamp end) const;
  /// Hours in [begin, end) missing from the series.
  std::vector<HourStamp> missing(HourStamp begin, HourStamp end) const;
};

/// Half-hourly demand snapshots.
struct RawDemandSeries {
  std::vector<std::int64_t> minutes;
  std::vector<double> demand_mw;

  std::size_t size() const { return minutes.size(); }
};

struct LoadConversion {
  HourlySeries load;
  /// Hours between the first and last reading lacking exactly one reading at
  /// :00 and one at :30 (missing or duplicated, e.g. across DST changes).
  std::vector<HourStamp> gaps;
};

enum class GapPolicy { kThrow, kReport };

/// Hourly load in MWh as the mean of the :00 and :30 readings.  With
/// GapPolicy::kThrow any gap raises GapError listing every gap hour.
LoadConversion demand_to_load(const RawDemandSeries &raw,
                              GapPolicy policy = GapPolicy::kThrow);

struct SeriesStatistics {
  double mean = 0.0;
  double sd = 0.0;
};

/// Population mean and standard deviation.  Throws DegenerateStatsError for
/// empty input or zero variance.
SeriesStatistics series_statistics(std::span<const double> values);

struct CapStatistics {
  SeriesStatistics price;
  SeriesStatistics load;
  double num_sd = 3.0;
};

CapStatistics capping_statistics(const HourlySeries &price,
                                 const HourlySeries &load, double num_sd = 3.0);

struct CapEvent {
  HourStamp hour;
  double price_before = 0.0;
  double price_after = 0.0;
  double load_before = 0.0;
  double load_after = 0.0;
};

struct CapResult {
  HourlySeries price;
  HourlySeries load;
  std::vector<CapEvent> log;
  std::size_t load_clipped = 0;
};

/// Clips price to mean +/- num_sd * SD.  At every clipped hour load is also
/// clipped to its own band.  Statistics are passed in so repeated application
/// is idempotent.
CapResult cap_spikes(const HourlySeries &price, const HourlySeries &load,
                     const CapStatistics &stats);
CapResult cap_spikes(const HourlySeries &price, const HourlySeries &load);

/// Divides by `global_max`; throws ConfigError unless it is positive.
HourlySeries normalize_load(const HourlySeries &load, double global_max);

enum class HourClass { kOffPeak, kPeak };

/// Peak: Monday to Friday, hour starting 07:00 through 18:00.
HourClass classify_hour(HourStamp hour);

struct MonthPartition {
  std::vector<HourStamp> peak;
  std::vector<HourStamp> off_peak;
};

MonthPartition partition_month(std::chrono::year_month month);

inline constexpr std::size_t kSdBuckets = 6;

struct SdBuckets {
  SeriesStatistics stats;
  std::size_t total = 0;
  /// |x - mean| / sd in [0,1), [1,2), ..., [4,5), [5, inf).
  std::array<std::size_t, kSdBuckets> counts{};
  std::array<double, kSdBuckets> percent{};
};

SdBuckets sd_buckets(std::span<const double> values);

struct SdHistogram {
  SdBuckets peak;
  SdBuckets off_peak;
};

/// Per-class histogram, each class against its own mean and SD.
SdHistogram sd_bucket_histogram(const HourlySeries &series);

struct ForwardQuote {
  std::chrono::year_month delivery;
  std::chrono::year_month_day quote_date;
  double base = 0.0;
  double peak = 0.0;
};

/// CSV readers.  Headers must match exactly; any malformed row raises
/// DataError naming its line number.
HourlySeries read_spot_csv(std::istream &in);
RawDemandSeries read_demand_csv(std::istream &in);
std::vector<ForwardQuote> read_forwards_csv(std::istream &in);

HourlySeries read_spot_csv(const std::string &path);
RawDemandSeries read_demand_csv(const std::string &path);
std::vector<ForwardQuote> read_forwards_csv(const std::string &path);

}  // namespace csgp

#endif  // CSGP_MARKETDATA_HPP_
