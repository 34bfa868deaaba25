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

#include "csgp/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "csgp/config.hpp"
#include "csgp/errors.hpp"
#include "csgp/gp.hpp"

namespace csgp {

namespace {

using std::chrono::day;
using std::chrono::year_month;

double daily_shape(int hour) {
  const double t = 2.0 * std::numbers::pi * hour / 24.0;
  return 0.8 * std::cos(t - 2.0 * std::numbers::pi * 14.0 / 24.0) + 0.3 * std::cos(2.0 * t - 2.0);
}

double weekly_shape(HourStamp h) {
  const unsigned wd = h.weekday().iso_encoding();
  return wd >= 6 ? -0.5 : 0.2;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions &o) {
  if (o.months < 1) throw ConfigError("synthetic data needs at least one month");
  if (!(std::abs(o.ar_coefficient) < 1.0)) throw ConfigError("AR coefficient must lie in (-1, 1)");
  const HourStamp begin = HourStamp::from_date(o.first_month / day(1));
  const year_month last = o.first_month + std::chrono::months(o.months - 1);
  const HourStamp end = HourStamp::from_date((last + std::chrono::months(1)) / day(1));

  std::mt19937_64 rng(mix_seed(o.seed, 0x5157));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  const double trend_phase = uniform(rng);
  const double innovation = o.ar_sd * std::sqrt(1.0 - o.ar_coefficient * o.ar_coefficient);
  auto deterministic = [&](HourStamp h) {
    const double days = static_cast<double>(h.value) / 24.0;
    return daily_shape(h.hour()) + weekly_shape(h) +
           o.trend_amplitude * std::sin(2.0 * std::numbers::pi * days / o.trend_period_days + trend_phase);
  };

  SyntheticData out;
  out.spot.unit = Unit::kGbpPerMwh;
  double ar = o.ar_sd * normal(rng);
  for (HourStamp h = begin; h < end; h = h + 1) {
    ar = o.ar_coefficient * ar + innovation * normal(rng);
    const double g = deterministic(h) + ar;
    out.spot.hours.push_back(h);
    out.spot.values.push_back(o.price_level + o.price_scale * g + o.price_noise * normal(rng));
    const double load = std::max(0.0, o.load_level_mw + o.load_scale_mw * g + o.load_noise_mw * normal(rng));
    const double spread = std::min(load, std::abs(o.half_hour_spread_mw * normal(rng)));
    out.demand.minutes.push_back(h.value * 60);
    out.demand.demand_mw.push_back(load + spread);
    out.demand.minutes.push_back(h.value * 60 + 30);
    out.demand.demand_mw.push_back(load - spread);
  }

  for (year_month m = o.first_month + std::chrono::months(1); month_index(m) <= month_index(last);
       m += std::chrono::months(1)) {
    const auto quote_date = default_initiation_date(m);
    if (HourStamp::from_date(quote_date) < begin) continue;
    double base = 0.0;
    double peak = 0.0;
    std::size_t n_peak = 0;
    const auto hours = month_hours(m);
    for (HourStamp h : hours) {
      const double s = o.price_level + o.price_scale * deterministic(h);
      base += s;
      if (classify_hour(h) == HourClass::kPeak) {
        peak += s;
        ++n_peak;
      }
    }
    base = base / static_cast<double>(hours.size()) * (1.0 + o.forward_premium);
    peak = peak / static_cast<double>(n_peak) * (1.0 + o.forward_premium);
    if (!(base > 0.0)) throw ConfigError("synthetic forward price is not positive");
    out.forwards.push_back({m, quote_date, base, std::max(base, peak)});
  }
  return out;
}

MarketData to_market_data(const SyntheticData &data) {
  MarketData out;
  out.spot = data.spot;
  LoadConversion conv = demand_to_load(data.demand, GapPolicy::kReport);
  out.load = std::move(conv.load);
  out.load_gaps = std::move(conv.gaps);
  out.forwards = data.forwards;
  return out;
}

void write_synthetic(const SyntheticData &data, const std::string &dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir);
  char buf[96];
  {
    std::ofstream out(fs::path(dir) / "spot.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write spot.csv in " + dir);
    out << "timestamp,price_gbp_mwh\n";
    for (std::size_t i = 0; i < data.spot.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f\n", data.spot.hours[i].iso().c_str(), data.spot.values[i]);
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(dir) / "demand.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write demand.csv in " + dir);
    out << "timestamp,demand_mw\n";
    for (std::size_t i = 0; i < data.demand.size(); ++i) {
      const std::int64_t m = data.demand.minutes[i];
      const HourStamp h{m / 60};
      std::string stamp = h.iso();
      stamp.replace(14, 2, m % 60 == 30 ? "30" : "00");
      std::snprintf(buf, sizeof(buf), "%s,%.3f\n", stamp.c_str(), data.demand.demand_mw[i]);
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(dir) / "forwards.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write forwards.csv in " + dir);
    out << "delivery_month,quote_date,base_close,peak_close\n";
    for (const auto &q : data.forwards) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f\n", format_month(q.delivery).c_str(),
                    format_date(q.quote_date).c_str(), q.base, q.peak);
      out << buf;
    }
  }
}

}  // namespace csgp
