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

#ifndef CSGP_SYNTHETIC_HPP_
#define CSGP_SYNTHETIC_HPP_

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "csgp/backtest.hpp"
#include "csgp/marketdata.hpp"

namespace csgp {

/*
 * Coupled price/load generator.  A shared latent driver
 *   g(t) = daily shape + weekly shape + slow trend + AR(1)
 * moves both series:
 *   price = price_level + price_scale * g + noise
 *   load  = load_level + load_scale * g + noise   (MW, as :00/:30 readings
 *                                                  averaging to the hour)
 * Each month's forwards are quoted on its default initiation date at the
 * expected spot level over base or peak hours times (1 + forward_premium).
 */
struct SyntheticOptions {
  std::chrono::year_month first_month{std::chrono::year(2016), std::chrono::month(11)};
  int months = 8;
  std::uint64_t seed = 0;

  double price_level = 50.0;
  double price_scale = 10.0;
  double price_noise = 2.0;
  double load_level_mw = 32000.0;
  double load_scale_mw = 5000.0;
  double load_noise_mw = 250.0;
  double half_hour_spread_mw = 150.0;

  double ar_coefficient = 0.97;
  /// Stationary standard deviation of the AR(1) part of g.
  double ar_sd = 0.4;
  double trend_amplitude = 0.2;
  double trend_period_days = 365.0;
  double forward_premium = 0.05;
};

struct SyntheticData {
  HourlySeries spot;
  RawDemandSeries demand;
  std::vector<ForwardQuote> forwards;
};

SyntheticData generate_synthetic(const SyntheticOptions &options);

/// Converts demand to load the same way `load_market_data` does.
MarketData to_market_data(const SyntheticData &data);

/// Writes spot.csv, demand.csv and forwards.csv into `dir`.
void write_synthetic(const SyntheticData &data, const std::string &dir);

}  // namespace csgp

#endif  // CSGP_SYNTHETIC_HPP_
