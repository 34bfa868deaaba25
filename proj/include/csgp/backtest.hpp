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

#ifndef CSGP_BACKTEST_HPP_
#define CSGP_BACKTEST_HPP_

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csgp/config.hpp"
#include "csgp/hedge.hpp"
#include "csgp/marketdata.hpp"

namespace csgp {

inline constexpr const char *kComparatorName = "average-load";

struct MarketData {
  HourlySeries spot;
  /// Hourly load in MWh; hours with incomplete demand readings are absent.
  HourlySeries load;
  std::vector<HourStamp> load_gaps;
  std::vector<ForwardQuote> forwards;
};

MarketData load_market_data(const BacktestConfig &config);

/// Latest quote for `month` dated on or before `initiation`.
std::optional<ForwardQuote> select_quote(const std::vector<ForwardQuote> &forwards,
                                         std::chrono::year_month month,
                                         std::chrono::year_month_day initiation);

/// Seed of one delivery month, derived from the master seed and the
/// calendar month so single-month runs reproduce study rows.
std::uint64_t month_seed(std::uint64_t master, std::chrono::year_month month);

struct StrategyResult {
  std::string strategy;
  Position position;
  RealizedPayoff payoff;
  bool converged = true;
  std::string warning;
  std::optional<double> log_marginal_likelihood;
  std::optional<std::size_t> price_capped_hours;
  std::optional<std::size_t> load_capped_hours;
  std::optional<std::size_t> inducing_points;
  /// `name=value` lines of the fitted model.
  std::string model_dump;
};

struct MonthReport {
  std::chrono::year_month month;
  std::chrono::year_month_day initiation;
  std::uint64_t seed = 0;
  bool skipped = false;
  /// Skip caused by a numerical failure rather than a data problem.
  bool skip_numerical = false;
  std::string skip_reason;
  std::optional<ForwardQuote> quote;
  std::optional<double> global_max_load;
  /// Comparator first, then one entry per model variant.
  std::vector<StrategyResult> strategies;
};

struct BacktestReport {
  std::uint64_t seed = 0;
  std::vector<std::string> strategies;
  std::vector<std::string> variants;
  std::vector<MonthReport> months;
  /// Sum of monthly payoffs (mio GBP) over months that ran, per strategy.
  std::vector<double> totals;
  /// Per variant, running sum of (variant - comparator) payoff over months
  /// that ran; empty until the first month runs.
  std::vector<std::vector<std::optional<double>>> cumulative_excess;
  std::vector<double> total_excess;
};

/// Runs the hedging pipeline for one delivery month.  Data problems and
/// numerical failures mark the month skipped with a reason.
MonthReport run_month(const BacktestConfig &config, const MarketData &data,
                      std::chrono::year_month month);

/// Aggregates month rows in calendar order.
BacktestReport assemble_report(const BacktestConfig &config,
                               std::vector<MonthReport> months);

/// Every configured month, concurrently when `threads > 1`.  Throws DataError
/// when every month is skipped.
BacktestReport run_study(const BacktestConfig &config, const MarketData &data);

}  // namespace csgp

#endif  // CSGP_BACKTEST_HPP_
