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

#ifndef CSGP_CONFIG_HPP_
#define CSGP_CONFIG_HPP_

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "csgp/kernels.hpp"

namespace csgp {

/// One CSGP model configuration run alongside the comparator.
struct ModelVariant {
  int window_months = 1;
  double sparsity = 0.10;

  /// e.g. `csgp-1m-10pct`.
  std::string name() const;
  /// 720 hours per month of window.
  int window_hours() const { return 720 * window_months; }
};

enum class ReportFormat { kCsv, kJson };

struct BacktestConfig {
  std::string spot_csv;
  std::string demand_csv;
  std::string forwards_csv;
  std::chrono::year_month start_month{std::chrono::year(2016), std::chrono::month(1)};
  std::chrono::year_month end_month{std::chrono::year(2018), std::chrono::month(12)};
  /// Overrides keyed by month index (year * 12 + month - 1).
  std::map<int, std::chrono::year_month_day> initiation;

  std::vector<int> windows{1};
  std::vector<double> sparsities{0.10};
  std::vector<CompositeLeaf> kernel{kAllCompositeLeaves.begin(), kAllCompositeLeaves.end()};

  int restarts = 5;
  int max_iterations = 200;
  double relative_jitter = 1e-6;
  int n_samples = 1000;
  int optimizer_grid = 11;
  std::uint64_t seed = 0;

  double retailer_share = 0.015;
  double base_margin = 0.0;
  double peak_margin = 0.0;
  double loss_scale = 100.0;
  double capping_sd = 3.0;
  int max_gap_hours = 0;

  int threads = 1;
  std::string out_dir = "out";
  ReportFormat format = ReportFormat::kCsv;
  bool dump_models = false;

  std::vector<ModelVariant> variants() const;
  std::vector<std::chrono::year_month> months() const;
  void validate() const;
};

int month_index(std::chrono::year_month month);

/// Parses `key = value` lines; `#` starts a comment.  Unknown or repeated
/// keys raise ConfigError with the line number.  Relative file paths are
/// resolved against `base_dir`.
BacktestConfig parse_config(std::istream &in, const std::string &base_dir = "");
BacktestConfig load_config(const std::string &path);

/// Hedge initiation date: configured override, else the built-in table,
/// else the weekday nearest to 14 days before the month starts.
std::chrono::year_month_day initiation_date(const BacktestConfig &config,
                                            std::chrono::year_month month);
std::chrono::year_month_day default_initiation_date(std::chrono::year_month month);

ReportFormat parse_format(const std::string &text);

}  // namespace csgp

#endif  // CSGP_CONFIG_HPP_
