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

#ifndef CSGP_REPORT_HPP_
#define CSGP_REPORT_HPP_

#include <optional>
#include <string>

#include "csgp/backtest.hpp"
#include "csgp/config.hpp"

namespace csgp {

/// Six significant digits, `%.6g` style; empty for a missing value.
std::string format_number(double value);
std::string format_number(const std::optional<double> &value);

/// month,strategy,v_base,v_peak,payoff_mio_gbp.  Skipped months keep one row
/// per strategy with empty value cells.
std::string monthly_csv(const BacktestReport &report);
/// month,excess_cum_<variant>...
std::string cumulative_csv(const BacktestReport &report);
std::string summary_json(const BacktestReport &report);

/// Writes monthly.csv, cumulative.csv and summary.json (csv) or only
/// summary.json (json) into `dir`, creating it if needed.  Optionally writes
/// one `models/<month>_<strategy>.txt` dump per fitted model.
void emit_report(const BacktestReport &report, const std::string &dir,
                 ReportFormat format, bool dump_models = false);

}  // namespace csgp

#endif  // CSGP_REPORT_HPP_
