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

#include "csgp/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csgp/errors.hpp"
#include "json.hpp"

namespace csgp {

namespace {

using nlohmann::ordered_json;

// Rounded to six significant digits so JSON prints the same digits as CSV.
ordered_json number(double v) {
  return std::strtod(format_number(v).c_str(), nullptr);
}

ordered_json number(const std::optional<double> &v) {
  return v ? number(*v) : ordered_json(nullptr);
}

template <typename T>
ordered_json maybe(const std::optional<T> &v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value == 0.0 ? 0.0 : value);
  return buf;
}

std::string format_number(const std::optional<double> &value) {
  return value ? format_number(*value) : std::string();
}

std::string monthly_csv(const BacktestReport &report) {
  std::ostringstream os;
  os << "month,strategy,v_base,v_peak,payoff_mio_gbp\n";
  for (const auto &m : report.months) {
    const std::string month = format_month(m.month);
    for (std::size_t s = 0; s < report.strategies.size(); ++s) {
      os << month << ',' << report.strategies[s] << ',';
      if (m.skipped) {
        os << ",,\n";
        continue;
      }
      const auto &r = m.strategies[s];
      os << format_number(r.position.base) << ',' << format_number(r.position.peak) << ','
         << format_number(r.payoff.mio_gbp) << '\n';
    }
  }
  return os.str();
}

std::string cumulative_csv(const BacktestReport &report) {
  std::ostringstream os;
  os << "month";
  for (const auto &v : report.variants) os << ",excess_cum_" << v;
  os << '\n';
  for (std::size_t i = 0; i < report.months.size(); ++i) {
    os << format_month(report.months[i].month);
    for (std::size_t v = 0; v < report.variants.size(); ++v) {
      os << ',' << format_number(report.cumulative_excess[v][i]);
    }
    os << '\n';
  }
  return os.str();
}

std::string summary_json(const BacktestReport &report) {
  ordered_json j;
  j["seed"] = report.seed;
  j["comparator"] = kComparatorName;
  j["strategies"] = report.strategies;
  ordered_json totals = ordered_json::object();
  for (std::size_t s = 0; s < report.strategies.size(); ++s) {
    totals[report.strategies[s]] = number(report.totals[s]);
  }
  j["total_payoff_mio_gbp"] = totals;
  ordered_json excess = ordered_json::object();
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    excess[report.variants[v]] = number(report.total_excess[v]);
  }
  j["total_excess_mio_gbp"] = excess;
  std::size_t run = 0;
  ordered_json skipped = ordered_json::array();
  ordered_json months = ordered_json::array();
  for (const auto &m : report.months) {
    ordered_json row;
    row["month"] = format_month(m.month);
    row["initiation_date"] = format_date(m.initiation);
    row["seed"] = m.seed;
    row["status"] = m.skipped ? "skipped" : "ok";
    row["reason"] = m.skipped ? ordered_json(m.skip_reason) : ordered_json(nullptr);
    row["quote_date"] = m.quote ? ordered_json(format_date(m.quote->quote_date)) : ordered_json(nullptr);
    row["base_forward"] = m.quote ? number(m.quote->base) : ordered_json(nullptr);
    row["peak_forward"] = m.quote ? number(m.quote->peak) : ordered_json(nullptr);
    row["global_max_load_mwh"] = number(m.global_max_load);
    ordered_json strategies = ordered_json::object();
    for (const auto &s : m.strategies) {
      ordered_json e;
      e["v_base"] = number(s.position.base);
      e["v_peak"] = number(s.position.peak);
      e["payoff_gbp"] = number(s.payoff.gbp);
      e["payoff_mio_gbp"] = number(s.payoff.mio_gbp);
      e["converged"] = s.converged;
      e["warning"] = s.warning.empty() ? ordered_json(nullptr) : ordered_json(s.warning);
      e["log_marginal_likelihood"] = number(s.log_marginal_likelihood);
      e["inducing_points"] = maybe(s.inducing_points);
      e["price_capped_hours"] = maybe(s.price_capped_hours);
      e["load_capped_hours"] = maybe(s.load_capped_hours);
      strategies[s.strategy] = e;
    }
    row["strategies"] = strategies;
    months.push_back(row);
    if (m.skipped) {
      skipped.push_back({{"month", format_month(m.month)}, {"reason", m.skip_reason}});
    } else {
      ++run;
    }
  }
  j["months_run"] = run;
  j["months_skipped"] = skipped;
  j["months"] = months;
  return j.dump(2) + "\n";
}

void emit_report(const BacktestReport &report, const std::string &dir, ReportFormat format,
                 bool dump_models) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
  const fs::path base(dir);
  if (format == ReportFormat::kCsv) {
    write_file(base / "monthly.csv", monthly_csv(report));
    write_file(base / "cumulative.csv", cumulative_csv(report));
  }
  write_file(base / "summary.json", summary_json(report));
  if (!dump_models) return;
  fs::create_directories(base / "models", ec);
  if (ec) throw ConfigError("cannot create " + (base / "models").string());
  for (const auto &m : report.months) {
    for (const auto &s : m.strategies) {
      if (s.model_dump.empty()) continue;
      write_file(base / "models" / (format_month(m.month) + "_" + s.strategy + ".txt"), s.model_dump);
    }
  }
}

}  // namespace csgp
