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

#include "csgp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <set>

#include "csgp/errors.hpp"
#include "csgp/marketdata.hpp"

namespace csgp {

namespace {

using std::chrono::day;
using std::chrono::month;
using std::chrono::sys_days;
using std::chrono::year;
using std::chrono::year_month;
using std::chrono::year_month_day;

constexpr year_month_day ymd(int y, unsigned m, unsigned d) {
  return year_month_day{year(y), month(m), day(d)};
}

// Hedge initiation dates used for 2016-2018 deliveries.
const std::map<int, year_month_day> &initiation_table() {
  static const std::map<int, year_month_day> table = [] {
    const std::pair<year_month, year_month_day> rows[] = {
        {year(2016) / 1, ymd(2015, 12, 18)}, {year(2016) / 2, ymd(2016, 1, 18)},
        {year(2016) / 3, ymd(2016, 2, 16)},  {year(2016) / 4, ymd(2016, 3, 21)},
        {year(2016) / 5, ymd(2016, 4, 18)},  {year(2016) / 6, ymd(2016, 5, 19)},
        {year(2016) / 7, ymd(2016, 6, 20)},  {year(2016) / 8, ymd(2016, 7, 18)},
        {year(2016) / 9, ymd(2016, 8, 18)},  {year(2016) / 10, ymd(2016, 9, 19)},
        {year(2016) / 11, ymd(2016, 10, 18)}, {year(2016) / 12, ymd(2016, 11, 17)},
        {year(2017) / 1, ymd(2016, 12, 19)}, {year(2017) / 2, ymd(2017, 1, 18)},
        {year(2017) / 3, ymd(2017, 2, 15)},  {year(2017) / 4, ymd(2017, 3, 20)},
        {year(2017) / 5, ymd(2017, 4, 18)},  {year(2017) / 6, ymd(2017, 5, 18)},
        {year(2017) / 7, ymd(2017, 6, 16)},  {year(2017) / 8, ymd(2017, 7, 18)},
        {year(2017) / 9, ymd(2017, 8, 18)},  {year(2017) / 10, ymd(2017, 9, 15)},
        {year(2017) / 11, ymd(2017, 10, 18)}, {year(2017) / 12, ymd(2017, 11, 17)},
        {year(2018) / 1, ymd(2017, 12, 18)}, {year(2018) / 3, ymd(2018, 2, 15)},
        {year(2018) / 4, ymd(2018, 3, 16)},  {year(2018) / 5, ymd(2018, 4, 17)},
        {year(2018) / 6, ymd(2018, 5, 18)},  {year(2018) / 7, ymd(2018, 6, 18)},
        {year(2018) / 8, ymd(2018, 7, 18)},  {year(2018) / 9, ymd(2018, 8, 17)},
        {year(2018) / 10, ymd(2018, 9, 17)}, {year(2018) / 11, ymd(2018, 10, 18)},
        {year(2018) / 12, ymd(2018, 11, 16)},
    };
    std::map<int, year_month_day> out;
    for (const auto &[m, d] : rows) out.emplace(month_index(m), d);
    return out;
  }();
  return table;
}

[[noreturn]] void bad_value(std::size_t line, const std::string &key, const std::string &value) {
  throw ConfigError("config line " + std::to_string(line) + ": invalid value '" + value +
                    "' for " + key);
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool to_int(const std::string &s, T &out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && p == s.data() + s.size();
}

bool to_double(const std::string &s, double &out) {
  if (s.empty()) return false;
  char *end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string format_percent(double sparsity) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", sparsity * 100.0);
  return buf;
}

}  // namespace

int month_index(year_month m) {
  return static_cast<int>(m.year()) * 12 + static_cast<int>(static_cast<unsigned>(m.month())) - 1;
}

std::string ModelVariant::name() const {
  return "csgp-" + std::to_string(window_months) + "m-" + format_percent(sparsity) + "pct";
}

std::vector<ModelVariant> BacktestConfig::variants() const {
  std::vector<ModelVariant> out;
  for (int w : windows)
    for (double s : sparsities) out.push_back({w, s});
  return out;
}

std::vector<year_month> BacktestConfig::months() const {
  std::vector<year_month> out;
  for (year_month m = start_month; month_index(m) <= month_index(end_month); m += std::chrono::months(1)) {
    out.push_back(m);
  }
  return out;
}

void BacktestConfig::validate() const {
  if (month_index(start_month) > month_index(end_month)) {
    throw ConfigError("start_month is after end_month");
  }
  if (windows.empty() || sparsities.empty()) throw ConfigError("no model variants configured");
  std::set<std::string> names;
  for (int w : windows) {
    if (w < 1 || w > 3) throw ConfigError("windows must be 1, 2 or 3 months");
  }
  for (double s : sparsities) {
    if (!(s > 0.0) || s > 1.0) throw ConfigError("sparsities must lie in (0, 1]");
  }
  for (const auto &v : variants()) {
    if (!names.insert(v.name()).second) throw ConfigError("duplicate model variant " + v.name());
  }
  if (kernel.empty()) throw ConfigError("kernel needs at least one term");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(relative_jitter > 0.0)) throw ConfigError("relative_jitter must be positive");
  if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (optimizer_grid < 2) throw ConfigError("optimizer_grid must be at least 2");
  if (!(retailer_share > 0.0) || retailer_share > 1.0) {
    throw ConfigError("retailer_share must lie in (0, 1]");
  }
  if (!(base_margin >= 0.0) || !(peak_margin >= 0.0)) throw ConfigError("margins must be nonnegative");
  if (!(loss_scale > 0.0)) throw ConfigError("loss_scale must be positive");
  if (!(capping_sd > 0.0)) throw ConfigError("capping_sd must be positive");
  if (max_gap_hours < 0) throw ConfigError("max_gap_hours must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  for (const auto &[idx, date] : initiation) {
    const year_month m{year(idx / 12), month(static_cast<unsigned>(idx % 12 + 1))};
    if (sys_days(date) >= sys_days(m / day(1))) {
      throw ConfigError("initiation date for " + format_month(m) +
                        " must precede the delivery month");
    }
  }
}

ReportFormat parse_format(const std::string &text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "json") return ReportFormat::kJson;
  throw ConfigError("format must be csv or json, got '" + text + "'");
}

BacktestConfig parse_config(std::istream &in, const std::string &base_dir) {
  BacktestConfig c;
  auto path = [&](const std::string &v) {
    std::filesystem::path p(v);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    return p.string();
  };
  using Setter = std::function<void(const std::string &, std::size_t)>;
  auto int_setter = [](int &field, const char *key) -> Setter {
    return [&field, key](const std::string &v, std::size_t n) {
      if (!to_int(v, field)) bad_value(n, key, v);
    };
  };
  auto double_setter = [](double &field, const char *key) -> Setter {
    return [&field, key](const std::string &v, std::size_t n) {
      if (!to_double(v, field)) bad_value(n, key, v);
    };
  };
  auto month_setter = [](year_month &field, const char *key) -> Setter {
    return [&field, key](const std::string &v, std::size_t n) {
      const auto m = parse_month(v);
      if (!m) bad_value(n, key, v);
      field = *m;
    };
  };
  const std::map<std::string, Setter> setters = {
      {"spot_csv", [&](const std::string &v, std::size_t) { c.spot_csv = path(v); }},
      {"demand_csv", [&](const std::string &v, std::size_t) { c.demand_csv = path(v); }},
      {"forwards_csv", [&](const std::string &v, std::size_t) { c.forwards_csv = path(v); }},
      {"start_month", month_setter(c.start_month, "start_month")},
      {"end_month", month_setter(c.end_month, "end_month")},
      {"windows",
       [&](const std::string &v, std::size_t n) {
         c.windows.clear();
         for (const auto &item : split_list(v)) {
           int w = 0;
           if (!to_int(item, w)) bad_value(n, "windows", v);
           c.windows.push_back(w);
         }
       }},
      {"sparsities",
       [&](const std::string &v, std::size_t n) {
         c.sparsities.clear();
         for (const auto &item : split_list(v)) {
           double s = 0.0;
           if (!to_double(item, s)) bad_value(n, "sparsities", v);
           c.sparsities.push_back(s);
         }
       }},
      {"kernel",
       [&](const std::string &v, std::size_t n) {
         c.kernel.clear();
         for (const auto &item : split_list(v)) {
           const auto leaf = parse_composite_leaf(item);
           if (!leaf) bad_value(n, "kernel", v);
           c.kernel.push_back(*leaf);
         }
       }},
      {"restarts", int_setter(c.restarts, "restarts")},
      {"max_iterations", int_setter(c.max_iterations, "max_iterations")},
      {"relative_jitter", double_setter(c.relative_jitter, "relative_jitter")},
      {"n_samples", int_setter(c.n_samples, "n_samples")},
      {"optimizer_grid", int_setter(c.optimizer_grid, "optimizer_grid")},
      {"seed",
       [&](const std::string &v, std::size_t n) {
         if (!to_int(v, c.seed)) bad_value(n, "seed", v);
       }},
      {"retailer_share", double_setter(c.retailer_share, "retailer_share")},
      {"base_margin", double_setter(c.base_margin, "base_margin")},
      {"peak_margin", double_setter(c.peak_margin, "peak_margin")},
      {"loss_scale", double_setter(c.loss_scale, "loss_scale")},
      {"capping_sd", double_setter(c.capping_sd, "capping_sd")},
      {"max_gap_hours", int_setter(c.max_gap_hours, "max_gap_hours")},
      {"threads", int_setter(c.threads, "threads")},
      {"out_dir", [&](const std::string &v, std::size_t) { c.out_dir = path(v); }},
      {"format",
       [&](const std::string &v, std::size_t n) {
         if (v != "csv" && v != "json") bad_value(n, "format", v);
         c.format = parse_format(v);
       }},
      {"dump_models",
       [&](const std::string &v, std::size_t n) {
         if (v == "true" || v == "1" || v == "yes") {
           c.dump_models = true;
         } else if (v == "false" || v == "0" || v == "no") {
           c.dump_models = false;
         } else {
           bad_value(n, "dump_models", v);
         }
       }},
  };

  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(n) + ": duplicate key " + key);
    }
    if (key.starts_with("initiation.")) {
      const auto m = parse_month(key.substr(11));
      const auto d = parse_date(value);
      if (!m) throw ConfigError("config line " + std::to_string(n) + ": unknown key " + key);
      if (!d) bad_value(n, key, value);
      c.initiation[month_index(*m)] = *d;
      continue;
    }
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config line " + std::to_string(n) + ": unknown key " + key);
    }
    it->second(value, n);
  }
  c.validate();
  return c;
}

BacktestConfig load_config(const std::string &file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file);
  return parse_config(in, std::filesystem::path(file).parent_path().string());
}

year_month_day default_initiation_date(year_month m) {
  const auto &table = initiation_table();
  const auto it = table.find(month_index(m));
  if (it != table.end()) return it->second;
  const sys_days target = sys_days(m / day(1)) - std::chrono::days(14);
  const unsigned wd = std::chrono::weekday(target).iso_encoding();
  if (wd == 6) return year_month_day(target - std::chrono::days(1));
  if (wd == 7) return year_month_day(target + std::chrono::days(1));
  return year_month_day(target);
}

year_month_day initiation_date(const BacktestConfig &config, year_month m) {
  const auto it = config.initiation.find(month_index(m));
  if (it != config.initiation.end()) return it->second;
  return default_initiation_date(m);
}

}  // namespace csgp
