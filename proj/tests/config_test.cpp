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

#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "csgp/errors.hpp"
#include "csgp/marketdata.hpp"

namespace csgp {
namespace {

using namespace std::chrono;

BacktestConfig parse(const std::string &text, const std::string &base = "") {
  std::istringstream in(text);
  return parse_config(in, base);
}

std::string config_error(const std::string &text) {
  try {
    parse(text);
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsAreValid) {
  const BacktestConfig c = parse("");
  EXPECT_EQ(c.months().size(), 36u);
  ASSERT_EQ(c.variants().size(), 1u);
  EXPECT_EQ(c.variants()[0].name(), "csgp-1m-10pct");
  EXPECT_EQ(c.variants()[0].window_hours(), 720);
  EXPECT_EQ(c.kernel.size(), kAllCompositeLeaves.size());
}

TEST(Config, ParsesKeysCommentsAndLists) {
  const BacktestConfig c = parse(
      "# study\n"
      "spot_csv = data/spot.csv   # trailing comment\n"
      "demand_csv=/abs/demand.csv\n"
      "start_month = 2017-01\n"
      "end_month = 2017-06\n"
      "windows = 1, 3\n"
      "sparsities = 0.05,0.25\n"
      "kernel = se, per24, white\n"
      "seed = 18446744073709551615\n"
      "format = json\n"
      "dump_models = yes\n"
      "initiation.2017-03 = 2017-02-10\n",
      "/cfg");
  EXPECT_EQ(c.spot_csv, "/cfg/data/spot.csv");
  EXPECT_EQ(c.demand_csv, "/abs/demand.csv");
  EXPECT_EQ(c.months().size(), 6u);
  std::vector<std::string> names;
  for (const auto &v : c.variants()) names.push_back(v.name());
  EXPECT_EQ(names, (std::vector<std::string>{"csgp-1m-5pct", "csgp-1m-25pct", "csgp-3m-5pct",
                                             "csgp-3m-25pct"}));
  EXPECT_EQ(c.kernel, (std::vector<CompositeLeaf>{CompositeLeaf::kSe, CompositeLeaf::kPer24,
                                                  CompositeLeaf::kWhite}));
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.format, ReportFormat::kJson);
  EXPECT_TRUE(c.dump_models);
  EXPECT_EQ(initiation_date(c, year(2017) / March), year(2017) / February / day(10));
}

TEST(Config, RejectsUnknownDuplicateAndMalformed) {
  EXPECT_NE(config_error("seed = 1\nbogus = 2\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("seed = 1\nseed = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(config_error("restarts\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("restarts = many\n").find("restarts"), std::string::npos);
  EXPECT_NE(config_error("initiation.2017-13 = 2017-01-01\n").find("unknown key"), std::string::npos);
  EXPECT_FALSE(config_error("windows = 4\n").empty());
  EXPECT_FALSE(config_error("sparsities = 0\n").empty());
  EXPECT_FALSE(config_error("sparsities = 0.1, 0.1\n").empty());
  EXPECT_FALSE(config_error("kernel = cosine\n").empty());
  EXPECT_FALSE(config_error("start_month = 2018-01\nend_month = 2017-01\n").empty());
  EXPECT_FALSE(config_error("format = xml\n").empty());
  EXPECT_FALSE(config_error("dump_models = maybe\n").empty());
  EXPECT_FALSE(config_error("initiation.2017-03 = 2017-03-02\n").empty());
  EXPECT_FALSE(config_error("loss_scale = -1\n").empty());
  EXPECT_THROW(load_config("/nonexistent/study.conf"), ConfigError);
}

TEST(Config, FormatParsing) {
  EXPECT_EQ(parse_format("csv"), ReportFormat::kCsv);
  EXPECT_EQ(parse_format("json"), ReportFormat::kJson);
  EXPECT_THROW(parse_format("CSV"), ConfigError);
}

TEST(InitiationDates, TableAndFallbackRule) {
  EXPECT_EQ(default_initiation_date(year(2016) / January), year(2015) / December / day(18));
  EXPECT_EQ(default_initiation_date(year(2018) / January), year(2017) / December / day(18));
  // Two weeks before 2018-02-01 is a Thursday.
  EXPECT_EQ(default_initiation_date(year(2018) / February), year(2018) / January / day(18));
  // Two weeks before 2019-03-01 is a Friday; before 2019-06-01 a Saturday;
  // before 2019-07-01 a Monday; before 2019-09-01 a Sunday.
  EXPECT_EQ(default_initiation_date(year(2019) / March), year(2019) / February / day(15));
  EXPECT_EQ(default_initiation_date(year(2019) / June), year(2019) / May / day(17));
  EXPECT_EQ(default_initiation_date(year(2019) / September), year(2019) / August / day(19));
  for (int y = 2015; y <= 2020; ++y) {
    for (unsigned m = 1; m <= 12; ++m) {
      const auto ym = year(y) / month(m);
      const auto d = default_initiation_date(ym);
      const unsigned wd = weekday(sys_days(d)).iso_encoding();
      EXPECT_LE(wd, 5u) << format_month(ym);
      EXPECT_LT(sys_days(d), sys_days(ym / day(1))) << format_month(ym);
    }
  }
}

TEST(MonthIndex, IsLinear) {
  EXPECT_EQ(month_index(year(2017) / January) + 1, month_index(year(2017) / February));
  EXPECT_EQ(month_index(year(2017) / December) + 1, month_index(year(2018) / January));
}

}  // namespace
}  // namespace csgp
