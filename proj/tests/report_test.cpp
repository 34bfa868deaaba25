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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

#include "csgp/errors.hpp"
#include "csgp/synthetic.hpp"

namespace csgp {
namespace {

using namespace std::chrono;
namespace fs = std::filesystem;

std::string read_file(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("csgp_test_" + name);
  fs::remove_all(p);
  return p;
}

StrategyResult row(const std::string &name, Position pos, double mio) {
  StrategyResult s;
  s.strategy = name;
  s.position = pos;
  s.payoff.mio_gbp = mio;
  s.payoff.gbp = mio * 1e6;
  s.payoff.normalized = mio;
  if (name != kComparatorName) s.model_dump = "month=x\nstrategy=" + name + "\n";
  return s;
}

BacktestReport fixture_report() {
  BacktestConfig c;
  c.start_month = year(2017) / January;
  c.end_month = year(2017) / February;
  c.seed = 12;
  std::vector<MonthReport> m(2);
  m[0].month = year(2017) / January;
  m[0].initiation = year(2016) / December / day(19);
  m[0].quote = ForwardQuote{year(2017) / January, year(2016) / December / day(19), 45.5, 52.25};
  m[0].global_max_load = 50000.0;
  m[0].strategies = {row(kComparatorName, {0.712345678, 0.1}, -0.123456789),
                     row("csgp-1m-10pct", {1e-6, 0.0}, 0.5)};
  m[0].strategies[1].log_marginal_likelihood = -1234.5678;
  m[1].month = year(2017) / February;
  m[1].initiation = year(2017) / January / day(18);
  m[1].skipped = true;
  m[1].skip_reason = "no forward quote";
  return assemble_report(c, m);
}

TEST(FormatNumber, SixSignificantDigits) {
  EXPECT_EQ(format_number(0.123456789), "0.123457");
  EXPECT_EQ(format_number(-1234567.0), "-1.23457e+06");
  EXPECT_EQ(format_number(1e-6), "1e-06");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(std::optional<double>{}), "");
}

TEST(MonthlyCsv, SkippedMonthsHaveEmptyCells) {
  EXPECT_EQ(monthly_csv(fixture_report()),
            "month,strategy,v_base,v_peak,payoff_mio_gbp\n"
            "2017-01,average-load,0.712346,0.1,-0.123457\n"
            "2017-01,csgp-1m-10pct,1e-06,0,0.5\n"
            "2017-02,average-load,,,\n"
            "2017-02,csgp-1m-10pct,,,\n");
}

TEST(CumulativeCsv, RunningExcessPerVariant) {
  EXPECT_EQ(cumulative_csv(fixture_report()),
            "month,excess_cum_csgp-1m-10pct\n"
            "2017-01,0.623457\n"
            "2017-02,0.623457\n");
}

TEST(CumulativeCsv, LastRowMatchesSummaryTotal) {
  const BacktestReport r = fixture_report();
  const std::string csv = cumulative_csv(r);
  const std::string last = csv.substr(csv.rfind(',', csv.size() - 2) + 1);
  const auto j = nlohmann::json::parse(summary_json(r));
  EXPECT_DOUBLE_EQ(std::stod(last), j["total_excess_mio_gbp"]["csgp-1m-10pct"].get<double>());
}

TEST(SummaryJson, CarriesTotalsAndNulls) {
  const auto j = nlohmann::json::parse(summary_json(fixture_report()));
  EXPECT_EQ(j["seed"], 12);
  EXPECT_EQ(j["comparator"], "average-load");
  EXPECT_DOUBLE_EQ(j["total_payoff_mio_gbp"]["csgp-1m-10pct"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["total_excess_mio_gbp"]["csgp-1m-10pct"].get<double>(), 0.623457);
  EXPECT_EQ(j["months_run"], 1);
  ASSERT_EQ(j["months_skipped"].size(), 1u);
  EXPECT_EQ(j["months_skipped"][0]["month"], "2017-02");
  EXPECT_EQ(j["months_skipped"][0]["reason"], "no forward quote");
  ASSERT_EQ(j["months"].size(), 2u);
  const auto &jan = j["months"][0];
  EXPECT_EQ(jan["initiation_date"], "2016-12-19");
  EXPECT_DOUBLE_EQ(jan["peak_forward"].get<double>(), 52.25);
  EXPECT_TRUE(jan["strategies"]["average-load"]["log_marginal_likelihood"].is_null());
  EXPECT_DOUBLE_EQ(jan["strategies"]["csgp-1m-10pct"]["log_marginal_likelihood"].get<double>(), -1234.57);
  EXPECT_EQ(j["months"][1]["status"], "skipped");
  EXPECT_EQ(j["months"][1]["reason"], "no forward quote");
}

TEST(EmitReport, CsvJsonAndModelDumps) {
  const BacktestReport r = fixture_report();
  const fs::path csv = scratch_dir("csv");
  emit_report(r, csv.string(), ReportFormat::kCsv, true);
  EXPECT_EQ(read_file(csv / "monthly.csv"), monthly_csv(r));
  EXPECT_EQ(read_file(csv / "cumulative.csv"), cumulative_csv(r));
  EXPECT_EQ(read_file(csv / "summary.json"), summary_json(r));
  EXPECT_EQ(read_file(csv / "models" / "2017-01_csgp-1m-10pct.txt"), "month=x\nstrategy=csgp-1m-10pct\n");
  EXPECT_FALSE(fs::exists(csv / "models" / "2017-01_average-load.txt"));

  const fs::path json = scratch_dir("json");
  emit_report(r, json.string(), ReportFormat::kJson);
  EXPECT_TRUE(fs::exists(json / "summary.json"));
  EXPECT_FALSE(fs::exists(json / "monthly.csv"));
  EXPECT_FALSE(fs::exists(json / "models"));

  const fs::path blocker = scratch_dir("blocker");
  std::ofstream(blocker.string()) << "x";
  EXPECT_THROW(emit_report(r, (blocker / "sub").string(), ReportFormat::kCsv), ConfigError);
}

int run_cli(const std::string &args) {
  const int status = std::system((std::string(CSGP_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  SyntheticOptions o;
  o.months = 3;
  write_synthetic(generate_synthetic(o), dir.string());
  const std::string spot = (dir / "spot.csv").string();
  const std::string demand = (dir / "demand.csv").string();
  EXPECT_EQ(run_cli("data stats --spot " + spot + " --demand " + demand), 0);
  EXPECT_EQ(run_cli("data stats --spot " + demand + " --demand " + demand), 3);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("backtest run"), 2);

  std::ofstream(dir / "bad.conf") << "spot_csv = spot.csv\nunknown_key = 1\n";
  EXPECT_EQ(run_cli("backtest run --config " + (dir / "bad.conf").string()), 2);
  std::ofstream(dir / "missing.conf") << "spot_csv = nope.csv\ndemand_csv = demand.csv\n"
                                         "forwards_csv = forwards.csv\n";
  EXPECT_EQ(run_cli("backtest run --config " + (dir / "missing.conf").string()), 3);
  std::ofstream(dir / "ok.conf") << "spot_csv = spot.csv\ndemand_csv = demand.csv\n"
                                    "forwards_csv = forwards.csv\nstart_month = 2017-01\n"
                                    "end_month = 2017-01\nrestarts = 1\nmax_iterations = 5\n"
                                    "n_samples = 20\n";
  const std::string ok = " --config " + (dir / "ok.conf").string();
  EXPECT_EQ(run_cli("backtest run" + ok + " --format yaml"), 2);
  EXPECT_EQ(run_cli("backtest month" + ok + " --month 2018-05 --out-dir " + (dir / "m").string()), 3);
  EXPECT_EQ(run_cli("backtest month" + ok + " --month 2017-01 --seed 3 --out-dir " + (dir / "m").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "m" / "models" / "2017-01_csgp-1m-10pct.txt"));
  EXPECT_EQ(run_cli("backtest run" + ok + " --format json --out-dir " + (dir / "r").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "r" / "summary.json"));
}

}  // namespace
}  // namespace csgp
