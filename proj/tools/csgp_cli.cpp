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

#include <cstdio>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "csgp/backtest.hpp"
#include "csgp/config.hpp"
#include "csgp/errors.hpp"
#include "csgp/marketdata.hpp"
#include "csgp/report.hpp"
#include "csgp/synthetic.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
};

void add_overrides(CLI::App *cmd, Overrides &o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  cmd->add_option("--format", o.format, "Report format: csv or json");
}

csgp::BacktestConfig configure(const std::string &path, const Overrides &o) {
  csgp::BacktestConfig c = csgp::load_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.format) c.format = csgp::parse_format(*o.format);
  c.validate();
  return c;
}

void print_totals(const csgp::BacktestReport &r) {
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    std::cout << r.strategies[s] << " total_payoff_mio_gbp=" << csgp::format_number(r.totals[s]) << '\n';
  }
  for (const auto &m : r.months) {
    if (m.skipped) std::cout << "skipped " << csgp::format_month(m.month) << ": " << m.skip_reason << '\n';
  }
}

int run_backtest(const std::string &config_path, const Overrides &o) {
  const auto config = configure(config_path, o);
  const auto data = csgp::load_market_data(config);
  const auto report = csgp::run_study(config, data);
  csgp::emit_report(report, config.out_dir, config.format, config.dump_models);
  print_totals(report);
  return 0;
}

int run_single_month(const std::string &config_path, const std::string &month_text,
                     const Overrides &o) {
  auto config = configure(config_path, o);
  const auto month = csgp::parse_month(month_text);
  if (!month) throw csgp::ConfigError("--month must be YYYY-MM, got '" + month_text + "'");
  config.start_month = *month;
  config.end_month = *month;
  const auto data = csgp::load_market_data(config);
  csgp::MonthReport row = csgp::run_month(config, data, *month);
  const bool skipped = row.skipped;
  const bool numerical = row.skip_numerical;
  const auto report = csgp::assemble_report(config, {std::move(row)});
  csgp::emit_report(report, config.out_dir, config.format, true);
  print_totals(report);
  if (!skipped) return 0;
  std::cerr << "error: month skipped: " << report.months.front().skip_reason << '\n';
  return numerical ? kExitNumerical : kExitData;
}

void print_bucket_rows(const std::string &name, const csgp::SdHistogram &h) {
  const std::pair<const char *, const csgp::SdBuckets *> rows[] = {{"peak", &h.peak},
                                                                   {"off-peak", &h.off_peak}};
  for (const auto &[cls, b] : rows) {
    std::cout << name << ',' << cls << ',' << b->total << ',' << csgp::format_number(b->stats.mean)
              << ',' << csgp::format_number(b->stats.sd);
    for (std::size_t i = 0; i < csgp::kSdBuckets; ++i) std::cout << ',' << b->counts[i];
    for (std::size_t i = 0; i < csgp::kSdBuckets; ++i) {
      std::cout << ',' << csgp::format_number(b->percent[i]);
    }
    std::cout << '\n';
  }
}

int run_stats(const std::string &spot_path, const std::string &demand_path) {
  const auto spot = csgp::read_spot_csv(spot_path);
  const auto conv = csgp::demand_to_load(csgp::read_demand_csv(demand_path), csgp::GapPolicy::kReport);
  std::cout << "series,class,n,mean,sd,n_sd0_1,n_sd1_2,n_sd2_3,n_sd3_4,n_sd4_5,n_sd5_inf,"
               "pct_sd0_1,pct_sd1_2,pct_sd2_3,pct_sd3_4,pct_sd4_5,pct_sd5_inf\n";
  print_bucket_rows("spot", csgp::sd_bucket_histogram(spot));
  print_bucket_rows("load", csgp::sd_bucket_histogram(conv.load));
  if (!conv.gaps.empty()) {
    std::cerr << "demand gaps: " << conv.gaps.size() << " hour(s), first " << conv.gaps.front().iso()
              << '\n';
  }
  return 0;
}

int run_synth(const std::string &dir, std::uint64_t seed, const std::string &start, int months,
              double premium) {
  csgp::SyntheticOptions o;
  const auto first = csgp::parse_month(start);
  if (!first) throw csgp::ConfigError("--start must be YYYY-MM");
  o.first_month = *first;
  o.months = months;
  o.seed = seed;
  o.forward_premium = premium;
  const auto data = csgp::generate_synthetic(o);
  csgp::write_synthetic(data, dir);
  const auto hedge_start = *first + std::chrono::months(2);
  const auto hedge_end = *first + std::chrono::months(months - 1);
  std::FILE *f = std::fopen((std::filesystem::path(dir) / "backtest.conf").c_str(), "w");
  if (!f) throw csgp::ConfigError("cannot write backtest.conf in " + dir);
  std::fprintf(f,
               "# Synthetic study\nspot_csv = spot.csv\ndemand_csv = demand.csv\n"
               "forwards_csv = forwards.csv\nstart_month = %s\nend_month = %s\n"
               "windows = 1\nsparsities = 0.1\nrestarts = 2\nmax_iterations = 60\n"
               "n_samples = 200\nseed = %llu\nout_dir = report\n",
               csgp::format_month(hedge_start).c_str(), csgp::format_month(hedge_end).c_str(),
               static_cast<unsigned long long>(seed));
  std::fclose(f);
  std::cout << "wrote " << dir << "/{spot,demand,forwards}.csv and backtest.conf\n";
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
#if defined(__GLIBC__)
  // Serve large allocations from the heap, not mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Coregionalized sparse GP hedging of power retail exposure"};
  app.require_subcommand(1);

  auto *backtest = app.add_subcommand("backtest", "Run the monthly hedging backtest");
  backtest->require_subcommand(1);
  std::string config_path;
  std::string month;
  Overrides run_overrides;
  Overrides month_overrides;
  auto *run = backtest->add_subcommand("run", "Run every configured month");
  run->add_option("--config", config_path, "Config file")->required();
  add_overrides(run, run_overrides);
  auto *one = backtest->add_subcommand("month", "Run one delivery month");
  one->add_option("--config", config_path, "Config file")->required();
  one->add_option("--month", month, "Delivery month YYYY-MM")->required();
  add_overrides(one, month_overrides);

  auto *data = app.add_subcommand("data", "Data utilities");
  data->require_subcommand(1);
  std::string spot_path;
  std::string demand_path;
  auto *stats = data->add_subcommand("stats", "SD-bucket histogram of spot and load");
  stats->add_option("--spot", spot_path, "Spot CSV")->required();
  stats->add_option("--demand", demand_path, "Demand CSV")->required();
  std::string synth_dir;
  std::uint64_t synth_seed = 0;
  std::string synth_start = "2016-11";
  int synth_months = 8;
  double synth_premium = 0.05;
  auto *synth = data->add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--start", synth_start, "First data month YYYY-MM");
  synth->add_option("--months", synth_months, "Months of data")->check(CLI::Range(3, 600));
  synth->add_option("--premium", synth_premium, "Forward premium over expected spot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return run_backtest(config_path, run_overrides);
    if (one->parsed()) return run_single_month(config_path, month, month_overrides);
    if (stats->parsed()) return run_stats(spot_path, demand_path);
    if (synth->parsed()) return run_synth(synth_dir, synth_seed, synth_start, synth_months, synth_premium);
  } catch (const csgp::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const csgp::DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const csgp::NumericalError &e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
