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

#include "csgp/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "csgp/errors.hpp"
#include "csgp/gp.hpp"

namespace csgp {

namespace {

using std::chrono::sys_days;
using std::chrono::year_month;
using std::chrono::year_month_day;

struct Window {
  std::vector<double> x;
  std::vector<double> price;
  std::vector<double> load;
};

double task_variance(const std::vector<double> &v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

GpModel initial_model(const BacktestConfig &config, const ModelVariant &variant,
                      const Window &w) {
  const KernelSpec kernel = composite_kernel({config.kernel, {}});
  const double k0 = kernel_eval(kernel, 0.0);
  const double vp = task_variance(w.price);
  const double vl = task_variance(w.load);
  Eigen::MatrixXd coreg_w(2, 1);
  coreg_w << std::sqrt(0.5 * vp / k0), std::sqrt(0.5 * vl / k0);
  Eigen::VectorXd kappa(2);
  kappa << 0.1 * vp / k0, 0.1 * vl / k0;
  GpOptions options;
  options.relative_jitter = config.relative_jitter;
  GpModel model(kernel, CoregionalSpec(coreg_w, kappa), {0.1 * vp, 0.1 * vl},
                TrainingSet::from_hourly(w.x, w.price, w.load), options);
  if (variant.sparsity < 1.0) {
    model = model.with_inducing(select_inducing(model.training(), variant.sparsity));
  }
  return model;
}

StrategyResult run_variant(const BacktestConfig &config, const MarketData &data,
                           const MonthReport &month, const ModelVariant &variant,
                           std::size_t vi, const HedgeTerms &terms,
                           const std::vector<HourStamp> &delivery,
                           const std::vector<HourClass> &classes,
                           const HourlySeries &actual_load) {
  StrategyResult res;
  res.strategy = variant.name();
  const HourStamp init = HourStamp::from_date(month.initiation);
  const HourStamp begin = init + (-variant.window_hours());

  std::vector<HourStamp> missing = data.spot.missing(begin, init);
  const auto missing_load = data.load.missing(begin, init);
  missing.insert(missing.end(), missing_load.begin(), missing_load.end());
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  if (static_cast<int>(missing.size()) > config.max_gap_hours) {
    std::vector<std::string> stamps;
    for (const auto &h : missing) stamps.push_back(h.iso());
    const std::string what = variant.name() + ": training window lacks " +
                             std::to_string(missing.size()) + " hour(s), first " + stamps.front();
    throw GapError(what, std::move(stamps));
  }
  HourlySeries price;
  HourlySeries load;
  load.unit = Unit::kMwh;
  for (HourStamp h = begin; h < init; h = h + 1) {
    const auto ip = data.spot.find(h);
    const auto il = data.load.find(h);
    if (!ip || !il) continue;
    price.hours.push_back(h);
    price.values.push_back(data.spot.values[*ip]);
    load.hours.push_back(h);
    load.values.push_back(data.load.values[*il]);
  }
  const CapResult capped = cap_spikes(price, load, capping_statistics(price, load, config.capping_sd));
  res.price_capped_hours = capped.log.size();
  res.load_capped_hours = capped.load_clipped;
  const HourlySeries norm = normalize_load(capped.load, *month.global_max_load);

  Window w;
  for (std::size_t i = 0; i < capped.price.size(); ++i) {
    w.x.push_back(static_cast<double>(capped.price.hours[i] - begin));
    w.price.push_back(capped.price.values[i]);
    w.load.push_back(norm.values[i]);
  }
  const GpModel model = initial_model(config, variant, w);
  res.inducing_points = model.inducing() ? model.inducing()->size() : 0;
  FitOptions fo;
  fo.restarts = config.restarts;
  fo.max_iterations = config.max_iterations;
  fo.seed = mix_seed(month.seed, 3 * vi);
  const GpModel fitted = fit(model, fo);
  res.log_marginal_likelihood = fitted.fit_diagnostics()->log_marginal_likelihood;
  res.model_dump = "month=" + format_month(month.month) + "\nstrategy=" + variant.name() + "\n" +
                   fitted.dump();

  std::vector<double> test_x;
  for (HourStamp h : delivery) test_x.push_back(static_cast<double>(h - begin));
  const JointDraws draws =
      sample_posterior_scenarios(fitted, test_x, config.n_samples, mix_seed(month.seed, 3 * vi + 1));
  const ScenarioSet scenarios(classes, config.n_samples, draws.price, draws.load);

  OptimizerOptions oo;
  oo.grid_points = config.optimizer_grid;
  oo.seed = mix_seed(month.seed, 3 * vi + 2);
  const OptimizationResult opt =
      optimize_positions(scenarios, terms, {LossKind::kExponential, config.loss_scale}, oo);
  res.position = opt.position;
  res.converged = opt.converged;
  res.warning = opt.warning;
  res.payoff = realized_payoff(delivery, data.spot, actual_load, opt.position, terms,
                               *month.global_max_load);
  return res;
}

}  // namespace

MarketData load_market_data(const BacktestConfig &config) {
  if (config.spot_csv.empty() || config.demand_csv.empty() || config.forwards_csv.empty()) {
    throw ConfigError("spot_csv, demand_csv and forwards_csv must all be set");
  }
  MarketData out;
  out.spot = read_spot_csv(config.spot_csv);
  LoadConversion conv = demand_to_load(read_demand_csv(config.demand_csv), GapPolicy::kReport);
  out.load = std::move(conv.load);
  out.load_gaps = std::move(conv.gaps);
  out.forwards = read_forwards_csv(config.forwards_csv);
  return out;
}

std::optional<ForwardQuote> select_quote(const std::vector<ForwardQuote> &forwards,
                                         year_month month, year_month_day initiation) {
  std::optional<ForwardQuote> best;
  for (const auto &q : forwards) {
    if (q.delivery != month || sys_days(q.quote_date) > sys_days(initiation)) continue;
    if (!best || sys_days(q.quote_date) > sys_days(best->quote_date)) best = q;
  }
  return best;
}

std::uint64_t month_seed(std::uint64_t master, year_month month) {
  return mix_seed(master, static_cast<std::uint64_t>(month_index(month)));
}

MonthReport run_month(const BacktestConfig &config, const MarketData &data, year_month month) {
  config.validate();
  MonthReport r;
  r.month = month;
  r.initiation = initiation_date(config, month);
  r.seed = month_seed(config.seed, month);
  try {
    r.quote = select_quote(data.forwards, month, r.initiation);
    if (!r.quote) {
      throw DataError("no forward quote for " + format_month(month) + " on or before " +
                      format_date(r.initiation));
    }
    HedgeTerms terms{r.quote->base, r.quote->peak, config.base_margin, config.peak_margin,
                     config.retailer_share};
    terms.validate();

    const HourStamp init = HourStamp::from_date(r.initiation);
    double global_max = 0.0;
    for (std::size_t i = 0; i < data.load.size() && data.load.hours[i] < init; ++i) {
      global_max = std::max(global_max, data.load.values[i]);
    }
    if (!(global_max > 0.0)) {
      throw DataError("no positive load before " + format_date(r.initiation));
    }
    r.global_max_load = global_max;

    const std::vector<HourStamp> delivery = month_hours(month);
    const HourStamp month_begin = delivery.front();
    const HourStamp month_end = delivery.back() + 1;
    std::vector<std::string> gaps;
    for (const auto &h : data.spot.missing(month_begin, month_end)) gaps.push_back(h.iso());
    for (const auto &h : data.load.missing(month_begin, month_end)) gaps.push_back(h.iso());
    if (!gaps.empty()) {
      std::sort(gaps.begin(), gaps.end());
      gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
      throw GapError("delivery month lacks actual data for " + std::to_string(gaps.size()) +
                         " hour(s), first " + gaps.front(),
                     gaps);
    }
    const HourlySeries actual_load = normalize_load(data.load.slice(month_begin, month_end), global_max);
    std::vector<HourClass> classes;
    for (HourStamp h : delivery) classes.push_back(classify_hour(h));

    StrategyResult comp;
    comp.strategy = kComparatorName;
    const ComparatorPosition cp = average_load_positions(actual_load.values, classes);
    comp.position = cp.position;
    if (cp.peak_clamped) comp.warning = "negative peak volume clamped to zero";
    comp.payoff = realized_payoff(delivery, data.spot, actual_load, cp.position, terms, global_max);
    r.strategies.push_back(comp);

    const auto variants = config.variants();
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      r.strategies.push_back(
          run_variant(config, data, r, variants[vi], vi, terms, delivery, classes, actual_load));
    }
  } catch (const DataError &e) {
    r.skipped = true;
    r.skip_reason = e.what();
    r.strategies.clear();
  } catch (const NumericalError &e) {
    r.skipped = true;
    r.skip_numerical = true;
    r.skip_reason = e.what();
    r.strategies.clear();
  }
  return r;
}

BacktestReport assemble_report(const BacktestConfig &config, std::vector<MonthReport> months) {
  BacktestReport rep;
  rep.seed = config.seed;
  rep.strategies.push_back(kComparatorName);
  for (const auto &v : config.variants()) {
    rep.strategies.push_back(v.name());
    rep.variants.push_back(v.name());
  }
  std::sort(months.begin(), months.end(), [](const MonthReport &a, const MonthReport &b) {
    return month_index(a.month) < month_index(b.month);
  });
  rep.months = std::move(months);
  rep.totals.assign(rep.strategies.size(), 0.0);
  rep.total_excess.assign(rep.variants.size(), 0.0);
  rep.cumulative_excess.assign(rep.variants.size(), {});
  bool any_run = false;
  for (const auto &m : rep.months) {
    any_run = any_run || !m.skipped;
    for (std::size_t v = 0; v < rep.variants.size(); ++v) {
      if (!m.skipped) {
        rep.total_excess[v] += m.strategies[v + 1].payoff.mio_gbp - m.strategies[0].payoff.mio_gbp;
      }
      rep.cumulative_excess[v].push_back(any_run ? std::optional<double>(rep.total_excess[v])
                                                 : std::nullopt);
    }
    if (m.skipped) continue;
    for (std::size_t s = 0; s < rep.strategies.size(); ++s) rep.totals[s] += m.strategies[s].payoff.mio_gbp;
  }
  return rep;
}

BacktestReport run_study(const BacktestConfig &config, const MarketData &data) {
  config.validate();
  const auto months = config.months();
  std::vector<MonthReport> rows(months.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= months.size()) return;
      try {
        rows[i] = run_month(config, data, months[i]);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(config.threads, static_cast<int>(months.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (std::all_of(rows.begin(), rows.end(), [](const MonthReport &m) { return m.skipped; })) {
    throw DataError("every configured month was skipped; first reason: " + rows.front().skip_reason);
  }
  return assemble_report(config, std::move(rows));
}

}  // namespace csgp
