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

// Acceptance suite.  Each check prints one PASS/FAIL line; the process exits
// nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csgp/backtest.hpp"
#include "csgp/config.hpp"
#include "csgp/gp.hpp"
#include "csgp/hedge.hpp"
#include "csgp/kernels.hpp"
#include "csgp/marketdata.hpp"
#include "csgp/report.hpp"
#include "csgp/synthetic.hpp"
#include "test_support.hpp"

namespace {

using namespace csgp;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs(const Eigen::MatrixXd &a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

std::vector<TaskInput> test_inputs(std::mt19937_64 &rng, std::size_t per_task, double span,
                                   const TrainingSet &train) {
  std::vector<TaskInput> out;
  for (int d = 0; d < 2; ++d) {
    for (double x : test::random_inputs(rng, per_task, span)) out.push_back({d, x});
  }
  // A few training locations too.
  for (std::size_t i = 0; i < train.size(); i += 17) out.push_back(train.inputs[i]);
  return out;
}

Outcome dtc_degeneracy() {
  double worst_mean = 0.0;
  double worst_cov = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const TrainingSet train = test::random_two_task(rng, 50, 300.0);
    const GpModel exact(test::random_composite(rng), test::random_coreg(rng), {0.3, 0.01}, train);
    const GpModel sparse = exact.with_inducing(train.task_inputs(0));
    const auto test = test_inputs(rng, 20, 320.0, train);
    const auto a = exact_posterior(exact, test);
    const auto b = dtc_posterior(sparse, test);
    worst_mean = std::max(worst_mean, max_abs(a.mean - b.mean));
    worst_cov = std::max(worst_cov, max_abs(*a.covariance - *b.covariance));
  }
  Outcome o;
  o.pass = worst_mean <= 1e-6 && worst_cov <= 1e-6;
  o.detail = "max |mean diff| " + fmt("%.3g", worst_mean) + ", max |cov diff| " + fmt("%.3g", worst_cov);
  return o;
}

Outcome gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const TrainingSet train = test::random_two_task(rng, 30, 200.0);
    const int rank = 1 + static_cast<int>(seed % 2);
    GpModel model(test::random_composite(rng, seed % 4 == 0), test::random_coreg(rng, 2, rank),
                  {test::log_uniform(rng, 0.05, 1.0), test::log_uniform(rng, 1e-3, 1e-2)}, train);
    if (seed % 2 == 1) model = model.with_inducing(select_inducing(train, 0.3));
    const auto analytic = log_marginal_likelihood(model, true);
    const std::vector<double> theta = model.parameters();
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      std::vector<double> up = theta, down = theta;
      up[i] += h;
      down[i] -= h;
      const double fd = (log_marginal_likelihood(model.with_parameters(up), false).value -
                         log_marginal_likelihood(model.with_parameters(down), false).value) /
                        (2.0 * h);
      const double err = std::abs(analytic.gradient[i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return {worst <= 1e-4, "worst relative error " + fmt("%.3g", worst)};
}

Outcome coregional_independence() {
  std::mt19937_64 rng(7);
  const TrainingSet train = test::random_two_task(rng, 40, 250.0);
  const KernelSpec kernel = test::random_composite(rng);
  const CoregionalSpec identity(Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Ones(2));
  const std::vector<double> noise{0.4, 0.02};
  GpOptions options;
  options.relative_jitter = 0.0;
  const GpModel model(kernel, identity, noise, train, options);
  const auto test = test_inputs(rng, 25, 260.0, train);
  const auto joint = exact_posterior(model, test);

  double worst = 0.0;
  std::vector<Eigen::Index> rows[2];
  for (std::size_t i = 0; i < test.size(); ++i) rows[test[i].task].push_back(static_cast<Eigen::Index>(i));
  for (int d = 0; d < 2; ++d) {
    const std::vector<double> x = train.task_inputs(d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0, k = 0; i < train.size(); ++i) {
      if (train.inputs[i].task == d) y(static_cast<Eigen::Index>(k++)) = train.targets[i];
    }
    std::vector<double> xt;
    for (Eigen::Index r : rows[d]) xt.push_back(test[static_cast<std::size_t>(r)].x);
    const auto single = test::condition_dense(gram_matrix(kernel, x, x), gram_matrix(kernel, xt, x),
                                              gram_matrix(kernel, xt, xt), y, noise[d]);
    for (std::size_t a = 0; a < xt.size(); ++a) {
      worst = std::max(worst, std::abs(joint.mean(rows[d][a]) - single.mean(static_cast<Eigen::Index>(a))));
      for (std::size_t b = 0; b < xt.size(); ++b) {
        worst = std::max(worst, std::abs((*joint.covariance)(rows[d][a], rows[d][b]) -
                                         single.covariance(static_cast<Eigen::Index>(a),
                                                           static_cast<Eigen::Index>(b))));
      }
    }
    for (Eigen::Index r : rows[d]) {
      for (Eigen::Index s : rows[1 - d]) worst = std::max(worst, std::abs((*joint.covariance)(r, s)));
    }
  }
  return {worst <= 1e-8, "max abs difference " + fmt("%.3g", worst)};
}

Outcome kernel_validity() {
  double worst_eig = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const KernelSpec kernel = test::random_composite(rng);
    const std::vector<double> x = test::random_inputs(rng, 40, 500.0);
    const Eigen::MatrixXd g = gram_matrix(kernel, x, x);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff();
    worst_eig = std::min(worst_eig, min_eig / g.trace());
    std::vector<TaskInput> in;
    for (int d = 0; d < 2; ++d) {
      for (double v : x) in.push_back({d, v});
    }
    const Eigen::MatrixXd cg = coregional_gram(test::random_coreg(rng, 2, 2), kernel, in, in);
    const double cmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cg).eigenvalues().minCoeff();
    worst_eig = std::min(worst_eig, cmin / cg.trace());
  }
  double worst_period = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> r(0.0, 1000.0);
  const std::vector<KernelSpec> periodic{
      KernelSpec::periodic(1.3, 0.7, 12.0), KernelSpec::periodic(0.8, 1.9, 24.0),
      KernelSpec::periodic(1.1, 1.0, 168.0),
      KernelSpec::sum({KernelSpec::periodic(0.5, 1.2, 12.0), KernelSpec::periodic(0.9, 0.6, 24.0),
                       KernelSpec::periodic(1.2, 2.0, 168.0)})};
  const double periods[] = {12.0, 24.0, 168.0, 168.0};
  for (std::size_t k = 0; k < periodic.size(); ++k) {
    for (int i = 0; i < 1000; ++i) {
      const double v = r(rng);
      worst_period = std::max(worst_period, std::abs(kernel_eval(periodic[k], v) -
                                                     kernel_eval(periodic[k], v + periods[k])));
    }
  }
  Outcome o;
  o.pass = worst_eig >= -1e-8 && worst_period <= 1e-12;
  o.detail = "min eigenvalue/trace " + fmt("%.3g", worst_eig) + ", periodicity error " +
             fmt("%.3g", worst_period);
  return o;
}

// Independent evaluation of the expected exponential loss on a grid.  Off-peak
// hours depend on the base volume only, so their contribution is tabulated once
// per base grid value.
class LossOracle {
 public:
  LossOracle(const ScenarioSet &s, const HedgeTerms &t, double scale)
      : s_(s), t_(t), scale_(scale) {}

  double off_peak(double vb) const {
    double total = 0.0;
    for (std::size_t h = 0; h < s_.num_hours(); ++h) {
      if (s_.classes()[h] != HourClass::kOffPeak) continue;
      double acc = 0.0;
      for (int k = 0; k < s_.n_samples(); ++k) {
        const double price = s_.price(h, k), load = s_.load(h, k);
        const double payoff = (price - t_.base_forward) * (vb - load) + t_.base_margin * load;
        acc += std::exp(-payoff / scale_);
      }
      total += acc / s_.n_samples();
    }
    return total;
  }

  double peak(double vb, double vp) const {
    const double volume = vb + vp;
    const double forward = (vb * t_.base_forward + vp * t_.peak_forward) / volume;
    double total = 0.0;
    for (std::size_t h = 0; h < s_.num_hours(); ++h) {
      if (s_.classes()[h] != HourClass::kPeak) continue;
      double acc = 0.0;
      for (int k = 0; k < s_.n_samples(); ++k) {
        const double price = s_.price(h, k), load = s_.load(h, k);
        const double payoff = (price - forward) * (volume - load) + t_.peak_margin * load;
        acc += std::exp(-payoff / scale_);
      }
      total += acc / s_.n_samples();
    }
    return total;
  }

  double operator()(const Position &p) const { return off_peak(p.base) + peak(p.base, p.peak); }

 private:
  const ScenarioSet &s_;
  HedgeTerms t_;
  double scale_;
};

Outcome optimizer_vs_grid() {
  const HedgeTerms terms{50.0, 60.0, 0.0, 0.0, 0.015};
  const LossOptions loss{LossKind::kExponential, 100.0};
  const OptimizerOptions opt;
  constexpr int kGrid = 200;
  const double cell_b = (opt.v_max - opt.v_min) / (kGrid - 1);
  const double cell_p = opt.v_max / (kGrid - 1);
  int grid_misses = 0;
  int convexity_violations = 0;
  int pairs = 0;
  double worst_excess = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScenarioSet s = test::coupled_scenarios(seed, 50, 500);
    const LossOracle oracle(s, terms, loss.scale);
    std::vector<double> off(kGrid);
    for (int i = 0; i < kGrid; ++i) off[i] = oracle.off_peak(opt.v_min + cell_b * i);
    double best = INFINITY;
    Position best_pos;
    for (int i = 0; i < kGrid; ++i) {
      for (int j = 0; j < kGrid; ++j) {
        const Position p{opt.v_min + cell_b * i, cell_p * j};
        const double f = off[i] + oracle.peak(p.base, p.peak);
        if (f < best) {
          best = f;
          best_pos = p;
        }
      }
    }
    const auto result = optimize_positions(s, terms, loss, opt);
    if (std::abs(result.position.base - best_pos.base) > cell_b * (1 + 1e-9) ||
        std::abs(result.position.peak - best_pos.peak) > cell_p * (1 + 1e-9)) {
      ++grid_misses;
    }

    std::mt19937_64 rng(500 + seed);
    std::uniform_real_distribution<double> ub(opt.v_min, opt.v_max), up(0.0, opt.v_max);
    for (int k = 0; k < 10; ++k, ++pairs) {
      const Position a{ub(rng), up(rng)}, b{ub(rng), up(rng)};
      const Position m{0.5 * (a.base + b.base), 0.5 * (a.peak + b.peak)};
      const double fa = oracle(a), fb = oracle(b), fm = oracle(m);
      const double excess = fm - 0.5 * (fa + fb);
      if (excess > 1e-12 * (std::abs(fa) + std::abs(fb))) {
        ++convexity_violations;
        worst_excess = std::max(worst_excess, excess / fm);
      }
    }
  }
  Outcome o;
  o.pass = grid_misses == 0 && convexity_violations == 0;
  o.detail = std::to_string(10 - grid_misses) + "/10 within one grid cell, " +
             std::to_string(convexity_violations) + "/" + std::to_string(pairs) +
             " midpoint violations (worst relative excess " + fmt("%.3g", worst_excess) + ")";
  return o;
}

Outcome minimum_variance() {
  constexpr int kSamples = 100000;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> price(55.0, 10.0), load(0.7, 0.1);
  const LossOptions loss{LossKind::kQuadratic, 1.0};

  auto draw = [&](double &mean_load) {
    std::vector<double> p(kSamples), l(kSamples);
    mean_load = 0.0;
    for (int k = 0; k < kSamples; ++k) {
      p[k] = price(rng);
      l[k] = load(rng);
      mean_load += l[k];
    }
    mean_load /= kSamples;
    return std::make_pair(p, l);
  };

  double off_mean = 0.0, peak_mean = 0.0;
  auto [po, lo] = draw(off_mean);
  const ScenarioSet off({HourClass::kOffPeak}, kSamples, po, lo);
  const auto r_off = optimize_positions(off, {50.0, 60.0, 0.0, 0.0, 0.015}, loss);
  auto [pp, lp] = draw(peak_mean);
  const ScenarioSet peak({HourClass::kPeak}, kSamples, pp, lp);
  const auto r_peak = optimize_positions(peak, {50.0, 50.0, 0.0, 0.0, 0.015}, loss);

  const double e_off = std::abs(r_off.position.base - off_mean);
  const double e_peak = std::abs(r_peak.position.base + r_peak.position.peak - peak_mean);
  return {e_off < 1e-2 && e_peak < 1e-2,
          "|V^b - mean L| " + fmt("%.3g", e_off) + ", |V^b + V^p - mean L| " + fmt("%.3g", e_peak)};
}

Outcome payoff_accounting() {
  using namespace std::chrono;
  const HourStamp start = HourStamp::from_date(year(2017) / March / day(3));  // a Friday
  std::vector<HourStamp> hours;
  HourlySeries price, load;
  load.unit = Unit::kMwh;
  for (int h = 0; h < 48; ++h) {
    const HourStamp t = start + h;
    const bool peak = h >= 7 && h <= 18;
    hours.push_back(t);
    price.hours.push_back(t);
    price.values.push_back(40.0 + 2.0 * (h % 6) + (peak ? 25.0 : 0.0));
    load.hours.push_back(t);
    load.values.push_back(781.25 * (40 + h % 9));
  }
  const double global_max = 50000.0;
  const HedgeTerms terms{50.0, 60.0, 1.5, 2.5, 0.015};
  const auto r = realized_payoff(hours, price, normalize_load(load, global_max), {0.5, 0.5}, terms,
                                 global_max);
  // Effective forward 55.  Off-peak hours sum to 555/8 and peak hours to
  // 9727/128 in normalized units: 18607/128 in total, times 50000 * 0.015.
  const double expected_gbp = 109025.390625;
  const double err = std::abs(r.gbp - expected_gbp);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ub(1e-6, 2.0), up(0.0, 2.0);
  int bound_violations = 0;
  for (int k = 0; k < 1000; ++k) {
    const double f = effective_forward({ub(rng), k % 10 == 0 ? 0.0 : up(rng)}, terms);
    if (f < terms.base_forward || f > terms.peak_forward) ++bound_violations;
  }
  return {err <= 1e-9 && bound_violations == 0,
          "payoff error " + fmt("%.3g", err) + " GBP, " + std::to_string(bound_violations) +
              "/1000 effective forwards outside [F^b, F^p]"};
}

Outcome preprocessing() {
  RawDemandSeries raw;
  const std::int64_t t0 = *parse_timestamp_minutes("2017-05-01T00:00");
  for (int h = 0; h < 48; ++h) {
    raw.minutes.push_back(t0 + 60 * h);
    raw.demand_mw.push_back(30000.0 + 10.0 * h);
    raw.minutes.push_back(t0 + 60 * h + 30);
    raw.demand_mw.push_back(30000.0 + 10.0 * h + 20.0 * (h % 3));
  }
  const auto conv = demand_to_load(raw);
  bool averages_exact = conv.load.size() == 48 && conv.gaps.empty();
  for (std::size_t h = 0; averages_exact && h < 48; ++h) {
    averages_exact = conv.load.values[h] == 30000.0 + 10.0 * h + 10.0 * (h % 3) &&
                     conv.load.hours[h].value == t0 / 60 + static_cast<std::int64_t>(h);
  }

  HourlySeries spiky;
  for (std::size_t h = 0; h < 48; ++h) {
    spiky.hours.push_back(conv.load.hours[h]);
    spiky.values.push_back(h % 13 == 5 ? 400.0 : 45.0 + (h % 4));
  }
  const CapStatistics stats = capping_statistics(spiky, conv.load, 1.5);
  const CapResult once = cap_spikes(spiky, conv.load, stats);
  const CapResult twice = cap_spikes(once.price, once.load, stats);
  const bool idempotent = !once.log.empty() && twice.log.empty() &&
                          twice.price.values == once.price.values &&
                          twice.load.values == once.load.values;

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::vector<double> draws(10000);
  for (double &v : draws) v = n(rng);
  const SdBuckets b = sd_buckets(draws);
  const double within1 = b.percent[0];
  const double within3 = b.percent[0] + b.percent[1] + b.percent[2];
  const bool histogram = std::abs(within1 - 68.3) <= 2.0 && within3 >= 99.5;
  return {averages_exact && idempotent && histogram,
          std::string("hourly averages ") + (averages_exact ? "exact" : "wrong") + ", capping " +
              (idempotent ? "idempotent" : "not idempotent") + ", " + fmt("%.2f", within1) +
              "% within 1 SD, " + fmt("%.2f", within3) + "% within 3 SD"};
}

BacktestConfig synthetic_study_config(std::uint64_t seed) {
  BacktestConfig c;
  c.start_month = std::chrono::year(2017) / std::chrono::January;
  c.end_month = std::chrono::year(2017) / std::chrono::June;
  c.restarts = 2;
  c.max_iterations = 60;
  c.n_samples = 200;
  c.seed = seed;
  return c;
}

MarketData synthetic_market(std::uint64_t seed) {
  SyntheticOptions o;
  o.seed = seed;
  return to_market_data(generate_synthetic(o));
}

Outcome directional() {
  int wins = 0;
  int skipped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto report = run_study(synthetic_study_config(seed), synthetic_market(seed));
    for (const auto &m : report.months) skipped += m.skipped ? 1 : 0;
    if (report.total_excess.at(0) > 0.0) ++wins;
  }
  return {wins >= 15, std::to_string(wins) + "/20 seeds beat the comparator, " +
                          std::to_string(skipped) + " months skipped"};
}

Outcome determinism() {
  const MarketData data = synthetic_market(42);
  BacktestConfig c = synthetic_study_config(42);
  c.threads = 1;
  const auto a = run_study(c, data);
  c.threads = 2;
  const auto b = run_study(c, data);
  bool same = monthly_csv(a) == monthly_csv(b) && cumulative_csv(a) == cumulative_csv(b) &&
              summary_json(a) == summary_json(b);
  for (std::size_t m = 0; same && m < a.months.size(); ++m) {
    for (std::size_t s = 0; s < a.months[m].strategies.size(); ++s) {
      same = same && a.months[m].strategies[s].model_dump == b.months[m].strategies[s].model_dump;
    }
  }
  return {same, same ? "reports and model dumps byte-identical" : "reports differ"};
}

struct Check {
  const char *name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
#if defined(__GLIBC__)
  // Serve large allocations from the heap, not mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const std::vector<Check> checks{
      {"dtc_degeneracy", 10.0, dtc_degeneracy},
      {"lml_gradient", 30.0, gradient_check},
      {"coregional_independence", 5.0, coregional_independence},
      {"kernel_validity", 0.0, kernel_validity},
      {"optimizer_vs_grid", 120.0, optimizer_vs_grid},
      {"minimum_variance", 0.0, minimum_variance},
      {"payoff_accounting", 0.0, payoff_accounting},
      {"preprocessing", 0.0, preprocessing},
      {"directional_backtest", 600.0, directional},
      {"determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const Check &c : checks) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.budget_seconds > 0.0 && seconds > c.budget_seconds) {
      o.pass = false;
      o.detail += ", over time budget of " + fmt("%.0f", c.budget_seconds) + " s";
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(checks.size()) - failures, checks.size());
  return failures == 0 ? 0 : 1;
}
