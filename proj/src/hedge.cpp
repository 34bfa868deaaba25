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

#include "csgp/hedge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "csgp/errors.hpp"
#include "csgp/gp.hpp"

namespace csgp {

namespace {

void check_position(const Position &pos) {
  if (!(pos.base > 0.0) || !(pos.peak >= 0.0) || !std::isfinite(pos.base) ||
      !std::isfinite(pos.peak)) {
    throw ConfigError("positions need V^b > 0 and V^p >= 0");
  }
}

// Online log-sum-exp of -payoff / scale over every (hour, sample) term,
// visited in storage order.  Returns the log of the sum and the hour holding
// the largest term.
struct LogSum {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t worst_hour = 0;
};

LogSum exponential_log_sum(const ScenarioSet &sc, const Position &pos,
                           const HedgeTerms &terms, double scale) {
  const double f_tilde = effective_forward(pos, terms);
  const double vb = pos.base;
  const double vt = pos.base + pos.peak;
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  std::size_t worst = 0;
  const int n = sc.n_samples();
  const double inv = -1.0 / scale;
  for (std::size_t h = 0; h < sc.num_hours(); ++h) {
    const bool peak = sc.classes()[h] == HourClass::kPeak;
    const double f = peak ? f_tilde : terms.base_forward;
    const double v = peak ? vt : vb;
    const double margin = peak ? terms.peak_margin : terms.base_margin;
    const double *p = sc.prices().data() + h * static_cast<std::size_t>(n);
    const double *l = sc.loads().data() + h * static_cast<std::size_t>(n);
    for (int k = 0; k < n; ++k) {
      const double x = inv * ((p[k] - f) * (v - l[k]) + margin * l[k]);
      if (x > m) {
        s = s * std::exp(m - x) + 1.0;
        m = x;
        worst = h;
      } else {
        s += std::exp(x - m);
      }
    }
  }
  if (!std::isfinite(m)) throw NumericalError("non-finite payoff in scenario set");
  return {m + std::log(s), worst};
}

double quadratic_sum(const ScenarioSet &sc, const Position &pos,
                     const HedgeTerms &terms, double scale) {
  double s = 0.0;
  for (std::size_t h = 0; h < sc.num_hours(); ++h) {
    for (int k = 0; k < sc.n_samples(); ++k) {
      const double x = hourly_payoff(sc.classes()[h], sc.price(h, k), sc.load(h, k), pos, terms) / scale;
      s += x * x;
    }
  }
  return s;
}

void check_loss(const LossOptions &loss) {
  if (!(loss.scale > 0.0) || !std::isfinite(loss.scale)) {
    throw ConfigError("loss scale must be positive");
  }
}

}  // namespace

void HedgeTerms::validate() const {
  if (!(base_forward > 0.0) || !(peak_forward >= base_forward) || !std::isfinite(peak_forward)) {
    throw ConfigError("forward prices must satisfy 0 < F^b <= F^p");
  }
  if (!(base_margin >= 0.0) || !(peak_margin >= 0.0)) {
    throw ConfigError("margins must be nonnegative");
  }
  if (!(retailer_share > 0.0) || retailer_share > 1.0) {
    throw ConfigError("retailer share must lie in (0, 1]");
  }
}

ScenarioSet::ScenarioSet(std::vector<HourClass> classes, int n_samples,
                         std::vector<double> price, std::vector<double> load)
    : classes_(std::move(classes)),
      n_samples_(n_samples),
      price_(std::move(price)),
      load_(std::move(load)) {
  if (classes_.empty() || n_samples_ < 1) throw ConfigError("scenario set is empty");
  const std::size_t total = classes_.size() * static_cast<std::size_t>(n_samples_);
  if (price_.size() != total || load_.size() != total) {
    throw ConfigError("scenario draws do not match hours x samples");
  }
  std::vector<std::pair<double, double>> buf(static_cast<std::size_t>(n_samples_));
  for (std::size_t h = 0; h < classes_.size(); ++h) {
    for (int k = 0; k < n_samples_; ++k) {
      const std::size_t i = index(h, k);
      if (!std::isfinite(price_[i]) || !std::isfinite(load_[i])) {
        throw ConfigError("scenario draws must be finite");
      }
      buf[static_cast<std::size_t>(k)] = {price_[i], std::max(0.0, load_[i])};
    }
    std::sort(buf.begin(), buf.end());
    for (int k = 0; k < n_samples_; ++k) {
      price_[index(h, k)] = buf[static_cast<std::size_t>(k)].first;
      load_[index(h, k)] = buf[static_cast<std::size_t>(k)].second;
    }
  }
}

double effective_forward(const Position &pos, const HedgeTerms &terms) {
  const double total = pos.base + pos.peak;
  if (!(total > 0.0)) throw ConfigError("effective forward needs V^b + V^p > 0");
  if (pos.base < 0.0 || pos.peak < 0.0) throw ConfigError("volumes must be nonnegative");
  const double w = pos.base / total;
  const double f = terms.peak_forward - w * (terms.peak_forward - terms.base_forward);
  return std::clamp(f, terms.base_forward, terms.peak_forward);
}

double hourly_payoff(HourClass cls, double price, double load,
                     const Position &pos, const HedgeTerms &terms) {
  if (!std::isfinite(price) || !std::isfinite(load) || load < 0.0) {
    throw ConfigError("payoff needs finite price and nonnegative load");
  }
  if (cls == HourClass::kOffPeak) {
    return (price - terms.base_forward) * (pos.base - load) + terms.base_margin * load;
  }
  return (price - effective_forward(pos, terms)) * (pos.base + pos.peak - load) +
         terms.peak_margin * load;
}

double log_expected_loss(const ScenarioSet &scenarios, const Position &pos,
                         const HedgeTerms &terms, const LossOptions &loss) {
  check_loss(loss);
  check_position(pos);
  const double log_n = std::log(static_cast<double>(scenarios.n_samples()));
  if (loss.kind == LossKind::kExponential) {
    return exponential_log_sum(scenarios, pos, terms, loss.scale).value - log_n;
  }
  return std::log(quadratic_sum(scenarios, pos, terms, loss.scale)) - log_n;
}

double expected_loss(const ScenarioSet &scenarios, const Position &pos,
                     const HedgeTerms &terms, const LossOptions &loss) {
  check_loss(loss);
  check_position(pos);
  const double n = static_cast<double>(scenarios.n_samples());
  if (loss.kind == LossKind::kQuadratic) {
    return quadratic_sum(scenarios, pos, terms, loss.scale) / n;
  }
  const LogSum ls = exponential_log_sum(scenarios, pos, terms, loss.scale);
  const double v = std::exp(ls.value - std::log(n));
  if (!std::isfinite(v)) {
    throw NumericalError("exponential loss overflows; largest term at scenario hour " +
                         std::to_string(ls.worst_hour));
  }
  return v;
}

OptimizationResult optimize_positions(const ScenarioSet &scenarios,
                                      const HedgeTerms &terms,
                                      const LossOptions &loss,
                                      const OptimizerOptions &opt) {
  terms.validate();
  check_loss(loss);
  if (!(opt.v_min > 0.0) || !(opt.v_max > opt.v_min) || opt.grid_points < 2 ||
      opt.max_evaluations < 1) {
    throw ConfigError("invalid optimizer options");
  }
  OptimizationResult best;
  best.objective = std::numeric_limits<double>::infinity();
  int evals = 0;
  const double lo[2] = {opt.v_min, 0.0};
  const double hi[2] = {opt.v_max, opt.v_max};
  using Point = std::array<double, 2>;
  auto clamp_point = [&](Point p) {
    for (int d = 0; d < 2; ++d) p[d] = std::clamp(p[d], lo[d], hi[d]);
    return p;
  };
  auto f = [&](const Point &p) {
    ++evals;
    const Position pos{p[0], p[1]};
    const double v = loss.kind == LossKind::kExponential
                         ? log_expected_loss(scenarios, pos, terms, loss)
                         : expected_loss(scenarios, pos, terms, loss);
    if (v < best.objective) {
      best.objective = v;
      best.position = pos;
    }
    return v;
  };

  // Coarse grid.
  std::vector<std::pair<double, Point>> grid;
  const int g = opt.grid_points;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const Point p{lo[0] + (hi[0] - lo[0]) * i / (g - 1), lo[1] + (hi[1] - lo[1]) * j / (g - 1)};
      grid.push_back({f(p), p});
    }
  }
  std::stable_sort(grid.begin(), grid.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });
  std::vector<Point> starts;
  for (int k = 0; k < opt.grid_starts && k < static_cast<int>(grid.size()); ++k) {
    starts.push_back(grid[static_cast<std::size_t>(k)].second);
  }
  for (int k = 0; k < opt.random_starts; ++k) {
    std::mt19937_64 rng(mix_seed(opt.seed, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    starts.push_back({lo[0] + (hi[0] - lo[0]) * u(rng), lo[1] + (hi[1] - lo[1]) * u(rng)});
  }

  bool all_converged = true;
  const double range = hi[0] - lo[0];
  for (const Point &start : starts) {
    // Nelder-Mead with proposals projected onto the box.
    std::array<Point, 3> s;
    std::array<double, 3> fs;
    s[0] = start;
    for (int d = 0; d < 2; ++d) {
      Point p = start;
      const double step = 0.05 * range;
      p[d] = p[d] + step <= hi[d] ? p[d] + step : p[d] - step;
      s[static_cast<std::size_t>(d + 1)] = clamp_point(p);
    }
    for (int i = 0; i < 3; ++i) fs[static_cast<std::size_t>(i)] = f(s[static_cast<std::size_t>(i)]);
    bool nm_converged = false;
    const int budget = evals + opt.max_evaluations / 2;
    while (evals < budget) {
      std::array<int, 3> o{0, 1, 2};
      std::sort(o.begin(), o.end(), [&](int a, int b) { return fs[a] < fs[b]; });
      std::array<Point, 3> s2{s[o[0]], s[o[1]], s[o[2]]};
      std::array<double, 3> f2{fs[o[0]], fs[o[1]], fs[o[2]]};
      s = s2;
      fs = f2;
      double diam = 0.0;
      for (int i = 1; i < 3; ++i)
        for (int d = 0; d < 2; ++d) diam = std::max(diam, std::abs(s[i][d] - s[0][d]));
      if (diam < opt.tolerance || std::abs(fs[2] - fs[0]) <= opt.tolerance * (std::abs(fs[0]) + opt.tolerance)) {
        nm_converged = true;
        break;
      }
      const Point c{0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])};
      auto along = [&](double t) {
        return clamp_point({c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])});
      };
      const Point r = along(-1.0);
      const double fr = f(r);
      if (fr < fs[0]) {
        const Point e = along(-2.0);
        const double fe = f(e);
        if (fe < fr) {
          s[2] = e;
          fs[2] = fe;
        } else {
          s[2] = r;
          fs[2] = fr;
        }
      } else if (fr < fs[1]) {
        s[2] = r;
        fs[2] = fr;
      } else {
        const Point k = fr < fs[2] ? along(-0.5) : along(0.5);
        const double fk = f(k);
        if (fk < std::min(fr, fs[2])) {
          s[2] = k;
          fs[2] = fk;
        } else {
          for (int i = 1; i < 3; ++i) {
            s[i] = clamp_point({0.5 * (s[0][0] + s[i][0]), 0.5 * (s[0][1] + s[i][1])});
            fs[i] = f(s[i]);
          }
        }
      }
    }
    // Coordinate descent refinement from the simplex best.
    Point x = s[0];
    double fx = fs[0];
    for (int i = 1; i < 3; ++i) {
      if (fs[i] < fx) {
        x = s[i];
        fx = fs[i];
      }
    }
    double h = std::max(1e-3 * range, 10.0 * opt.tolerance);
    const int budget2 = evals + opt.max_evaluations / 2;
    while (h >= opt.tolerance && evals < budget2) {
      bool improved = false;
      for (int d = 0; d < 2; ++d) {
        for (double sign : {1.0, -1.0}) {
          Point y = x;
          y[d] += sign * h;
          y = clamp_point(y);
          if (y == x) continue;
          const double fy = f(y);
          if (fy < fx) {
            x = y;
            fx = fy;
            improved = true;
            break;
          }
        }
      }
      if (!improved) h *= 0.5;
    }
    if (!nm_converged || h >= opt.tolerance) all_converged = false;
  }
  best.evaluations = evals;
  best.converged = all_converged;
  if (!all_converged) best.warning = "local search stopped at the evaluation budget";
  return best;
}

ComparatorPosition average_load_positions(std::span<const double> load,
                                          std::span<const HourClass> classes) {
  if (load.size() != classes.size()) throw ConfigError("loads and hour classes differ in length");
  double sum_peak = 0.0;
  double sum_off = 0.0;
  std::size_t n_peak = 0;
  std::size_t n_off = 0;
  for (std::size_t i = 0; i < load.size(); ++i) {
    if (classes[i] == HourClass::kPeak) {
      sum_peak += load[i];
      ++n_peak;
    } else {
      sum_off += load[i];
      ++n_off;
    }
  }
  if (n_peak == 0 || n_off == 0) {
    throw ConfigError("average-load comparator needs both peak and off-peak hours");
  }
  ComparatorPosition out;
  out.position.base = sum_off / static_cast<double>(n_off);
  out.position.peak = sum_peak / static_cast<double>(n_peak) - out.position.base;
  if (out.position.peak < 0.0) {
    out.position.peak = 0.0;
    out.peak_clamped = true;
  }
  return out;
}

RealizedPayoff realized_payoff(std::span<const HourStamp> hours,
                               const HourlySeries &price,
                               const HourlySeries &load, const Position &pos,
                               const HedgeTerms &terms, double global_max) {
  terms.validate();
  if (!(global_max > 0.0)) throw ConfigError("normalization maximum must be positive");
  std::vector<std::string> missing;
  RealizedPayoff out;
  for (HourStamp h : hours) {
    const auto ip = price.find(h);
    const auto il = load.find(h);
    if (!ip || !il) {
      missing.push_back(h.iso());
      continue;
    }
    out.normalized += hourly_payoff(classify_hour(h), price.values[*ip],
                                    std::max(0.0, load.values[*il]), pos, terms);
  }
  if (!missing.empty()) {
    const std::string what = std::to_string(missing.size()) +
                             " delivery hour(s) lack actual data, first " + missing.front();
    throw GapError(what, std::move(missing));
  }
  out.gbp = out.normalized * global_max * terms.retailer_share;
  out.mio_gbp = out.gbp / 1e6;
  return out;
}

}  // namespace csgp
