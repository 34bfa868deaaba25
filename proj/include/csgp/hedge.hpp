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

#ifndef CSGP_HEDGE_HPP_
#define CSGP_HEDGE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csgp/marketdata.hpp"

namespace csgp {

/// Forward prices and margins in GBP/MWh.
struct HedgeTerms {
  double base_forward = 0.0;
  double peak_forward = 0.0;
  double base_margin = 0.0;
  double peak_margin = 0.0;
  /// Fraction of national load served by the retailer.
  double retailer_share = 0.015;

  void validate() const;
};

/// Volumes as fractions of the normalization load.
struct Position {
  double base = 0.0;
  double peak = 0.0;
};

/*
 * Joint (price, normalized load) draws for the hours of a delivery month.
 * Draws are stored hour-major.  Load draws are clamped at zero and the draws
 * of each hour are kept sorted, so the set does not depend on the order in
 * which samples were supplied.
 */
class ScenarioSet {
 public:
  ScenarioSet(std::vector<HourClass> classes, int n_samples,
              std::vector<double> price, std::vector<double> load);

  std::size_t num_hours() const { return classes_.size(); }
  int n_samples() const { return n_samples_; }
  const std::vector<HourClass> &classes() const { return classes_; }
  double price(std::size_t hour, int sample) const { return price_[index(hour, sample)]; }
  double load(std::size_t hour, int sample) const { return load_[index(hour, sample)]; }
  const std::vector<double> &prices() const { return price_; }
  const std::vector<double> &loads() const { return load_; }

 private:
  std::size_t index(std::size_t hour, int sample) const {
    return hour * static_cast<std::size_t>(n_samples_) + static_cast<std::size_t>(sample);
  }

  std::vector<HourClass> classes_;
  int n_samples_ = 0;
  std::vector<double> price_;
  std::vector<double> load_;
};

/// F^p - V^b / (V^b + V^p) (F^p - F^b).
double effective_forward(const Position &pos, const HedgeTerms &terms);

/// Off-peak: (S - F^b)(V^b - L) + d^b L.  Peak: (S - F~)(V^b + V^p - L) + d^p L.
double hourly_payoff(HourClass cls, double price, double load,
                     const Position &pos, const HedgeTerms &terms);

enum class LossKind { kExponential, kQuadratic };

struct LossOptions {
  LossKind kind = LossKind::kExponential;
  /// Payoffs are divided by this before the loss is applied.
  double scale = 1.0;
};

/// Mean over samples of the sum over hours of u(-payoff / scale), with
/// u = exp or u(x) = x^2.  Throws NumericalError when the exponential loss
/// overflows a double.
double expected_loss(const ScenarioSet &scenarios, const Position &pos,
                     const HedgeTerms &terms, const LossOptions &loss = {});

/// log(expected_loss), finite wherever the payoffs are.
double log_expected_loss(const ScenarioSet &scenarios, const Position &pos,
                         const HedgeTerms &terms, const LossOptions &loss = {});

struct OptimizerOptions {
  double v_min = 1e-6;
  double v_max = 2.0;
  /// Points per axis of the coarse grid used to seed local searches.
  int grid_points = 21;
  int grid_starts = 3;
  int random_starts = 2;
  std::uint64_t seed = 0;
  int max_evaluations = 6000;
  double tolerance = 1e-9;
};

struct OptimizationResult {
  Position position;
  double objective = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::string warning;
};

/// Minimizes the expected loss over the box [v_min, v_max] x [0, v_max]:
/// coarse grid and seeded random starts, Nelder-Mead, then coordinate
/// descent.  Returns the best point found even without convergence.
OptimizationResult optimize_positions(const ScenarioSet &scenarios,
                                      const HedgeTerms &terms,
                                      const LossOptions &loss = {},
                                      const OptimizerOptions &options = {});

struct ComparatorPosition {
  Position position;
  /// Mean peak load fell below mean off-peak load; V^p was set to zero.
  bool peak_clamped = false;
};

/// V^b = mean off-peak load, V^p = mean peak load - V^b (floored at zero).
ComparatorPosition average_load_positions(std::span<const double> load,
                                          std::span<const HourClass> classes);

struct RealizedPayoff {
  /// Sum of hourly payoffs in normalized volume units.
  double normalized = 0.0;
  double gbp = 0.0;
  double mio_gbp = 0.0;
};

/// Realized payoff over `hours` using actual price and normalized load.
/// Volumes are scaled back by `global_max` MWh and the retailer share.
/// Throws GapError if any hour is missing from either series.
RealizedPayoff realized_payoff(std::span<const HourStamp> hours,
                               const HourlySeries &price,
                               const HourlySeries &load, const Position &pos,
                               const HedgeTerms &terms, double global_max);

}  // namespace csgp

#endif  // CSGP_HEDGE_HPP_
