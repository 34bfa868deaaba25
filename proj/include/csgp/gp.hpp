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

#ifndef CSGP_GP_HPP_
#define CSGP_GP_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csgp/kernels.hpp"

namespace csgp {

inline constexpr int kPriceTask = 0;
inline constexpr int kLoadTask = 1;

/// Observations of one or more tasks on scalar inputs (hours since the start
/// of the training window).  Two-task sets built by `from_hourly` are ordered
/// task-major: every price observation, then every load observation.
struct TrainingSet {
  std::vector<TaskInput> inputs;
  std::vector<double> targets;
  int num_tasks = 1;

  static TrainingSet from_hourly(std::span<const double> hours,
                                 std::span<const double> price,
                                 std::span<const double> load);

  std::size_t size() const { return inputs.size(); }
  std::size_t task_count(int task) const;
  /// Sorted distinct input values of one task.
  std::vector<double> task_inputs(int task) const;
  void validate() const;
};

struct GpOptions {
  /// Nugget added to every covariance block at identical (task, x) pairs,
  /// relative to the mean prior variance of the training set.
  double relative_jitter = 1e-6;
  /// Subtract the per-task empirical mean before inference and add it back
  /// to predictions (zero-mean prior on the residual).
  bool center_targets = true;
};

struct RestartReport {
  bool ok = false;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  std::string message;
};

struct FitDiagnostics {
  int restarts = 0;
  int best_restart = -1;
  double log_marginal_likelihood = 0.0;
  std::vector<RestartReport> runs;
};

/*
 * Coregionalized GP over (task, hour) inputs with the kernel B (x) kappa.
 * Without inducing inputs the model is an exact GP; with inducing inputs Z
 * (shared across tasks) it uses the DTC approximation.  Models are values:
 * `fit` and the `with_*` functions return modified copies.
 */
class GpModel {
 public:
  GpModel(KernelSpec kernel, CoregionalSpec coreg,
          std::vector<double> noise_variance, TrainingSet train,
          GpOptions options = {});

  const KernelSpec &kernel() const { return kernel_; }
  const CoregionalSpec &coreg() const { return coreg_; }
  const std::vector<double> &noise_variance() const { return noise_; }
  const TrainingSet &training() const { return train_; }
  const GpOptions &options() const { return options_; }
  const std::optional<std::vector<double>> &inducing() const { return inducing_; }
  int num_tasks() const { return coreg_.num_tasks(); }

  /// Per-task offsets removed from the targets (zero when not centering).
  const std::vector<double> &task_means() const { return task_means_; }
  /// Targets minus task means.
  const Eigen::VectorXd &centered_targets() const { return centered_; }

  bool fitted() const { return fit_.has_value(); }
  const std::optional<FitDiagnostics> &fit_diagnostics() const { return fit_; }

  /// Kernel log-hyperparameters, then coregional hyperparameters, then
  /// log noise variances.
  std::size_t num_parameters() const;
  std::vector<double> parameters() const;
  std::vector<std::string> parameter_names() const;

  GpModel with_parameters(std::span<const double> values) const;
  GpModel with_inducing(std::vector<double> z) const;
  GpModel with_fit(FitDiagnostics diagnostics) const;

  /// `name=value` lines of natural-scale hyperparameters and the objective.
  std::string dump() const;

 private:
  KernelSpec kernel_;
  CoregionalSpec coreg_;
  std::vector<double> noise_;
  TrainingSet train_;
  GpOptions options_;
  std::optional<std::vector<double>> inducing_;
  std::vector<double> task_means_;
  Eigen::VectorXd centered_;
  std::optional<FitDiagnostics> fit_;
};

enum class CovarianceMode { kFull, kDiagonal };

struct PosteriorPrediction {
  std::vector<TaskInput> inputs;
  Eigen::VectorXd mean;
  /// Always populated; slightly negative round-off is clamped to zero.
  Eigen::VectorXd variance;
  /// Populated for CovarianceMode::kFull.
  std::optional<Eigen::MatrixXd> covariance;
};

PosteriorPrediction exact_posterior(const GpModel &model,
                                    std::span<const TaskInput> test,
                                    CovarianceMode mode = CovarianceMode::kFull);

PosteriorPrediction dtc_posterior(const GpModel &model,
                                  std::span<const TaskInput> test,
                                  CovarianceMode mode = CovarianceMode::kFull);

/// Dispatches on whether the model has inducing inputs.
PosteriorPrediction posterior(const GpModel &model,
                              std::span<const TaskInput> test,
                              CovarianceMode mode = CovarianceMode::kFull);

/// Prior covariance of the test inputs under the model (jitter included).
Eigen::MatrixXd prior_covariance(const GpModel &model,
                                 std::span<const TaskInput> test);

struct LogLikelihood {
  double value = 0.0;
  /// d value / d parameters(), empty when not requested.
  std::vector<double> gradient;
};

/// log N(y | 0, K + S) for exact models and log N(y | 0, Q_ff + S) for DTC
/// models, S = diag(per-task noise).
LogLikelihood log_marginal_likelihood(const GpModel &model,
                                      bool with_gradient = true);

/// Uniform-stride subset of the per-task training grid with
/// round(sparsity * n_per_task) points.
std::vector<double> select_inducing(const TrainingSet &train, double sparsity);

struct FitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  /// Restart 0 starts from the model's current hyperparameters instead of a
  /// random draw.
  bool start_from_current = true;
};

/// Maximizes the log marginal likelihood with L-BFGS from `restarts`
/// initializations and returns the best model.  Throws FitError when every
/// restart fails.
GpModel fit(const GpModel &model, const FitOptions &options);

/// Bivariate (price, load) posterior marginal for each hour.
struct HourlyJointPosterior {
  std::vector<double> hours;
  std::vector<Eigen::Vector2d> mean;
  std::vector<Eigen::Matrix2d> covariance;
};

HourlyJointPosterior hourly_joint_posterior(const GpModel &model,
                                            std::span<const double> hours);

/// `n_samples` independent draws per hour, stored hour-major
/// (`price[h * n_samples + s]`).
struct JointDraws {
  std::vector<double> hours;
  int n_samples = 0;
  std::vector<double> price;
  std::vector<double> load;
};

JointDraws sample_bivariate(const HourlyJointPosterior &posterior,
                            int n_samples, std::uint64_t seed);

/// Requires a fitted two-task model.
JointDraws sample_posterior_scenarios(const GpModel &model,
                                      std::span<const double> hours,
                                      int n_samples, std::uint64_t seed);

/// SplitMix64 finalizer, used to derive independent seeds from a counter.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace csgp

#endif  // CSGP_GP_HPP_
