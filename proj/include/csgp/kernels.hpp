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

#ifndef CSGP_KERNELS_HPP_
#define CSGP_KERNELS_HPP_

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace csgp {

enum class KernelKind {
  kSquaredExponential,
  kMatern52,
  kPeriodic,
  kRationalQuadratic,
  kWhiteNoise,
  kSum,
};

/*
 * Immutable description of a stationary covariance function of the scalar
 * distance r = |x - x'|.  Every leaf uses a sigma^2 prefactor:
 *
 *   SE        s^2 exp(-r^2 / l^2)
 *   Matern52  s^2 (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l)
 *   Periodic  s^2 exp(-2 sin^2(pi r / p) / l^2)
 *   RQ        s^2 (1 + r^2 / (2 alpha l^2))^(-alpha)
 *   White     v  if r == 0 (identical inputs), else 0
 *
 * A Sum node adds its children.  Trainable hyperparameters are exposed in log
 * space; periods are fixed.
 */
class KernelSpec {
 public:
  static KernelSpec squared_exponential(double amplitude, double lengthscale,
                                        std::string label = "se");
  static KernelSpec matern52(double amplitude, double lengthscale,
                             std::string label = "mat52");
  static KernelSpec periodic(double amplitude, double lengthscale,
                             double period, std::string label = "per");
  static KernelSpec rational_quadratic(double amplitude, double lengthscale,
                                       double shape, std::string label = "rq");
  static KernelSpec white_noise(double variance, std::string label = "white");
  static KernelSpec sum(std::vector<KernelSpec> children);

  KernelKind kind() const { return kind_; }
  const std::string &label() const { return label_; }
  double amplitude() const { return amplitude_; }
  double lengthscale() const { return lengthscale_; }
  double period() const { return period_; }
  double shape() const { return shape_; }
  double noise_variance() const { return noise_variance_; }
  const std::vector<KernelSpec> &children() const { return children_; }

  /// Leaves in depth-first order (a leaf returns itself).
  std::vector<const KernelSpec *> leaves() const;

  std::size_t num_hyperparameters() const;
  std::vector<double> log_hyperparameters() const;
  std::vector<std::string> hyperparameter_names() const;
  KernelSpec with_log_hyperparameters(std::span<const double> values) const;

 private:
  KernelSpec() = default;
  void append_log_hyperparameters(std::vector<double> &out) const;
  void append_names(const std::string &prefix,
                    std::vector<std::string> &out) const;
  KernelSpec rebuilt(std::span<const double> values, std::size_t &pos) const;

  KernelKind kind_ = KernelKind::kSquaredExponential;
  std::string label_;
  double amplitude_ = 1.0;
  double lengthscale_ = 1.0;
  double period_ = 1.0;
  double shape_ = 1.0;
  double noise_variance_ = 0.0;
  std::vector<KernelSpec> children_;
};

double kernel_eval(const KernelSpec &spec, double r);

/// Value at r; writes d kappa / d log(theta) into `gradient`, ordered like
/// `log_hyperparameters()`.  `gradient.size()` must equal the hyperparameter
/// count.
double kernel_eval_with_gradient(const KernelSpec &spec, double r,
                                 std::span<double> gradient);

Eigen::MatrixXd gram_matrix(const KernelSpec &spec, std::span<const double> x,
                            std::span<const double> x2);

enum class CompositeLeaf { kSe, kMat52, kPer12, kPer24, kPer168, kRq, kWhite };

inline constexpr std::array<CompositeLeaf, 7> kAllCompositeLeaves = {
    CompositeLeaf::kSe,     CompositeLeaf::kMat52,  CompositeLeaf::kPer12,
    CompositeLeaf::kPer24,  CompositeLeaf::kPer168, CompositeLeaf::kRq,
    CompositeLeaf::kWhite};

std::string_view composite_leaf_name(CompositeLeaf leaf);
std::optional<CompositeLeaf> parse_composite_leaf(std::string_view name);

struct LeafInitialValues {
  double amplitude = 1.0;
  double lengthscale = 1.0;
  double shape = 1.0;     // RQ only
  double variance = 0.0;  // white noise only
};

LeafInitialValues default_initial_values(CompositeLeaf leaf);

struct CompositeKernelConfig {
  std::vector<CompositeLeaf> leaves{kAllCompositeLeaves.begin(),
                                    kAllCompositeLeaves.end()};
  /// Overrides of the defaults from `default_initial_values`.
  std::map<CompositeLeaf, LeafInitialValues> initial;
};

/// SE + Matern52 + Per12 + Per24 + Per168 + RQ + white noise, minus any
/// ablated leaves.  A single surviving leaf is returned bare.
KernelSpec composite_kernel(const CompositeKernelConfig &config = {});

/// Intrinsic coregionalization: B = W W^T + diag(kappa), D tasks, rank R.
/// Trainable hyperparameters are the W entries (row-major, raw) followed by
/// log(kappa).
class CoregionalSpec {
 public:
  CoregionalSpec(Eigen::MatrixXd w, Eigen::VectorXd kappa);

  static CoregionalSpec identity(int num_tasks);

  int num_tasks() const { return static_cast<int>(w_.rows()); }
  int rank() const { return static_cast<int>(w_.cols()); }
  const Eigen::MatrixXd &w() const { return w_; }
  const Eigen::VectorXd &kappa() const { return kappa_; }
  const Eigen::MatrixXd &b() const { return b_; }

  std::size_t num_hyperparameters() const;
  std::vector<double> hyperparameters() const;
  std::vector<std::string> hyperparameter_names() const;
  CoregionalSpec with_hyperparameters(std::span<const double> values) const;

  /// dB / d theta_p for the p-th hyperparameter.
  Eigen::MatrixXd b_gradient(std::size_t p) const;

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd kappa_;
  Eigen::MatrixXd b_;
};

struct TaskInput {
  int task = 0;
  double x = 0.0;

  bool operator==(const TaskInput &) const = default;
};

/// Element ((d,x),(d',x')) = B[d,d'] * kappa(|x - x'|).
Eigen::MatrixXd coregional_gram(const CoregionalSpec &coreg,
                                const KernelSpec &spec,
                                std::span<const TaskInput> a,
                                std::span<const TaskInput> b);

}  // namespace csgp

#endif  // CSGP_KERNELS_HPP_
