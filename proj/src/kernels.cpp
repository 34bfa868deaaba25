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

#include "csgp/kernels.hpp"

#include <cmath>
#include <numbers>

#include "csgp/errors.hpp"

namespace csgp {

namespace {

void require_positive(double value, const char *what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string("kernel hyperparameter '") + what +
                      "' must be positive and finite, got " +
                      std::to_string(value));
  }
}

void require_distance(double r) {
  if (!std::isfinite(r) || r < 0.0) {
    throw ConfigError("kernel distance must be finite and nonnegative, got " +
                      std::to_string(r));
  }
}

std::size_t leaf_parameter_count(KernelKind kind) {
  switch (kind) {
    case KernelKind::kRationalQuadratic:
      return 3;
    case KernelKind::kWhiteNoise:
      return 1;
    case KernelKind::kSum:
      return 0;
    default:
      return 2;
  }
}

// Value and log-space gradient of a single leaf.
double leaf_eval(const KernelSpec &leaf, double r, double *grad) {
  const double s2 = leaf.amplitude() * leaf.amplitude();
  const double l = leaf.lengthscale();
  switch (leaf.kind()) {
    case KernelKind::kSquaredExponential: {
      const double q = r * r / (l * l);
      const double k = s2 * std::exp(-q);
      if (grad) {
        grad[0] = 2.0 * k;
        grad[1] = 2.0 * q * k;
      }
      return k;
    }
    case KernelKind::kMatern52: {
      const double a = std::sqrt(5.0) * r / l;
      const double e = std::exp(-a);
      const double k = s2 * (1.0 + a + a * a / 3.0) * e;
      if (grad) {
        grad[0] = 2.0 * k;
        grad[1] = s2 * a * a * (1.0 + a) / 3.0 * e;
      }
      return k;
    }
    case KernelKind::kPeriodic: {
      const double s = std::sin(std::numbers::pi * r / leaf.period());
      const double q = 2.0 * s * s / (l * l);
      const double k = s2 * std::exp(-q);
      if (grad) {
        grad[0] = 2.0 * k;
        grad[1] = 2.0 * q * k;
      }
      return k;
    }
    case KernelKind::kRationalQuadratic: {
      const double alpha = leaf.shape();
      const double q = r * r / (2.0 * alpha * l * l);
      const double base = std::log1p(q);
      const double k = s2 * std::exp(-alpha * base);
      if (grad) {
        grad[0] = 2.0 * k;
        grad[1] = 2.0 * alpha * q / (1.0 + q) * k;
        grad[2] = alpha * (q / (1.0 + q) - base) * k;
      }
      return k;
    }
    case KernelKind::kWhiteNoise: {
      const double k = r == 0.0 ? leaf.noise_variance() : 0.0;
      if (grad) grad[0] = k;
      return k;
    }
    case KernelKind::kSum:
      break;
  }
  return 0.0;
}

}  // namespace

KernelSpec KernelSpec::squared_exponential(double amplitude,
                                           double lengthscale,
                                           std::string label) {
  require_positive(amplitude, "amplitude");
  require_positive(lengthscale, "lengthscale");
  KernelSpec k;
  k.kind_ = KernelKind::kSquaredExponential;
  k.amplitude_ = amplitude;
  k.lengthscale_ = lengthscale;
  k.label_ = std::move(label);
  return k;
}

KernelSpec KernelSpec::matern52(double amplitude, double lengthscale,
                                std::string label) {
  KernelSpec k = squared_exponential(amplitude, lengthscale, std::move(label));
  k.kind_ = KernelKind::kMatern52;
  return k;
}

KernelSpec KernelSpec::periodic(double amplitude, double lengthscale,
                                double period, std::string label) {
  require_positive(period, "period");
  KernelSpec k = squared_exponential(amplitude, lengthscale, std::move(label));
  k.kind_ = KernelKind::kPeriodic;
  k.period_ = period;
  return k;
}

KernelSpec KernelSpec::rational_quadratic(double amplitude, double lengthscale,
                                          double shape, std::string label) {
  require_positive(shape, "shape");
  KernelSpec k = squared_exponential(amplitude, lengthscale, std::move(label));
  k.kind_ = KernelKind::kRationalQuadratic;
  k.shape_ = shape;
  return k;
}

KernelSpec KernelSpec::white_noise(double variance, std::string label) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw ConfigError("white noise variance must be nonnegative and finite");
  }
  KernelSpec k;
  k.kind_ = KernelKind::kWhiteNoise;
  k.noise_variance_ = variance;
  k.label_ = std::move(label);
  return k;
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> children) {
  if (children.size() < 2) {
    throw ConfigError("a Sum kernel needs at least two children");
  }
  KernelSpec k;
  k.kind_ = KernelKind::kSum;
  k.label_ = "sum";
  k.children_ = std::move(children);
  return k;
}

std::vector<const KernelSpec *> KernelSpec::leaves() const {
  std::vector<const KernelSpec *> out;
  if (kind_ != KernelKind::kSum) {
    out.push_back(this);
    return out;
  }
  for (const auto &child : children_) {
    auto sub = child.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::size_t KernelSpec::num_hyperparameters() const {
  if (kind_ != KernelKind::kSum) return leaf_parameter_count(kind_);
  std::size_t n = 0;
  for (const auto &child : children_) n += child.num_hyperparameters();
  return n;
}

void KernelSpec::append_log_hyperparameters(std::vector<double> &out) const {
  switch (kind_) {
    case KernelKind::kSum:
      for (const auto &child : children_) child.append_log_hyperparameters(out);
      return;
    case KernelKind::kWhiteNoise:
      out.push_back(std::log(noise_variance_));
      return;
    default:
      out.push_back(std::log(amplitude_));
      out.push_back(std::log(lengthscale_));
      if (kind_ == KernelKind::kRationalQuadratic) {
        out.push_back(std::log(shape_));
      }
  }
}

std::vector<double> KernelSpec::log_hyperparameters() const {
  std::vector<double> out;
  out.reserve(num_hyperparameters());
  append_log_hyperparameters(out);
  return out;
}

void KernelSpec::append_names(const std::string &prefix,
                              std::vector<std::string> &out) const {
  switch (kind_) {
    case KernelKind::kSum:
      for (const auto &child : children_) child.append_names(prefix, out);
      return;
    case KernelKind::kWhiteNoise:
      out.push_back(prefix + label_ + ".variance");
      return;
    default:
      out.push_back(prefix + label_ + ".amplitude");
      out.push_back(prefix + label_ + ".lengthscale");
      if (kind_ == KernelKind::kRationalQuadratic) {
        out.push_back(prefix + label_ + ".shape");
      }
  }
}

std::vector<std::string> KernelSpec::hyperparameter_names() const {
  std::vector<std::string> out;
  append_names("", out);
  return out;
}

KernelSpec KernelSpec::rebuilt(std::span<const double> values,
                               std::size_t &pos) const {
  auto next = [&] { return std::exp(values[pos++]); };
  switch (kind_) {
    case KernelKind::kSum: {
      std::vector<KernelSpec> kids;
      kids.reserve(children_.size());
      for (const auto &child : children_) kids.push_back(child.rebuilt(values, pos));
      return sum(std::move(kids));
    }
    case KernelKind::kWhiteNoise:
      return white_noise(next(), label_);
    case KernelKind::kSquaredExponential: {
      const double a = next();
      return squared_exponential(a, next(), label_);
    }
    case KernelKind::kMatern52: {
      const double a = next();
      return matern52(a, next(), label_);
    }
    case KernelKind::kPeriodic: {
      const double a = next();
      return periodic(a, next(), period_, label_);
    }
    case KernelKind::kRationalQuadratic: {
      const double a = next();
      const double l = next();
      return rational_quadratic(a, l, next(), label_);
    }
  }
  return *this;
}

KernelSpec KernelSpec::with_log_hyperparameters(
    std::span<const double> values) const {
  if (values.size() != num_hyperparameters()) {
    throw ConfigError("kernel hyperparameter vector has wrong length");
  }
  std::size_t pos = 0;
  return rebuilt(values, pos);
}

double kernel_eval(const KernelSpec &spec, double r) {
  require_distance(r);
  if (spec.kind() != KernelKind::kSum) return leaf_eval(spec, r, nullptr);
  double total = 0.0;
  for (const auto &child : spec.children()) total += kernel_eval(child, r);
  return total;
}

double kernel_eval_with_gradient(const KernelSpec &spec, double r,
                                 std::span<double> gradient) {
  require_distance(r);
  if (gradient.size() != spec.num_hyperparameters()) {
    throw ConfigError("gradient buffer has wrong length");
  }
  if (spec.kind() != KernelKind::kSum) {
    return leaf_eval(spec, r, gradient.data());
  }
  double total = 0.0;
  std::size_t offset = 0;
  for (const auto &child : spec.children()) {
    const std::size_t n = child.num_hyperparameters();
    total += kernel_eval_with_gradient(child, r, gradient.subspan(offset, n));
    offset += n;
  }
  return total;
}

Eigen::MatrixXd gram_matrix(const KernelSpec &spec, std::span<const double> x,
                            std::span<const double> x2) {
  if (x.empty() || x2.empty()) {
    throw ConfigError("gram_matrix requires nonempty input sets");
  }
  Eigen::MatrixXd k(x.size(), x2.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x2.size(); ++j) {
      k(i, j) = kernel_eval(spec, std::abs(x[i] - x2[j]));
    }
  }
  return k;
}

std::string_view composite_leaf_name(CompositeLeaf leaf) {
  switch (leaf) {
    case CompositeLeaf::kSe:
      return "se";
    case CompositeLeaf::kMat52:
      return "mat52";
    case CompositeLeaf::kPer12:
      return "per12";
    case CompositeLeaf::kPer24:
      return "per24";
    case CompositeLeaf::kPer168:
      return "per168";
    case CompositeLeaf::kRq:
      return "rq";
    case CompositeLeaf::kWhite:
      return "white";
  }
  return "?";
}

std::optional<CompositeLeaf> parse_composite_leaf(std::string_view name) {
  for (auto leaf : kAllCompositeLeaves) {
    if (composite_leaf_name(leaf) == name) return leaf;
  }
  return std::nullopt;
}

LeafInitialValues default_initial_values(CompositeLeaf leaf) {
  LeafInitialValues v;
  switch (leaf) {
    case CompositeLeaf::kSe:
      v.lengthscale = 168.0;
      break;
    case CompositeLeaf::kMat52:
      v.lengthscale = 24.0;
      break;
    case CompositeLeaf::kPer12:
    case CompositeLeaf::kPer24:
    case CompositeLeaf::kPer168:
      v.lengthscale = 1.0;
      break;
    case CompositeLeaf::kRq:
      v.lengthscale = 12.0;
      v.shape = 1.0;
      break;
    case CompositeLeaf::kWhite:
      v.variance = 0.01;
      break;
  }
  return v;
}

KernelSpec composite_kernel(const CompositeKernelConfig &config) {
  if (config.leaves.empty()) {
    throw ConfigError("kernel ablation removed every composite leaf");
  }
  std::vector<KernelSpec> parts;
  for (auto leaf : kAllCompositeLeaves) {
    bool enabled = false;
    for (auto l : config.leaves) enabled = enabled || l == leaf;
    if (!enabled) continue;
    auto it = config.initial.find(leaf);
    const LeafInitialValues v =
        it != config.initial.end() ? it->second : default_initial_values(leaf);
    const std::string name(composite_leaf_name(leaf));
    switch (leaf) {
      case CompositeLeaf::kSe:
        parts.push_back(KernelSpec::squared_exponential(v.amplitude, v.lengthscale, name));
        break;
      case CompositeLeaf::kMat52:
        parts.push_back(KernelSpec::matern52(v.amplitude, v.lengthscale, name));
        break;
      case CompositeLeaf::kPer12:
        parts.push_back(KernelSpec::periodic(v.amplitude, v.lengthscale, 12.0, name));
        break;
      case CompositeLeaf::kPer24:
        parts.push_back(KernelSpec::periodic(v.amplitude, v.lengthscale, 24.0, name));
        break;
      case CompositeLeaf::kPer168:
        parts.push_back(KernelSpec::periodic(v.amplitude, v.lengthscale, 168.0, name));
        break;
      case CompositeLeaf::kRq:
        parts.push_back(KernelSpec::rational_quadratic(v.amplitude, v.lengthscale, v.shape, name));
        break;
      case CompositeLeaf::kWhite:
        parts.push_back(KernelSpec::white_noise(v.variance, name));
        break;
    }
  }
  if (parts.size() == 1) return parts.front();
  return KernelSpec::sum(std::move(parts));
}

CoregionalSpec::CoregionalSpec(Eigen::MatrixXd w, Eigen::VectorXd kappa)
    : w_(std::move(w)), kappa_(std::move(kappa)) {
  if (w_.rows() < 1 || w_.cols() < 1) {
    throw ConfigError("coregionalization needs at least one task and rank >= 1");
  }
  if (kappa_.size() != w_.rows()) {
    throw ConfigError("coregionalization kappa must have one entry per task");
  }
  if (!w_.allFinite()) throw ConfigError("coregionalization W must be finite");
  for (Eigen::Index d = 0; d < kappa_.size(); ++d) {
    if (!(kappa_(d) >= 0.0) || !std::isfinite(kappa_(d))) {
      throw ConfigError("coregionalization kappa must be nonnegative");
    }
  }
  b_ = w_ * w_.transpose();
  b_.diagonal() += kappa_;
}

CoregionalSpec CoregionalSpec::identity(int num_tasks) {
  return CoregionalSpec(Eigen::MatrixXd::Zero(num_tasks, 1),
                        Eigen::VectorXd::Ones(num_tasks));
}

std::size_t CoregionalSpec::num_hyperparameters() const {
  return static_cast<std::size_t>(w_.size() + kappa_.size());
}

std::vector<double> CoregionalSpec::hyperparameters() const {
  std::vector<double> out;
  out.reserve(num_hyperparameters());
  for (Eigen::Index d = 0; d < w_.rows(); ++d)
    for (Eigen::Index r = 0; r < w_.cols(); ++r) out.push_back(w_(d, r));
  for (Eigen::Index d = 0; d < kappa_.size(); ++d)
    out.push_back(std::log(kappa_(d)));
  return out;
}

std::vector<std::string> CoregionalSpec::hyperparameter_names() const {
  std::vector<std::string> out;
  for (Eigen::Index d = 0; d < w_.rows(); ++d)
    for (Eigen::Index r = 0; r < w_.cols(); ++r)
      out.push_back("coreg.w[" + std::to_string(d) + "," + std::to_string(r) + "]");
  for (Eigen::Index d = 0; d < kappa_.size(); ++d)
    out.push_back("coreg.kappa[" + std::to_string(d) + "]");
  return out;
}

CoregionalSpec CoregionalSpec::with_hyperparameters(
    std::span<const double> values) const {
  if (values.size() != num_hyperparameters()) {
    throw ConfigError("coregional hyperparameter vector has wrong length");
  }
  Eigen::MatrixXd w(w_.rows(), w_.cols());
  std::size_t pos = 0;
  for (Eigen::Index d = 0; d < w.rows(); ++d)
    for (Eigen::Index r = 0; r < w.cols(); ++r) w(d, r) = values[pos++];
  Eigen::VectorXd kappa(kappa_.size());
  for (Eigen::Index d = 0; d < kappa.size(); ++d) kappa(d) = std::exp(values[pos++]);
  return CoregionalSpec(std::move(w), std::move(kappa));
}

Eigen::MatrixXd CoregionalSpec::b_gradient(std::size_t p) const {
  const Eigen::Index tasks = w_.rows();
  const Eigen::Index rank = w_.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(tasks, tasks);
  const auto nw = static_cast<std::size_t>(w_.size());
  if (p < nw) {
    const Eigen::Index d = static_cast<Eigen::Index>(p) / rank;
    const Eigen::Index r = static_cast<Eigen::Index>(p) % rank;
    // d(W W^T)_{ij} / dW_{dr} = delta_{id} W_{jr} + W_{ir} delta_{jd}
    g.row(d) += w_.col(r).transpose();
    g.col(d) += w_.col(r);
  } else {
    const auto d = static_cast<Eigen::Index>(p - nw);
    g(d, d) = kappa_(d);
  }
  return g;
}

Eigen::MatrixXd coregional_gram(const CoregionalSpec &coreg,
                                const KernelSpec &spec,
                                std::span<const TaskInput> a,
                                std::span<const TaskInput> b) {
  if (a.empty() || b.empty()) {
    throw ConfigError("coregional_gram requires nonempty input sets");
  }
  const int tasks = coreg.num_tasks();
  auto check = [tasks](const TaskInput &t) {
    if (t.task < 0 || t.task >= tasks) {
      throw ConfigError("task id " + std::to_string(t.task) + " out of range [0, " +
                        std::to_string(tasks) + ")");
    }
  };
  for (const auto &t : a) check(t);
  for (const auto &t : b) check(t);
  Eigen::MatrixXd k(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      k(i, j) = coreg.b()(a[i].task, b[j].task) *
                kernel_eval(spec, std::abs(a[i].x - b[j].x));
    }
  }
  return k;
}

}  // namespace csgp
