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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "csgp/errors.hpp"
#include "test_support.hpp"

namespace csgp {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(KernelLeaves, MatchClosedForms) {
  const double s = 1.7, l = 3.2;
  for (double r : {0.0, 0.4, 1.0, 2.5, 7.0, 30.0}) {
    EXPECT_NEAR(kernel_eval(KernelSpec::squared_exponential(s, l), r),
                s * s * std::exp(-r * r / (l * l)), 1e-14);
    const double a = std::sqrt(5.0) * r / l;
    EXPECT_NEAR(kernel_eval(KernelSpec::matern52(s, l), r),
                s * s * (1.0 + a + a * a / 3.0) * std::exp(-a), 1e-14);
    const double sn = std::sin(kPi * r / 24.0);
    EXPECT_NEAR(kernel_eval(KernelSpec::periodic(s, l, 24.0), r),
                s * s * std::exp(-2.0 * sn * sn / (l * l)), 1e-14);
    EXPECT_NEAR(kernel_eval(KernelSpec::rational_quadratic(s, l, 0.8), r),
                s * s * std::pow(1.0 + r * r / (2.0 * 0.8 * l * l), -0.8), 1e-14);
  }
}

TEST(KernelLeaves, WhiteNoiseOnlyAtZeroDistance) {
  const KernelSpec w = KernelSpec::white_noise(0.3);
  EXPECT_DOUBLE_EQ(kernel_eval(w, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(kernel_eval(w, 1e-9), 0.0);
}

TEST(KernelLeaves, RejectInvalidHyperparameters) {
  EXPECT_THROW(KernelSpec::squared_exponential(-1.0, 1.0), ConfigError);
  EXPECT_THROW(KernelSpec::matern52(1.0, 0.0), ConfigError);
  EXPECT_THROW(KernelSpec::periodic(1.0, 1.0, -24.0), ConfigError);
  EXPECT_THROW(KernelSpec::rational_quadratic(1.0, 1.0, 0.0), ConfigError);
  EXPECT_THROW(KernelSpec::white_noise(-0.1), ConfigError);
  EXPECT_THROW(kernel_eval(KernelSpec::matern52(1.0, 1.0), -1.0), ConfigError);
  EXPECT_THROW(KernelSpec::sum({KernelSpec::matern52(1.0, 1.0)}), ConfigError);
}

TEST(KernelSum, AddsChildren) {
  const auto a = KernelSpec::squared_exponential(1.1, 5.0);
  const auto b = KernelSpec::periodic(0.7, 1.3, 12.0);
  const auto c = KernelSpec::white_noise(0.05);
  const auto sum = KernelSpec::sum({a, b, c});
  for (double r : {0.0, 0.5, 6.0, 13.0}) {
    EXPECT_NEAR(kernel_eval(sum, r), kernel_eval(a, r) + kernel_eval(b, r) + kernel_eval(c, r), 1e-14);
  }
  EXPECT_EQ(sum.leaves().size(), 3u);
  EXPECT_EQ(sum.num_hyperparameters(), a.num_hyperparameters() + b.num_hyperparameters() + 1);
}

TEST(KernelHyperparameters, LogRoundTrip) {
  std::mt19937_64 rng(1);
  const KernelSpec k = test::random_composite(rng);
  const auto theta = k.log_hyperparameters();
  EXPECT_EQ(theta.size(), k.hyperparameter_names().size());
  const KernelSpec back = k.with_log_hyperparameters(theta);
  for (double r : {0.0, 1.0, 10.0, 100.0}) EXPECT_DOUBLE_EQ(kernel_eval(back, r), kernel_eval(k, r));
  std::vector<double> wrong(theta.size() + 1, 0.0);
  EXPECT_THROW(k.with_log_hyperparameters(wrong), ConfigError);
}

TEST(KernelHyperparameters, PeriodIsNotTrainable) {
  const KernelSpec p = KernelSpec::periodic(1.0, 1.0, 24.0);
  EXPECT_EQ(p.num_hyperparameters(), 2u);
  auto theta = p.log_hyperparameters();
  theta[0] += 0.1;
  EXPECT_DOUBLE_EQ(p.with_log_hyperparameters(theta).period(), 24.0);
}

TEST(KernelGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const KernelSpec k = test::random_composite(rng);
    const auto theta = k.log_hyperparameters();
    for (double r : {0.0, 0.7, 5.0, 40.0, 170.0}) {
      std::vector<double> grad(theta.size());
      const double v = kernel_eval_with_gradient(k, r, grad);
      EXPECT_NEAR(v, kernel_eval(k, r), 1e-13);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        auto up = theta, down = theta;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (kernel_eval(k.with_log_hyperparameters(up), r) -
                           kernel_eval(k.with_log_hyperparameters(down), r)) / 2e-6;
        EXPECT_NEAR(grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << k.hyperparameter_names()[i];
      }
    }
  }
}

TEST(GramMatrix, SymmetricAndPositiveSemidefinite) {
  std::mt19937_64 rng(3);
  const KernelSpec k = test::random_composite(rng);
  const auto x = test::random_inputs(rng, 30, 400.0);
  const Eigen::MatrixXd g = gram_matrix(k, x, x);
  EXPECT_LT((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff();
  EXPECT_GE(min_eig, -1e-10 * g.trace());
  EXPECT_THROW(gram_matrix(k, {}, x), ConfigError);
}

TEST(CompositeKernel, HasEveryLeafByDefault) {
  const KernelSpec k = composite_kernel();
  EXPECT_EQ(k.leaves().size(), kAllCompositeLeaves.size());
  std::vector<double> periods;
  for (const KernelSpec *leaf : k.leaves()) {
    if (leaf->kind() == KernelKind::kPeriodic) periods.push_back(leaf->period());
  }
  EXPECT_EQ(periods, (std::vector<double>{12.0, 24.0, 168.0}));
}

TEST(CompositeKernel, AblationAndLeafNames) {
  CompositeKernelConfig c;
  c.leaves = {CompositeLeaf::kPer24};
  const KernelSpec k = composite_kernel(c);
  EXPECT_EQ(k.kind(), KernelKind::kPeriodic);
  c.leaves.clear();
  EXPECT_THROW(composite_kernel(c), ConfigError);
  for (CompositeLeaf leaf : kAllCompositeLeaves) {
    EXPECT_EQ(parse_composite_leaf(composite_leaf_name(leaf)), leaf);
  }
  EXPECT_FALSE(parse_composite_leaf("cosine").has_value());
}

TEST(Coregional, BIsLowRankPlusDiagonal) {
  Eigen::MatrixXd w(2, 1);
  w << 1.5, -0.5;
  Eigen::VectorXd kappa(2);
  kappa << 0.2, 0.3;
  const CoregionalSpec c(w, kappa);
  Eigen::Matrix2d expected;
  expected << 2.25 + 0.2, -0.75, -0.75, 0.25 + 0.3;
  EXPECT_LT((c.b() - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(CoregionalSpec::identity(3).b().isIdentity());
  EXPECT_THROW(CoregionalSpec(w, Eigen::VectorXd::Constant(2, -1.0)), ConfigError);
  EXPECT_THROW(CoregionalSpec(w, Eigen::VectorXd::Ones(3)), ConfigError);
}

TEST(Coregional, BGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const CoregionalSpec c = test::random_coreg(rng, 2, 2);
  const auto theta = c.hyperparameters();
  for (std::size_t q = 0; q < theta.size(); ++q) {
    auto up = theta, down = theta;
    up[q] += 1e-6;
    down[q] -= 1e-6;
    const Eigen::MatrixXd fd =
        (c.with_hyperparameters(up).b() - c.with_hyperparameters(down).b()) / 2e-6;
    EXPECT_LT((c.b_gradient(q) - fd).cwiseAbs().maxCoeff(), 1e-7) << c.hyperparameter_names()[q];
  }
}

TEST(Coregional, GramIsKroneckerOnSharedInputs) {
  std::mt19937_64 rng(9);
  const KernelSpec k = test::random_composite(rng, false);
  const CoregionalSpec c = test::random_coreg(rng);
  const auto x = test::random_inputs(rng, 12, 100.0);
  std::vector<TaskInput> in;
  for (int d = 0; d < 2; ++d) {
    for (double v : x) in.push_back({d, v});
  }
  const Eigen::MatrixXd kx = gram_matrix(k, x, x);
  const Eigen::MatrixXd g = coregional_gram(c, k, in, in);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      EXPECT_LT((g.block(12 * a, 12 * b, 12, 12) - c.b()(a, b) * kx).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
  std::vector<TaskInput> bad{{2, 0.0}};
  EXPECT_THROW(coregional_gram(c, k, bad, in), ConfigError);
}

}  // namespace
}  // namespace csgp
