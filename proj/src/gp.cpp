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

#include "csgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <ceres/ceres.h>

#include "csgp/errors.hpp"

namespace csgp {

namespace {

constexpr int kJitterRetries = 3;

// Points of a block split into task ids and indices into the sorted distinct
// input values.  Kernel values are computed once per distinct distance.
struct PointIndex {
  std::vector<int> task;
  std::vector<double> x;
  std::vector<int> ux;
  std::vector<double> unique;

  std::size_t size() const { return task.size(); }
};

PointIndex index_points(std::span<const TaskInput> points) {
  PointIndex p;
  p.task.reserve(points.size());
  p.x.reserve(points.size());
  for (const auto &pt : points) {
    if (!std::isfinite(pt.x)) throw ConfigError("GP input must be finite");
    p.task.push_back(pt.task);
    p.x.push_back(pt.x);
  }
  p.unique = p.x;
  std::sort(p.unique.begin(), p.unique.end());
  p.unique.erase(std::unique(p.unique.begin(), p.unique.end()), p.unique.end());
  p.ux.reserve(points.size());
  for (double v : p.x) {
    p.ux.push_back(static_cast<int>(
        std::lower_bound(p.unique.begin(), p.unique.end(), v) - p.unique.begin()));
  }
  return p;
}

// Index pairs (i, j) with a[i] == b[j], where the nugget applies.
using IdentityPairs = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

IdentityPairs identity_pairs(const PointIndex &a, const PointIndex &b) {
  std::map<std::pair<int, double>, std::vector<Eigen::Index>> where;
  for (std::size_t j = 0; j < b.size(); ++j) {
    where[{b.task[j], b.x[j]}].push_back(static_cast<Eigen::Index>(j));
  }
  IdentityPairs out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto it = where.find({a.task[i], a.x[i]});
    if (it == where.end()) continue;
    for (Eigen::Index j : it->second) out.emplace_back(static_cast<Eigen::Index>(i), j);
  }
  return out;
}

struct DistanceTable {
  std::vector<double> r;
  Eigen::MatrixXi bin;  // |a.unique| x |b.unique|
  IdentityPairs same;
};

DistanceTable make_table(const PointIndex &a, const PointIndex &b) {
  DistanceTable t;
  const auto na = static_cast<Eigen::Index>(a.unique.size());
  const auto nb = static_cast<Eigen::Index>(b.unique.size());
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(na * nb));
  for (Eigen::Index j = 0; j < nb; ++j)
    for (Eigen::Index i = 0; i < na; ++i)
      all.push_back(std::abs(a.unique[i] - b.unique[j]));
  t.r = all;
  std::sort(t.r.begin(), t.r.end());
  t.r.erase(std::unique(t.r.begin(), t.r.end()), t.r.end());
  t.bin.resize(na, nb);
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < nb; ++j)
    for (Eigen::Index i = 0; i < na; ++i)
      t.bin(i, j) = static_cast<int>(
          std::lower_bound(t.r.begin(), t.r.end(), all[k++]) - t.r.begin());
  t.same = identity_pairs(a, b);
  return t;
}

// Kernel values (and optionally log-space gradients, one row per distinct
// distance) on a distance table.
struct KernelValues {
  std::vector<double> k;
  Eigen::MatrixXd grad;
};

KernelValues eval_table(const KernelSpec &spec, const DistanceTable &t,
                        bool with_gradient) {
  KernelValues v;
  v.k.resize(t.r.size());
  const auto np = static_cast<Eigen::Index>(spec.num_hyperparameters());
  if (with_gradient) {
    v.grad.resize(static_cast<Eigen::Index>(t.r.size()), np);
    std::vector<double> g(static_cast<std::size_t>(np));
    for (std::size_t i = 0; i < t.r.size(); ++i) {
      v.k[i] = kernel_eval_with_gradient(spec, t.r[i], g);
      for (Eigen::Index p = 0; p < np; ++p) v.grad(static_cast<Eigen::Index>(i), p) = g[p];
    }
  } else {
    for (std::size_t i = 0; i < t.r.size(); ++i) v.k[i] = kernel_eval(spec, t.r[i]);
  }
  return v;
}

Eigen::MatrixXd assemble(const DistanceTable &t, const std::vector<double> &k,
                         const PointIndex &a, const PointIndex &b,
                         const Eigen::MatrixXd &coreg_b, double jitter) {
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd out(na, nb);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const int tb = b.task[j];
    const auto col = t.bin.col(b.ux[j]);
    for (Eigen::Index i = 0; i < na; ++i) {
      out(i, j) = coreg_b(a.task[i], tb) * k[col(a.ux[i])];
    }
  }
  for (const auto &[i, j] : t.same) out(i, j) += jitter;
  return out;
}

// Contraction of a weight matrix G with the derivative of one covariance
// block, split by what the derivative flows through.
struct Pairing {
  std::vector<double> by_distance;
  Eigen::MatrixXd by_task;
  double identity = 0.0;
};

void accumulate(Pairing &out, const Eigen::MatrixXd &g, const DistanceTable &t,
                const std::vector<double> &k, const PointIndex &a,
                const PointIndex &b, const Eigen::MatrixXd &coreg_b) {
  if (out.by_distance.size() != t.r.size()) out.by_distance.assign(t.r.size(), 0.0);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    const int tb = b.task[j];
    const auto col = t.bin.col(b.ux[j]);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double w = g(i, j);
      const int ta = a.task[i];
      const int bin = col(a.ux[i]);
      out.by_distance[bin] += w * coreg_b(ta, tb);
      out.by_task(ta, tb) += w * k[bin];
    }
  }
  for (const auto &[i, j] : t.same) out.identity += g(i, j);
}

Eigen::MatrixXd task_mask(const PointIndex &f, int tasks) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(tasks, 1);
  for (int t : f.task) counts(t, 0) += 1.0;
  return counts;
}

// Nugget level and its derivative with respect to every model parameter
// (kernel, then coregional; noise does not enter).
struct Jitter {
  double value = 0.0;
  std::vector<double> gradient;
};

Jitter compute_jitter(const KernelSpec &kernel, const CoregionalSpec &coreg,
                      const PointIndex &train, double relative,
                      bool with_gradient) {
  const int tasks = coreg.num_tasks();
  const Eigen::MatrixXd counts = task_mask(train, tasks);
  const double n = static_cast<double>(train.size());
  double mean_b = 0.0;
  for (int d = 0; d < tasks; ++d) mean_b += counts(d, 0) * coreg.b()(d, d);
  mean_b /= n;
  Jitter j;
  const std::size_t nk = kernel.num_hyperparameters();
  std::vector<double> dk0(nk);
  const double k0 = kernel_eval_with_gradient(kernel, 0.0, dk0);
  j.value = relative * k0 * mean_b;
  if (with_gradient) {
    j.gradient.reserve(nk + coreg.num_hyperparameters());
    for (double g : dk0) j.gradient.push_back(relative * mean_b * g);
    for (std::size_t q = 0; q < coreg.num_hyperparameters(); ++q) {
      const Eigen::MatrixXd db = coreg.b_gradient(q);
      double s = 0.0;
      for (int d = 0; d < tasks; ++d) s += counts(d, 0) * db(d, d);
      j.gradient.push_back(relative * k0 * s / n);
    }
  }
  return j;
}

// Per-point noise variances.
Eigen::VectorXd noise_vector(const PointIndex &f, const std::vector<double> &noise) {
  Eigen::VectorXd lam(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) lam(static_cast<Eigen::Index>(i)) = noise[f.task[i]];
  return lam;
}

PointIndex inducing_points(const std::vector<double> &z, int tasks) {
  std::vector<TaskInput> pts;
  pts.reserve(z.size() * static_cast<std::size_t>(tasks));
  for (int d = 0; d < tasks; ++d)
    for (double v : z) pts.push_back({d, v});
  return index_points(pts);
}

struct Pieces {
  KernelSpec kernel;
  CoregionalSpec coreg;
  std::vector<double> noise;
};

Pieces split_parameters(const GpModel &model, std::span<const double> values) {
  const std::size_t nk = model.kernel().num_hyperparameters();
  const std::size_t nc = model.coreg().num_hyperparameters();
  const std::size_t nn = model.noise_variance().size();
  if (values.size() != nk + nc + nn) {
    throw ConfigError("parameter vector has wrong length");
  }
  Pieces p{model.kernel().with_log_hyperparameters(values.subspan(0, nk)),
           model.coreg().with_hyperparameters(values.subspan(nk, nc)), {}};
  for (std::size_t t = 0; t < nn; ++t) {
    const double v = std::exp(values[nk + nc + t]);
    if (!std::isfinite(v)) throw NumericalError("noise variance overflow");
    p.noise.push_back(v);
  }
  return p;
}

// Precomputed index structures for repeated likelihood evaluations on a fixed
// training set (and inducing grid).
class Workspace {
 public:
  explicit Workspace(const GpModel &model)
      : f_(index_points(model.training().inputs)),
        y_(model.centered_targets()),
        tasks_(model.num_tasks()),
        relative_jitter_(model.options().relative_jitter) {
    if (model.inducing()) {
      sparse_ = true;
      u_ = inducing_points(*model.inducing(), tasks_);
      uf_ = make_table(u_, f_);
      uu_ = make_table(u_, u_);
    } else {
      ff_ = make_table(f_, f_);
    }
  }

  LogLikelihood evaluate(const Pieces &p, bool with_gradient) const {
    double rel = relative_jitter_;
    for (int attempt = 0; attempt <= kJitterRetries; ++attempt, rel *= 10.0) {
      LogLikelihood out;
      const bool ok = sparse_ ? evaluate_dtc(p, rel, with_gradient, out)
                              : evaluate_exact(p, rel, with_gradient, out);
      if (ok) return out;
    }
    throw NumericalError("covariance factorization failed after jitter escalation");
  }

 private:
  std::vector<double> collect(const Pieces &p, const Jitter &jit,
                              const std::vector<std::pair<const Pairing *, const KernelValues *>> &blocks,
                              const Eigen::VectorXd &noise_grad) const {
    const std::size_t nk = p.kernel.num_hyperparameters();
    const std::size_t nc = p.coreg.num_hyperparameters();
    std::vector<double> g(nk + nc + p.noise.size(), 0.0);
    double identity = 0.0;
    for (const auto &[pair, kv] : blocks) {
      identity += pair->identity;
      for (std::size_t r = 0; r < pair->by_distance.size(); ++r) {
        const double w = pair->by_distance[r];
        if (w == 0.0) continue;
        for (std::size_t q = 0; q < nk; ++q)
          g[q] += w * kv->grad(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q));
      }
      for (std::size_t q = 0; q < nc; ++q)
        g[nk + q] += (pair->by_task.array() * p.coreg.b_gradient(q).array()).sum();
    }
    for (std::size_t q = 0; q < nk + nc; ++q) g[q] += identity * jit.gradient[q];
    for (std::size_t t = 0; t < p.noise.size(); ++t) g[nk + nc + t] = noise_grad(static_cast<Eigen::Index>(t));
    return g;
  }

  bool evaluate_exact(const Pieces &p, double rel, bool with_gradient,
                      LogLikelihood &out) const {
    const Jitter jit = compute_jitter(p.kernel, p.coreg, f_, rel, with_gradient);
    const KernelValues kv = eval_table(p.kernel, ff_, with_gradient);
    Eigen::MatrixXd c = assemble(ff_, kv.k, f_, f_, p.coreg.b(), jit.value);
    const Eigen::VectorXd lam = noise_vector(f_, p.noise);
    c.diagonal() += lam;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd alpha = llt.solve(y_);
    const double n = static_cast<double>(y_.size());
    const Eigen::MatrixXd l = llt.matrixL();
    out.value = -0.5 * y_.dot(alpha) - l.diagonal().array().log().sum() -
                0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(out.value)) return false;
    if (!with_gradient) return true;

    Eigen::MatrixXd m = alpha * alpha.transpose() -
                        llt.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
    Pairing pair{{}, Eigen::MatrixXd::Zero(tasks_, tasks_), 0.0};
    accumulate(pair, 0.5 * m, ff_, kv.k, f_, f_, p.coreg.b());
    Eigen::VectorXd noise_grad = Eigen::VectorXd::Zero(tasks_);
    for (std::size_t i = 0; i < f_.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      noise_grad(f_.task[i]) += 0.5 * lam(ii) * m(ii, ii);
    }
    out.gradient = collect(p, jit, {{&pair, &kv}}, noise_grad);
    return true;
  }

  bool evaluate_dtc(const Pieces &p, double rel, bool with_gradient,
                    LogLikelihood &out) const {
    const Jitter jit = compute_jitter(p.kernel, p.coreg, f_, rel, with_gradient);
    const KernelValues kv_uu = eval_table(p.kernel, uu_, with_gradient);
    const KernelValues kv_uf = eval_table(p.kernel, uf_, with_gradient);
    const Eigen::MatrixXd kuu = assemble(uu_, kv_uu.k, u_, u_, p.coreg.b(), jit.value);
    const Eigen::MatrixXd kuf = assemble(uf_, kv_uf.k, u_, f_, p.coreg.b(), jit.value);
    Eigen::LLT<Eigen::MatrixXd> luu_llt(kuu);
    if (luu_llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd luu = luu_llt.matrixL();
    const Eigen::VectorXd lam = noise_vector(f_, p.noise);
    if ((lam.array() <= 0.0).any()) {
      throw ConfigError("DTC requires strictly positive noise variances");
    }
    const Eigen::Index m = kuu.rows();
    const Eigen::MatrixXd v = luu.triangularView<Eigen::Lower>().solve(kuf);
    const Eigen::MatrixXd vl = v * lam.cwiseInverse().asDiagonal();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    a.selfadjointView<Eigen::Lower>().rankUpdate(vl * lam.cwiseSqrt().asDiagonal());
    a = a.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Eigen::MatrixXd> la(a);
    if (la.info() != Eigen::Success) return false;
    const Eigen::MatrixXd la_l = la.matrixL();

    const Eigen::VectorXd b = vl * y_;
    const Eigen::VectorXd ainv_b = la.solve(b);
    const Eigen::VectorXd c = la_l.triangularView<Eigen::Lower>().solve(b);
    const double n = static_cast<double>(y_.size());
    const double quad = y_.dot(y_.cwiseQuotient(lam)) - c.squaredNorm();
    const double logdet = lam.array().log().sum() + 2.0 * la_l.diagonal().array().log().sum();
    out.value = -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(out.value)) return false;
    if (!with_gradient) return true;

    const Eigen::VectorXd alpha = (y_ - v.transpose() * ainv_b).cwiseQuotient(lam);
    const auto luu_t = luu.transpose().triangularView<Eigen::Upper>();
    const Eigen::VectorXd p_alpha = luu_t.solve(v * alpha);
    const Eigen::MatrixXd ainv = la.solve(Eigen::MatrixXd::Identity(m, m));
    // P M = (P alpha) alpha^T - Luu^-T A^-1 V S^-1, P = Kuu^-1 Kuf.
    const Eigen::MatrixXd r = luu_t.solve(ainv);
    const Eigen::MatrixXd pcinv = r * vl;
    const Eigen::MatrixXd pm = p_alpha * alpha.transpose() - pcinv;

    const Eigen::MatrixXd y1 = luu_t.solve(Eigen::MatrixXd::Identity(m, m) - ainv);
    const Eigen::MatrixXd x = luu_t.solve(y1.transpose()).transpose();
    const Eigen::MatrixXd guu = -0.5 * (p_alpha * p_alpha.transpose() - x);

    Pairing pair_uf{{}, Eigen::MatrixXd::Zero(tasks_, tasks_), 0.0};
    accumulate(pair_uf, pm, uf_, kv_uf.k, u_, f_, p.coreg.b());
    Pairing pair_uu{{}, Eigen::MatrixXd::Zero(tasks_, tasks_), 0.0};
    accumulate(pair_uu, guu, uu_, kv_uu.k, u_, u_, p.coreg.b());

    Eigen::VectorXd noise_grad = Eigen::VectorXd::Zero(tasks_);
    for (std::size_t i = 0; i < f_.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double cinv_ii = (1.0 - kuf.col(ii).dot(pcinv.col(ii))) / lam(ii);
      const double m_ii = alpha(ii) * alpha(ii) - cinv_ii;
      noise_grad(f_.task[i]) += 0.5 * lam(ii) * m_ii;
    }
    out.gradient = collect(p, jit, {{&pair_uf, &kv_uf}, {&pair_uu, &kv_uu}}, noise_grad);
    return true;
  }

  PointIndex f_;
  PointIndex u_;
  DistanceTable ff_, uf_, uu_;
  Eigen::VectorXd y_;
  int tasks_ = 1;
  double relative_jitter_ = 1e-6;
  bool sparse_ = false;
};

// Posterior expressed as mean plus low-rank corrections to the prior:
//   cov = K_TT - minus^T minus + plus^T plus
struct PosteriorFactors {
  PointIndex test;
  Eigen::VectorXd mean;
  Eigen::MatrixXd minus;
  Eigen::MatrixXd plus;
  double jitter = 0.0;
  double k0 = 0.0;
  bool has_plus = false;
};

PosteriorFactors factors_exact(const GpModel &model, const PointIndex &test) {
  const PointIndex f = index_points(model.training().inputs);
  const DistanceTable ff = make_table(f, f);
  const DistanceTable tf = make_table(test, f);
  const KernelValues kv_ff = eval_table(model.kernel(), ff, false);
  const KernelValues kv_tf = eval_table(model.kernel(), tf, false);
  const Eigen::VectorXd lam = noise_vector(f, model.noise_variance());
  double rel = model.options().relative_jitter;
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt, rel *= 10.0) {
    const Jitter jit = compute_jitter(model.kernel(), model.coreg(), f, rel, false);
    Eigen::MatrixXd c = assemble(ff, kv_ff.k, f, f, model.coreg().b(), jit.value);
    c.diagonal() += lam;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd ktf = assemble(tf, kv_tf.k, test, f, model.coreg().b(), jit.value);
    PosteriorFactors out;
    out.test = test;
    out.jitter = jit.value;
    out.k0 = kernel_eval(model.kernel(), 0.0);
    out.mean = ktf * llt.solve(model.centered_targets());
    out.minus = llt.matrixL().solve(ktf.transpose());
    return out;
  }
  throw NumericalError("exact GP factorization failed after jitter escalation");
}

PosteriorFactors factors_dtc(const GpModel &model, const PointIndex &test) {
  const int tasks = model.num_tasks();
  const PointIndex f = index_points(model.training().inputs);
  const PointIndex u = inducing_points(*model.inducing(), tasks);
  const DistanceTable uu = make_table(u, u);
  const DistanceTable uf = make_table(u, f);
  const DistanceTable ut = make_table(u, test);
  const KernelValues kv_uu = eval_table(model.kernel(), uu, false);
  const KernelValues kv_uf = eval_table(model.kernel(), uf, false);
  const KernelValues kv_ut = eval_table(model.kernel(), ut, false);
  const Eigen::VectorXd lam = noise_vector(f, model.noise_variance());
  if ((lam.array() <= 0.0).any()) {
    throw ConfigError("DTC requires strictly positive noise variances");
  }
  double rel = model.options().relative_jitter;
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt, rel *= 10.0) {
    const Jitter jit = compute_jitter(model.kernel(), model.coreg(), f, rel, false);
    const Eigen::MatrixXd kuu = assemble(uu, kv_uu.k, u, u, model.coreg().b(), jit.value);
    Eigen::LLT<Eigen::MatrixXd> luu_llt(kuu);
    if (luu_llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd luu = luu_llt.matrixL();
    const Eigen::MatrixXd kuf = assemble(uf, kv_uf.k, u, f, model.coreg().b(), jit.value);
    const Eigen::MatrixXd kut = assemble(ut, kv_ut.k, u, test, model.coreg().b(), jit.value);
    const Eigen::MatrixXd v = luu.triangularView<Eigen::Lower>().solve(kuf);
    const Eigen::MatrixXd vl = v * lam.cwiseInverse().asDiagonal();
    const Eigen::Index m = kuu.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    a.selfadjointView<Eigen::Lower>().rankUpdate(vl * lam.cwiseSqrt().asDiagonal());
    a = a.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Eigen::MatrixXd> la(a);
    if (la.info() != Eigen::Success) continue;
    PosteriorFactors out;
    out.test = test;
    out.jitter = jit.value;
    out.k0 = kernel_eval(model.kernel(), 0.0);
    out.minus = luu.triangularView<Eigen::Lower>().solve(kut);
    const Eigen::VectorXd beta = la.solve(vl * model.centered_targets());
    out.mean = out.minus.transpose() * beta;
    out.plus = la.matrixL().solve(out.minus);
    out.has_plus = true;
    return out;
  }
  throw NumericalError("DTC factorization failed after jitter escalation");
}

double clamp_variance(double v, double prior) {
  if (v >= 0.0) return v;
  const double tol = 1e-8 * std::max(1.0, prior);
  if (v >= -tol) return 0.0;
  throw NumericalError("posterior variance is negative beyond tolerance: " +
                       std::to_string(v));
}

PosteriorPrediction finish(const GpModel &model, std::span<const TaskInput> test,
                           PosteriorFactors &&pf, CovarianceMode mode) {
  PosteriorPrediction out;
  out.inputs.assign(test.begin(), test.end());
  const auto nt = static_cast<Eigen::Index>(test.size());
  out.mean = pf.mean;
  for (Eigen::Index i = 0; i < nt; ++i) out.mean(i) += model.task_means()[pf.test.task[i]];
  out.variance.resize(nt);
  if (mode == CovarianceMode::kFull) {
    Eigen::MatrixXd cov = prior_covariance(model, test);
    cov.noalias() -= pf.minus.transpose() * pf.minus;
    if (pf.has_plus) cov.noalias() += pf.plus.transpose() * pf.plus;
    cov = 0.5 * (cov + cov.transpose()).eval();
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double prior = model.coreg().b()(pf.test.task[i], pf.test.task[i]) * pf.k0 + pf.jitter;
      cov(i, i) = clamp_variance(cov(i, i), prior);
      out.variance(i) = cov(i, i);
    }
    out.covariance = std::move(cov);
  } else {
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double prior = model.coreg().b()(pf.test.task[i], pf.test.task[i]) * pf.k0 + pf.jitter;
      double v = prior - pf.minus.col(i).squaredNorm();
      if (pf.has_plus) v += pf.plus.col(i).squaredNorm();
      out.variance(i) = clamp_variance(v, prior);
    }
  }
  return out;
}

void check_test_tasks(const GpModel &model, std::span<const TaskInput> test) {
  if (test.empty()) throw ConfigError("posterior requires at least one test input");
  for (const auto &t : test) {
    if (t.task < 0 || t.task >= model.num_tasks()) {
      throw ConfigError("test task id out of range");
    }
  }
}

double log_uniform(std::mt19937_64 &rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return u(rng);
}

// Random initial parameter vector for one restart (see FitOptions).
std::vector<double> random_start(const GpModel &model, std::mt19937_64 &rng) {
  std::vector<double> out;
  const auto &train = model.training();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto &in : train.inputs) {
    lo = std::min(lo, in.x);
    hi = std::max(hi, in.x);
  }
  const double span_scale = hi > lo ? (hi - lo) / 10.0 : 1.0;
  for (const KernelSpec *leaf : model.kernel().leaves()) {
    switch (leaf->kind()) {
      case KernelKind::kWhiteNoise:
        out.push_back(std::log(0.1) + log_uniform(rng, 1e-2, 1e1));
        break;
      case KernelKind::kPeriodic:
        out.push_back(log_uniform(rng, 1e-2, 1e1));
        out.push_back(log_uniform(rng, 1e-2, 1e1));
        break;
      default:
        out.push_back(log_uniform(rng, 1e-2, 1e1));
        out.push_back(std::log(span_scale) + log_uniform(rng, 1e-2, 1e1));
        if (leaf->kind() == KernelKind::kRationalQuadratic) {
          out.push_back(log_uniform(rng, 0.1, 10.0));
        }
    }
  }
  const int tasks = model.num_tasks();
  std::vector<double> var(static_cast<std::size_t>(tasks), 0.0);
  std::vector<double> cnt(static_cast<std::size_t>(tasks), 0.0);
  const auto &y = model.centered_targets();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int t = train.inputs[i].task;
    var[t] += y(static_cast<Eigen::Index>(i)) * y(static_cast<Eigen::Index>(i));
    cnt[t] += 1.0;
  }
  for (int t = 0; t < tasks; ++t) {
    var[t] = cnt[t] > 0 && var[t] > 0 ? var[t] / cnt[t] : 1.0;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const int rank = model.coreg().rank();
  for (int d = 0; d < tasks; ++d)
    for (int r = 0; r < rank; ++r) out.push_back(0.5 * normal(rng) * std::sqrt(var[d]));
  for (int d = 0; d < tasks; ++d) out.push_back(std::log(0.1 * var[d]));
  for (int d = 0; d < tasks; ++d) out.push_back(std::log(0.1 * var[d]));
  return out;
}

class NegativeLml : public ceres::FirstOrderFunction {
 public:
  NegativeLml(const GpModel &model, const Workspace &ws) : model_(model), ws_(ws) {}

  bool Evaluate(const double *parameters, double *cost,
                double *gradient) const override {
    try {
      const std::span<const double> values(parameters, model_.num_parameters());
      for (double v : values) {
        if (!std::isfinite(v) || std::abs(v) > 700.0) return false;
      }
      const Pieces p = split_parameters(model_, values);
      const LogLikelihood ll = ws_.evaluate(p, gradient != nullptr);
      if (!std::isfinite(ll.value)) return false;
      cost[0] = -ll.value;
      if (gradient) {
        for (std::size_t i = 0; i < ll.gradient.size(); ++i) {
          if (!std::isfinite(ll.gradient[i])) return false;
          gradient[i] = -ll.gradient[i];
        }
      }
      return true;
    } catch (const Error &) {
      return false;
    }
  }

  int NumParameters() const override {
    return static_cast<int>(model_.num_parameters());
  }

 private:
  const GpModel &model_;
  const Workspace &ws_;
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrainingSet TrainingSet::from_hourly(std::span<const double> hours,
                                     std::span<const double> price,
                                     std::span<const double> load) {
  if (hours.size() != price.size() || hours.size() != load.size()) {
    throw ConfigError("hourly training columns must have equal length");
  }
  TrainingSet t;
  t.num_tasks = 2;
  t.inputs.reserve(2 * hours.size());
  t.targets.reserve(2 * hours.size());
  for (std::size_t i = 0; i < hours.size(); ++i) {
    t.inputs.push_back({kPriceTask, hours[i]});
    t.targets.push_back(price[i]);
  }
  for (std::size_t i = 0; i < hours.size(); ++i) {
    t.inputs.push_back({kLoadTask, hours[i]});
    t.targets.push_back(load[i]);
  }
  t.validate();
  return t;
}

std::size_t TrainingSet::task_count(int task) const {
  return static_cast<std::size_t>(std::count_if(
      inputs.begin(), inputs.end(), [task](const TaskInput &in) { return in.task == task; }));
}

std::vector<double> TrainingSet::task_inputs(int task) const {
  std::vector<double> out;
  for (const auto &in : inputs)
    if (in.task == task) out.push_back(in.x);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void TrainingSet::validate() const {
  if (inputs.empty()) throw ConfigError("training set is empty");
  if (inputs.size() != targets.size()) {
    throw ConfigError("training inputs and targets differ in length");
  }
  if (num_tasks < 1) throw ConfigError("training set needs at least one task");
  std::vector<double> last(static_cast<std::size_t>(num_tasks),
                           -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto &in = inputs[i];
    if (in.task < 0 || in.task >= num_tasks) {
      throw ConfigError("training task id out of range");
    }
    if (!std::isfinite(in.x) || !std::isfinite(targets[i])) {
      throw ConfigError("training inputs and targets must be finite");
    }
    if (!(in.x > last[in.task])) {
      throw ConfigError("training inputs must be strictly increasing per task");
    }
    last[in.task] = in.x;
  }
}

GpModel::GpModel(KernelSpec kernel, CoregionalSpec coreg,
                 std::vector<double> noise_variance, TrainingSet train,
                 GpOptions options)
    : kernel_(std::move(kernel)),
      coreg_(std::move(coreg)),
      noise_(std::move(noise_variance)),
      train_(std::move(train)),
      options_(options) {
  train_.validate();
  if (train_.num_tasks != coreg_.num_tasks()) {
    throw ConfigError("training set and coregionalization disagree on task count");
  }
  if (noise_.size() != static_cast<std::size_t>(coreg_.num_tasks())) {
    throw ConfigError("need one noise variance per task");
  }
  for (double v : noise_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("noise variances must be nonnegative and finite");
    }
  }
  if (!(options_.relative_jitter >= 0.0)) throw ConfigError("jitter must be nonnegative");
  const int tasks = coreg_.num_tasks();
  task_means_.assign(static_cast<std::size_t>(tasks), 0.0);
  if (options_.center_targets) {
    std::vector<double> cnt(static_cast<std::size_t>(tasks), 0.0);
    for (std::size_t i = 0; i < train_.size(); ++i) {
      task_means_[train_.inputs[i].task] += train_.targets[i];
      cnt[train_.inputs[i].task] += 1.0;
    }
    for (int t = 0; t < tasks; ++t) {
      if (cnt[t] > 0) task_means_[t] /= cnt[t];
    }
  }
  centered_.resize(static_cast<Eigen::Index>(train_.size()));
  for (std::size_t i = 0; i < train_.size(); ++i) {
    centered_(static_cast<Eigen::Index>(i)) = train_.targets[i] - task_means_[train_.inputs[i].task];
  }
}

std::size_t GpModel::num_parameters() const {
  return kernel_.num_hyperparameters() + coreg_.num_hyperparameters() + noise_.size();
}

std::vector<double> GpModel::parameters() const {
  std::vector<double> out = kernel_.log_hyperparameters();
  const auto c = coreg_.hyperparameters();
  out.insert(out.end(), c.begin(), c.end());
  for (double v : noise_) out.push_back(std::log(v));
  return out;
}

std::vector<std::string> GpModel::parameter_names() const {
  std::vector<std::string> out = kernel_.hyperparameter_names();
  const auto c = coreg_.hyperparameter_names();
  out.insert(out.end(), c.begin(), c.end());
  for (std::size_t t = 0; t < noise_.size(); ++t) {
    out.push_back("noise[" + std::to_string(t) + "]");
  }
  return out;
}

GpModel GpModel::with_parameters(std::span<const double> values) const {
  Pieces p = split_parameters(*this, values);
  GpModel out = *this;
  out.kernel_ = std::move(p.kernel);
  out.coreg_ = std::move(p.coreg);
  out.noise_ = std::move(p.noise);
  out.fit_.reset();
  return out;
}

GpModel GpModel::with_inducing(std::vector<double> z) const {
  if (z.empty()) throw ConfigError("inducing set must not be empty");
  for (double v : z) {
    if (!std::isfinite(v)) throw ConfigError("inducing inputs must be finite");
  }
  std::sort(z.begin(), z.end());
  if (std::adjacent_find(z.begin(), z.end()) != z.end()) {
    throw ConfigError("inducing inputs must be distinct");
  }
  for (int t = 0; t < num_tasks(); ++t) {
    if (z.size() > train_.task_count(t)) {
      throw ConfigError("more inducing inputs (" + std::to_string(z.size()) +
                        ") than training inputs per task (" +
                        std::to_string(train_.task_count(t)) + ")");
    }
  }
  GpModel out = *this;
  out.inducing_ = std::move(z);
  out.fit_.reset();
  return out;
}

GpModel GpModel::with_fit(FitDiagnostics diagnostics) const {
  GpModel out = *this;
  out.fit_ = std::move(diagnostics);
  return out;
}

std::string GpModel::dump() const {
  std::ostringstream os;
  char buf[64];
  auto put = [&](const std::string &name, double value) {
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    os << name << '=' << buf << '\n';
  };
  for (const KernelSpec *leaf : kernel_.leaves()) {
    const std::string &l = leaf->label();
    if (leaf->kind() == KernelKind::kWhiteNoise) {
      put(l + ".variance", leaf->noise_variance());
      continue;
    }
    put(l + ".amplitude", leaf->amplitude());
    put(l + ".lengthscale", leaf->lengthscale());
    if (leaf->kind() == KernelKind::kPeriodic) put(l + ".period", leaf->period());
    if (leaf->kind() == KernelKind::kRationalQuadratic) put(l + ".shape", leaf->shape());
  }
  for (Eigen::Index d = 0; d < coreg_.w().rows(); ++d)
    for (Eigen::Index r = 0; r < coreg_.w().cols(); ++r)
      put("coreg.w[" + std::to_string(d) + "," + std::to_string(r) + "]", coreg_.w()(d, r));
  for (Eigen::Index d = 0; d < coreg_.kappa().size(); ++d)
    put("coreg.kappa[" + std::to_string(d) + "]", coreg_.kappa()(d));
  for (std::size_t t = 0; t < noise_.size(); ++t) put("noise[" + std::to_string(t) + "]", noise_[t]);
  put("inducing_points", inducing_ ? static_cast<double>(inducing_->size()) : 0.0);
  if (fit_) {
    put("restarts", fit_->restarts);
    put("log_marginal_likelihood", fit_->log_marginal_likelihood);
  }
  return os.str();
}

Eigen::MatrixXd prior_covariance(const GpModel &model,
                                 std::span<const TaskInput> test) {
  check_test_tasks(model, test);
  const PointIndex f = index_points(model.training().inputs);
  const PointIndex t = index_points(test);
  const DistanceTable tt = make_table(t, t);
  const KernelValues kv = eval_table(model.kernel(), tt, false);
  const Jitter jit = compute_jitter(model.kernel(), model.coreg(), f,
                                    model.options().relative_jitter, false);
  return assemble(tt, kv.k, t, t, model.coreg().b(), jit.value);
}

PosteriorPrediction exact_posterior(const GpModel &model,
                                    std::span<const TaskInput> test,
                                    CovarianceMode mode) {
  check_test_tasks(model, test);
  PointIndex t = index_points(test);
  return finish(model, test, factors_exact(model, t), mode);
}

PosteriorPrediction dtc_posterior(const GpModel &model,
                                  std::span<const TaskInput> test,
                                  CovarianceMode mode) {
  check_test_tasks(model, test);
  if (!model.inducing()) throw ConfigError("dtc_posterior requires inducing inputs");
  PointIndex t = index_points(test);
  return finish(model, test, factors_dtc(model, t), mode);
}

PosteriorPrediction posterior(const GpModel &model,
                              std::span<const TaskInput> test,
                              CovarianceMode mode) {
  return model.inducing() ? dtc_posterior(model, test, mode)
                          : exact_posterior(model, test, mode);
}

LogLikelihood log_marginal_likelihood(const GpModel &model, bool with_gradient) {
  const Workspace ws(model);
  const Pieces p{model.kernel(), model.coreg(), model.noise_variance()};
  return ws.evaluate(p, with_gradient);
}

std::vector<double> select_inducing(const TrainingSet &train, double sparsity) {
  if (!(sparsity > 0.0) || sparsity > 1.0) {
    throw ConfigError("sparsity must lie in (0, 1]");
  }
  const std::vector<double> grid = train.task_inputs(0);
  const auto n = grid.size();
  const auto m = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n)));
  if (m == 0) {
    throw ConfigError("sparsity " + std::to_string(sparsity) + " selects no inducing inputs from " +
                      std::to_string(n) + " training hours");
  }
  std::vector<double> z;
  z.reserve(m);
  for (std::size_t i = 0; i < m; ++i) z.push_back(grid[i * n / m]);
  return z;
}

GpModel fit(const GpModel &model, const FitOptions &options) {
  if (options.restarts < 1) throw ConfigError("fit needs at least one restart");
  if (options.max_iterations < 1) throw ConfigError("fit needs at least one iteration");
  for (double v : model.noise_variance()) {
    if (!(v > 0.0)) throw ConfigError("fit requires strictly positive noise variances");
  }
  const Workspace ws(model);
  FitDiagnostics diag;
  diag.restarts = options.restarts;
  std::vector<double> best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<std::string> failures;
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<double> x;
    if (r == 0 && options.start_from_current) {
      x = model.parameters();
    } else {
      std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(r)));
      x = random_start(model, rng);
    }
    RestartReport rep;
    ceres::GradientProblem problem(new NegativeLml(model, ws));
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.max_num_iterations = options.max_iterations;
    opts.function_tolerance = 1e-10;
    opts.gradient_tolerance = 1e-8;
    opts.parameter_tolerance = 1e-10;
    opts.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, x.data(), &summary);
    rep.iterations = static_cast<int>(summary.iterations.size());
    rep.initial_objective = -summary.initial_cost;
    rep.final_objective = -summary.final_cost;
    rep.message = summary.message;
    rep.ok = summary.IsSolutionUsable() && std::isfinite(summary.final_cost);
    if (rep.ok) {
      if (rep.final_objective > best_value) {
        best_value = rep.final_objective;
        best = x;
        diag.best_restart = r;
      }
    } else {
      failures.push_back("restart " + std::to_string(r) + ": " + summary.message);
    }
    diag.runs.push_back(std::move(rep));
  }
  if (best.empty()) {
    throw FitError("every hyperparameter restart failed", failures);
  }
  GpModel out = model.with_parameters(best);
  diag.log_marginal_likelihood = log_marginal_likelihood(out, false).value;
  return out.with_fit(std::move(diag));
}

HourlyJointPosterior hourly_joint_posterior(const GpModel &model,
                                            std::span<const double> hours) {
  if (model.num_tasks() != 2) {
    throw ConfigError("hourly joint posterior needs a two-task model");
  }
  std::vector<TaskInput> test;
  test.reserve(2 * hours.size());
  for (double h : hours) {
    test.push_back({kPriceTask, h});
    test.push_back({kLoadTask, h});
  }
  check_test_tasks(model, test);
  const PointIndex t = index_points(test);
  PosteriorFactors pf = model.inducing() ? factors_dtc(model, t) : factors_exact(model, t);
  HourlyJointPosterior out;
  out.hours.assign(hours.begin(), hours.end());
  const Eigen::MatrixXd &b = model.coreg().b();
  for (std::size_t h = 0; h < hours.size(); ++h) {
    const auto i = static_cast<Eigen::Index>(2 * h);
    Eigen::Matrix2d cov;
    for (int a = 0; a < 2; ++a) {
      for (int c = 0; c < 2; ++c) {
        double v = b(a, c) * pf.k0 + (a == c ? pf.jitter : 0.0);
        v -= pf.minus.col(i + a).dot(pf.minus.col(i + c));
        if (pf.has_plus) v += pf.plus.col(i + a).dot(pf.plus.col(i + c));
        cov(a, c) = v;
      }
    }
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) = clamp_variance(cov(0, 0), b(0, 0) * pf.k0 + pf.jitter);
    cov(1, 1) = clamp_variance(cov(1, 1), b(1, 1) * pf.k0 + pf.jitter);
    out.mean.emplace_back(pf.mean(i) + model.task_means()[kPriceTask],
                          pf.mean(i + 1) + model.task_means()[kLoadTask]);
    out.covariance.push_back(cov);
  }
  return out;
}

JointDraws sample_bivariate(const HourlyJointPosterior &posterior,
                            int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be positive");
  JointDraws out;
  out.hours = posterior.hours;
  out.n_samples = n_samples;
  const std::size_t nh = posterior.hours.size();
  out.price.resize(nh * static_cast<std::size_t>(n_samples));
  out.load.resize(nh * static_cast<std::size_t>(n_samples));
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t h = 0; h < nh; ++h) {
    // Symmetric square root with negative round-off eigenvalues dropped.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(posterior.covariance[h]);
    const Eigen::Vector2d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::Matrix2d factor = es.eigenvectors() * root.asDiagonal();
    const Eigen::Vector2d &mu = posterior.mean[h];
    for (int s = 0; s < n_samples; ++s) {
      const Eigen::Vector2d z(normal(rng), normal(rng));
      const Eigen::Vector2d draw = mu + factor * z;
      const std::size_t k = h * static_cast<std::size_t>(n_samples) + static_cast<std::size_t>(s);
      out.price[k] = draw(0);
      out.load[k] = draw(1);
    }
  }
  return out;
}

JointDraws sample_posterior_scenarios(const GpModel &model,
                                      std::span<const double> hours,
                                      int n_samples, std::uint64_t seed) {
  if (!model.fitted()) throw StateError("cannot sample scenarios from an unfitted model");
  return sample_bivariate(hourly_joint_posterior(model, hours), n_samples, seed);
}

}  // namespace csgp
