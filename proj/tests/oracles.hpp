// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Independent brute-force references used by unit and acceptance tests.
// Everything here works from the per-step (alpha, beta, gamma) values or
// from raw definitions only, never from the library's closed forms.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "layoutcorr/diffusion.hpp"
#include "layoutcorr/metrics.hpp"
#include "layoutcorr/rng.hpp"

namespace oracle {

// One-step matrix with entry (to, from), built from the per-step values.
inline Eigen::MatrixXd step_matrix(const layoutcorr::DiffusionSchedule& s, int t) {
  const int n = s.K() + 2;
  const int m = n - 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) q(i, j) = (i == j ? s.alpha(t) : 0.0) + s.beta(t);
    q(m, j) = s.gamma(t);
  }
  q(m, m) = 1.0;
  return q;
}

// Product Q_t ... Q_{s+1}; identity when s == t.
inline Eigen::MatrixXd span_product(const layoutcorr::DiffusionSchedule& s, int from, int to) {
  const int n = s.K() + 2;
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  for (int k = from + 1; k <= to; ++k) p = step_matrix(s, k) * p;
  return p;
}

// q(z_to | z_t, z0) by Bayes over every predecessor state.
inline Eigen::VectorXd bayes_posterior(const layoutcorr::DiffusionSchedule& s, int zt, int z0, int t, int to) {
  const Eigen::MatrixXd forward = span_product(s, to, t);
  const Eigen::MatrixXd prior = span_product(s, 0, to);
  const int n = s.K() + 2;
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) out(j) = forward(zt, j) * prior(j, z0);
  return out / out.sum();
}

// sum_k p(k) q(z_to | z_t, z0 = k), each posterior normalized on its own.
inline Eigen::VectorXd mixture_double_sum(const layoutcorr::DiffusionSchedule& s, int zt, const Eigen::VectorXd& p,
                                          int t, int to) {
  const Eigen::MatrixXd forward = span_product(s, to, t);
  const Eigen::MatrixXd prior = span_product(s, 0, to);
  const int n = s.K() + 2;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (p(k) == 0.0) continue;
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += forward(zt, j) * prior(j, k);
    for (int j = 0; j < n; ++j) out(j) += p(k) * forward(zt, j) * prior(j, k) / z;
  }
  return out;
}

// A random feasible schedule with T <= max_T and K <= max_K.
inline layoutcorr::DiffusionSchedule random_schedule(layoutcorr::Rng& rng, int max_T, int max_K) {
  using layoutcorr::BetaProfile;
  for (;;) {
    const int T = rng.range(2, max_T);
    const int K = rng.range(1, max_K);
    const int kind = rng.range(0, 2);
    const double v = 1e-3 + 0.15 * rng.uniform();
    BetaProfile p = kind == 0 ? BetaProfile::epsilon_flat()
                              : (kind == 1 ? BetaProfile::linear_up(v) : BetaProfile::linear_down(v));
    try {
      return layoutcorr::DiffusionSchedule::build(T, K, p);
    } catch (const layoutcorr::Error&) {
    }
  }
}

// Hungarian-free maximum-weight matching by trying every injection of the
// smaller side into the larger one.
inline double best_assignment_sum(const std::vector<std::vector<double>>& w) {
  const int rows = static_cast<int>(w.size());
  if (rows == 0) return 0.0;
  const int cols = static_cast<int>(w[0].size());
  if (cols == 0) return 0.0;
  const bool flip = rows > cols;
  const int a = flip ? cols : rows;
  const int b = flip ? rows : cols;
  std::vector<int> perm(b);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < a; ++i) s += flip ? w[perm[i]][i] : w[i][perm[i]];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

using layoutcorr::Element;
using layoutcorr::Layout;
using layoutcorr::PrecisionRecall;
using layoutcorr::Rect;
using layoutcorr::Rng;

// Metric fixtures use the default 5-category, 32-bin vocabulary.
inline const layoutcorr::Vocabulary kOracleVocab(5, 32);

inline Layout random_layout(Rng& rng, int min_n, int max_n, int categories = 5) {
  Layout l;
  const int n = rng.range(min_n, max_n);
  for (int i = 0; i < n; ++i) {
    l.elements.push_back({rng.range(0, categories - 1), rng.range(1, 32), rng.range(1, 32), rng.range(1, 16),
                          rng.range(1, 16)});
  }
  return l;
}

// Floating-point box edges through the generic dequantize path.
inline Rect float_rect(const Element& e) { return layoutcorr::to_rect(layoutcorr::dequantize(e, kOracleVocab)); }

inline double brute_iou(const Rect& a, const Rect& b) {
  const double w = std::max(0.0, std::min(a.right, b.right) - std::max(a.left, b.left));
  const double h = std::max(0.0, std::min(a.bottom, b.bottom) - std::max(a.top, b.top));
  const double inter = w * h;
  const double uni = (a.right - a.left) * (a.bottom - a.top) + (b.right - b.left) * (b.bottom - b.top) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Exhaustive over injective maps from the smaller layout into the larger;
// category mismatches contribute nothing.
inline double brute_pair_iou(const Layout& a, const Layout& b) {
  const Layout& small = a.size() <= b.size() ? a : b;
  const Layout& big = a.size() <= b.size() ? b : a;
  std::vector<int> perm(big.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small.size(); ++i) {
      const Element& x = small.elements[i];
      const Element& y = big.elements[perm[i]];
      if (x.c == y.c) s += brute_iou(float_rect(x), float_rect(y));
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / big.size();
}

inline double brute_set_iou(const std::vector<Layout>& g, const std::vector<Layout>& r) {
  std::vector<std::vector<double>> w(g.size(), std::vector<double>(r.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) w[i][j] = brute_pair_iou(g[i], r[j]);
  }
  return oracle::best_assignment_sum(w) / std::min(g.size(), r.size());
}

// O(n^2) reference with explicit sorting.
inline PrecisionRecall brute_pr(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& real, int k) {
  const auto radius = [&](const Eigen::MatrixXd& x, Eigen::Index i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (j != i) d.push_back((x.row(i) - x.row(j)).norm());
    }
    std::sort(d.begin(), d.end());
    return d[k - 1];
  };
  const auto frac = [&](const Eigen::MatrixXd& q, const Eigen::MatrixXd& sup) {
    int in = 0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      bool found = false;
      for (Eigen::Index j = 0; j < sup.rows() && !found; ++j) {
        found = (q.row(i) - sup.row(j)).norm() <= radius(sup, j);
      }
      in += found;
    }
    return static_cast<double>(in) / q.rows();
  };
  return {frac(gen, real), frac(real, gen)};
}

// Tr sqrt(S1 S2) from the (real, non-negative) eigenvalues of the product.
inline double eig_frechet(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd m1 = a.colwise().mean(), m2 = b.colwise().mean();
  const Eigen::MatrixXd ca = a.rowwise() - m1.transpose();
  const Eigen::MatrixXd cb = b.rowwise() - m2.transpose();
  const Eigen::MatrixXd s1 = ca.transpose() * ca / (a.rows() - 1.0);
  const Eigen::MatrixXd s2 = cb.transpose() * cb / (b.rows() - 1.0);
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr;
}

inline Eigen::MatrixXd gaussian_cloud(Rng& rng, int n, int d, double shift, double scale) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = shift + scale * (j + 1) * rng.normal();
  }
  return x;
}

}  // namespace oracle
