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

#include "layoutcorr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "layoutcorr/features.hpp"

namespace layoutcorr {

Rect element_rect(const Element& e, const Vocabulary& vocab) {
  const int B = vocab.num_bins();
  const double denom = 4.0 * B;
  // Center (4b + 2) / 4B, half size (2s + 1) / 4B with 0-based bins.
  const auto lo = [&](int b, int s) { return std::clamp(4 * b - 2 * s + 1, 0, 4 * B) / denom; };
  const auto hi = [&](int b, int s) { return std::clamp(4 * b + 2 * s + 3, 0, 4 * B) / denom; };
  Rect r;
  r.left = lo(e.x - 1, e.w - 1);
  r.right = hi(e.x - 1, e.w - 1);
  r.top = lo(e.y - 1, e.h - 1);
  r.bottom = hi(e.y - 1, e.h - 1);
  return r;
}

namespace {

double intersection(const Rect& a, const Rect& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double area(const Rect& r) { return (r.right - r.left) * (r.bottom - r.top); }

std::vector<Rect> rects_of(const Layout& l, const Vocabulary& vocab) {
  std::vector<Rect> out;
  out.reserve(l.size());
  for (const Element& e : l.elements) out.push_back(element_rect(e, vocab));
  return out;
}

std::array<double, 6> guides(const Rect& r) {
  return {r.left, 0.5 * (r.left + r.right), r.right, r.top, 0.5 * (r.top + r.bottom), r.bottom};
}

}  // namespace

double iou(const Rect& a, const Rect& b) {
  const double inter = intersection(a, b);
  const double uni = area(a) + area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double layout_alignment(const Layout& l, const Vocabulary& vocab) {
  const std::size_t n = l.size();
  if (n < 2) return 0.0;
  std::vector<std::array<double, 6>> g;
  for (const Rect& r : rects_of(l, vocab)) g.push_back(guides(r));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int a = 0; a < 6; ++a) d = std::min(d, std::abs(g[i][a] - g[j][a]));
    }
    total += -std::log(1.0 - std::min(d, 1.0 - 1e-12));
  }
  return total / n;
}

double layout_overlap(const Layout& l, const Vocabulary& vocab) {
  const std::vector<Rect> r = rects_of(l, vocab);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) total += intersection(r[i], r[j]);
  }
  return total;
}

double alignment_score(const std::vector<Layout>& layouts, const Vocabulary& vocab) {
  if (layouts.empty()) return 0.0;
  double s = 0.0;
  for (const Layout& l : layouts) s += layout_alignment(l, vocab);
  return s / layouts.size();
}

double overlap_score(const std::vector<Layout>& layouts, const Vocabulary& vocab) {
  if (layouts.empty()) return 0.0;
  double s = 0.0;
  for (const Layout& l : layouts) s += layout_overlap(l, vocab);
  return s / layouts.size();
}

std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0) return {};
  if (rows > cols) {
    const std::vector<int> tr = hungarian_min(cost.transpose());
    std::vector<int> out(rows, -1);
    for (int c = 0; c < cols; ++c) out[tr[c]] = c;
    return out;
  }
  // Potentials method, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (match[j] != 0) out[match[j] - 1] = j - 1;
  }
  return out;
}

double pair_iou(const Layout& a, const Layout& b, const Vocabulary& vocab) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 1.0;
  std::map<int, std::vector<Rect>> ra, rb;
  for (const Element& e : a.elements) ra[e.c].push_back(element_rect(e, vocab));
  for (const Element& e : b.elements) rb[e.c].push_back(element_rect(e, vocab));
  double total = 0.0;
  for (const auto& [c, xs] : ra) {
    const auto it = rb.find(c);
    if (it == rb.end()) continue;
    const std::vector<Rect>& ys = it->second;
    Eigen::MatrixXd cost(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < ys.size(); ++j) cost(i, j) = -iou(xs[i], ys[j]);
    }
    const std::vector<int> m = hungarian_min(cost);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] >= 0) total -= cost(i, m[i]);
    }
  }
  return total / denom;
}

double max_iou(const std::vector<Layout>& generated, const std::vector<Layout>& reference, const Vocabulary& vocab) {
  if (generated.empty() || reference.empty()) throw Error(Errc::kInvalidArgument, "max_iou needs non-empty sets");
  Eigen::MatrixXd cost(generated.size(), reference.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) cost(i, j) = -pair_iou(generated[i], reference[j], vocab);
  }
  const std::vector<int> m = hungarian_min(cost);
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0) continue;
    total -= cost(i, m[i]);
    ++pairs;
  }
  return total / pairs;
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d;
}

// Squared distance from each point to its k-th nearest other point.
Eigen::VectorXd knn_radii(const Eigen::MatrixXd& x, int k) {
  const Eigen::MatrixXd d = squared_distances(x, x);
  Eigen::VectorXd r(x.rows());
  std::vector<double> row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (j != i) row.push_back(d(i, j));
    }
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    r(i) = row[k - 1];
  }
  return r;
}

double coverage(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& support, const Eigen::VectorXd& radii) {
  const Eigen::MatrixXd d = squared_distances(queries, support);
  int inside = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    for (Eigen::Index j = 0; j < support.rows(); ++j) {
      if (d(i, j) <= radii(j)) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / queries.rows();
}

}  // namespace

PrecisionRecall precision_recall(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& real, int k) {
  if (k < 1) throw Error(Errc::kInvalidArgument, "k must be positive");
  if (generated.rows() < k + 1 || real.rows() < k + 1) {
    throw Error(Errc::kInsufficientSamples, "precision/recall needs at least k+1 samples per side");
  }
  if (generated.cols() != real.cols()) throw Error(Errc::kInvalidArgument, "feature dimensions differ");
  PrecisionRecall pr;
  pr.precision = coverage(generated, real, knn_radii(real, k));
  pr.recall = coverage(real, generated, knn_radii(generated, k));
  return pr;
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, Eigen::VectorXd& mean) {
  mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (c.transpose() * c) / std::max<Eigen::Index>(1, x.rows() - 1);
  if (x.rows() < x.cols() + 1) cov += 1e-6 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw Error(Errc::kNotPsd, std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-8 * scale) throw Error(Errc::kNotPsd, std::string(what) + " is not positive semidefinite");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error(Errc::kInvalidArgument, "feature dimensions differ");
  if (a.rows() < 2 || b.rows() < 2) throw Error(Errc::kInsufficientSamples, "Frechet distance needs 2+ samples");
  Eigen::VectorXd mu1, mu2;
  const Eigen::MatrixXd s1 = covariance(a, mu1);
  const Eigen::MatrixXd s2 = covariance(b, mu2);
  const Eigen::MatrixXd h = psd_sqrt(s1, "covariance");
  Eigen::MatrixXd m = h * s2 * h;
  m = 0.5 * (m + m.transpose());
  const double cross = psd_sqrt(m, "covariance product").trace();
  const double d = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

nlohmann::json MetricReport::to_json() const {
  return nlohmann::json{{"frechet_geo", frechet},
                        {"precision", precision},
                        {"recall", recall},
                        {"alignment_x100", alignment * 100.0},
                        {"overlap_x100", overlap * 100.0},
                        {"max_iou", max_iou},
                        {"num_generated", num_generated},
                        {"num_real", num_real},
                        {"config_hash", config_hash}};
}

MetricReport evaluate_layouts(const std::vector<Layout>& generated, const std::vector<Layout>& real,
                              const Vocabulary& vocab, int n_max, const ReportOptions& opt) {
  MetricReport r;
  const GeoFeatures fm(vocab, n_max);
  const Eigen::MatrixXd fg = fm.batch(generated);
  const Eigen::MatrixXd fr = fm.batch(real);
  r.frechet = frechet_distance(fg, fr);
  const PrecisionRecall pr = precision_recall(fg, fr, opt.k);
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.alignment = alignment_score(generated, vocab);
  r.overlap = overlap_score(generated, vocab);
  if (opt.with_max_iou) r.max_iou = max_iou(generated, real, vocab);
  r.num_generated = static_cast<int>(generated.size());
  r.num_real = static_cast<int>(real.size());
  return r;
}

}  // namespace layoutcorr
