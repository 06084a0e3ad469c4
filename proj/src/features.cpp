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

#include "layoutcorr/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "layoutcorr/metrics.hpp"

namespace layoutcorr {

Eigen::VectorXd GeoFeatures::compute(const Layout& l) const {
  const int C = vocab_.num_categories();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dim());
  const int n = static_cast<int>(l.size());
  f(C) = static_cast<double>(n) / n_max_;
  if (n == 0) return f;

  std::vector<Rect> r;
  for (const Element& e : l.elements) {
    f(e.c) += 1.0 / n;
    r.push_back(element_rect(e, vocab_));
  }
  double sum[4] = {0, 0, 0, 0}, sq[4] = {0, 0, 0, 0};
  double area = 0.0, lowest = 0.0;
  for (const Rect& b : r) {
    const double v[4] = {0.5 * (b.left + b.right), 0.5 * (b.top + b.bottom), b.right - b.left, b.bottom - b.top};
    for (int k = 0; k < 4; ++k) {
      sum[k] += v[k];
      sq[k] += v[k] * v[k];
    }
    area += v[2] * v[3];
    lowest = std::max(lowest, b.bottom);
  }
  for (int k = 0; k < 4; ++k) {
    const double mean = sum[k] / n;
    f(C + 1 + 2 * k) = mean;
    f(C + 2 + 2 * k) = std::sqrt(std::max(0.0, sq[k] / n - mean * mean));
  }
  int overlapping = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = std::min(r[i].right, r[j].right) - std::max(r[i].left, r[j].left);
      const double h = std::min(r[i].bottom, r[j].bottom) - std::max(r[i].top, r[j].top);
      if (w > 0.0 && h > 0.0) {
        ++overlapping;
        break;
      }
    }
  }
  f(C + 9) = std::sqrt(layout_alignment(l, vocab_));
  f(C + 10) = std::sqrt(layout_overlap(l, vocab_));
  f(C + 11) = static_cast<double>(overlapping) / n;
  f(C + 12) = area;
  f(C + 13) = lowest;
  return f;
}

Eigen::MatrixXd GeoFeatures::batch(const std::vector<Layout>& layouts) const {
  Eigen::MatrixXd out(layouts.size(), dim());
  for (std::size_t i = 0; i < layouts.size(); ++i) out.row(i) = compute(layouts[i]).transpose();
  return out;
}

std::string features_to_csv(const Eigen::MatrixXd& features, const std::string& provenance) {
  std::ostringstream os;
  os.precision(17);
  os << "# " << GeoFeatures::kName << " " << provenance << "\n";
  for (Eigen::Index j = 0; j < features.cols(); ++j) os << (j ? "," : "") << "f" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) os << (j ? "," : "") << features(i, j);
    os << "\n";
  }
  return os.str();
}

}  // namespace layoutcorr
