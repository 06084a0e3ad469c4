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

// Layout quality metrics.
//
// alignment: per element, d = the smallest |difference| between any of its
//   six guide coordinates (left, x-center, right, top, y-center, bottom) and
//   the same coordinate of another element. Layout score is
//   -(1/N) sum log(1 - d); single-element layouts score 0.
// overlap: sum of pairwise intersection areas on the unit canvas.
// Both are averaged over layouts and reported unscaled.

#include <Eigen/Dense>
#include <vector>

#include "json.hpp"
#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

// Box edges computed from integer numerators, so edges that coincide on the
// bin lattice compare equal exactly.
Rect element_rect(const Element& e, const Vocabulary& vocab);

double iou(const Rect& a, const Rect& b);

double layout_alignment(const Layout& l, const Vocabulary& vocab);
double layout_overlap(const Layout& l, const Vocabulary& vocab);
double alignment_score(const std::vector<Layout>& layouts, const Vocabulary& vocab);
double overlap_score(const std::vector<Layout>& layouts, const Vocabulary& vocab);

// Minimum-cost assignment of every row to a distinct column (rows <= cols
// or the transpose is solved). Returns the column of each row, -1 for rows
// left unmatched when rows > cols.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost);

// Mean IoU of the best same-category element matching, divided by the
// larger element count.
double pair_iou(const Layout& a, const Layout& b, const Vocabulary& vocab);
// Optimal one-to-one pairing of generated and reference layouts maximizing
// summed pair_iou; returns the mean over matched pairs.
double max_iou(const std::vector<Layout>& generated, const std::vector<Layout>& reference, const Vocabulary& vocab);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// k-NN manifold precision/recall; rows are samples.
PrecisionRecall precision_recall(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& real, int k = 3);

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct MetricReport {
  double frechet = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double alignment = 0.0;
  double overlap = 0.0;
  double max_iou = 0.0;
  int num_generated = 0;
  int num_real = 0;
  std::string config_hash;

  // Alignment and overlap are scaled by 100 here.
  nlohmann::json to_json() const;
};

struct ReportOptions {
  int k = 3;
  bool with_max_iou = true;
};

MetricReport evaluate_layouts(const std::vector<Layout>& generated, const std::vector<Layout>& real,
                              const Vocabulary& vocab, int n_max, const ReportOptions& opt = {});

}  // namespace layoutcorr
