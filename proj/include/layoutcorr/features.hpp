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

// Hand-crafted layout descriptor used in place of a learned feature
// extractor for Frechet distance and precision/recall.
//
// geo-v1, in order:
//   category fractions (C), element count / n_max,
//   mean and std of x-center, y-center, width, height (8),
//   sqrt(alignment), sqrt(overlap), fraction of elements overlapping another,
//   summed element area, lowest bottom edge.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

class GeoFeatures {
 public:
  GeoFeatures(const Vocabulary& vocab, int n_max) : vocab_(vocab), n_max_(n_max) {}

  static constexpr const char* kName = "geo-v1";
  int dim() const { return vocab_.num_categories() + 14; }

  Eigen::VectorXd compute(const Layout& l) const;
  // One row per layout.
  Eigen::MatrixXd batch(const std::vector<Layout>& layouts) const;

 private:
  Vocabulary vocab_;
  int n_max_;
};

// CSV with a version comment line and one row per layout.
std::string features_to_csv(const Eigen::MatrixXd& features, const std::string& provenance);

}  // namespace layoutcorr
