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

// Diagnostic experiments: token sticking, recovery from corrupted tokens,
// corrector detection quality, and sampling schedule trade-offs.

#include <string>
#include <vector>

#include "layoutcorr/corrector.hpp"
#include "layoutcorr/denoiser.hpp"
#include "layoutcorr/metrics.hpp"
#include "layoutcorr/sampler.hpp"

namespace layoutcorr {

// Tabular result; to_csv prefixes a "# schema/provenance" comment line.
struct Table {
  std::string schema;  // e.g. "tsr-v1"
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string to_csv(const std::string& provenance = "") const;
};

std::string fmt(double v);

struct TsrPoint {
  int t = 0;
  double tsr = 1.0;  // fraction of non-MASK tokens of z_t left unchanged at z_0
  long tokens = 0;   // non-MASK tokens counted
};

// Runs the full reverse process from forward-corrupted z_t for each t.
std::vector<TsrPoint> tsr_curve(const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                                const DiffusionSchedule& s, const std::vector<int>& t_values, int samples_per_t,
                                Rng& rng);
Table tsr_table(const std::vector<TsrPoint>& points, const std::string& profile);

enum class ReplaceMode { kMask, kToken };

ReplaceMode parse_replace_mode(const std::string& name);
std::string replace_mode_name(ReplaceMode m);

// Picks `n` distinct positions inside real (non-PAD) elements, restricted to
// geometry fields when asked.
std::vector<int> pick_positions(const TokenSeq& seq, const Vocabulary& vocab, int n, bool geometry_only, Rng& rng);
// A different regular token legal for the field of `position`.
Token random_other_token(Token current, int position, const Vocabulary& vocab, Rng& rng);

struct RecoveryResult {
  int trials = 0;
  int successes = 0;
  double rate() const { return trials ? static_cast<double>(successes) / trials : 1.0; }
};

// Corrupts n_replace tokens of clean layouts and runs reverse steps from
// t_start down to 0; success means every corrupted token is restored.
RecoveryResult token_correction_success(const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                                        const DiffusionSchedule& s, ReplaceMode mode, int t_start, int n_replace,
                                        int trials, Rng& rng);

struct DetectionResult {
  double accuracy = 0.0;  // mean fraction of replaced tokens among the lowest scores
  double chance = 0.0;    // mean of n_replace / (5 N) over the trials
  int trials = 0;
};

DetectionResult detection_accuracy(const Corrector& corrector, const std::vector<TokenSeq>& corpus, int n_replace,
                                   int t_eval, int trials, Rng& rng);

struct CorruptionPoint {
  int cap = 0;
  double replaced_mean = 0.0;
  double clean_mean = 0.0;
};

// Shifts 3 geometry tokens by a nonzero offset within +-cap bins (cap 0
// leaves them unchanged) and averages corrector scores. All caps reuse the
// same layouts and random draws. Caps must lie in [0, B/2].
std::vector<CorruptionPoint> score_vs_corruption(const Corrector& corrector, const std::vector<TokenSeq>& corpus,
                                                 const std::vector<int>& caps, int t_eval, int trials, Rng& rng);
Table corruption_table(const std::vector<CorruptionPoint>& points);

struct SampleQuality {
  std::string label;
  int steps = 0;
  bool corrected = false;
  MetricReport report;
};

// Generates `count` layouts with the given sampler settings and evaluates
// them against `real` (max-IoU skipped).
SampleQuality sample_quality(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                             const SamplerConfig& cfg, int count, const std::vector<Layout>& real, int k = 3);

// Cumulative schedules {10}, {10,20}, ..., {10..90}.
std::vector<std::vector<int>> nested_schedules(int count = 9, int step = 10);
std::string schedule_name(const std::vector<int>& schedule);

std::vector<SampleQuality> sweep_schedules(const Denoiser& denoiser, const Corrector& corrector,
                                           const DiffusionSchedule& s, const std::vector<std::vector<int>>& schedules,
                                           const SamplerConfig& base, int count, const std::vector<Layout>& real,
                                           bool include_baseline = true);

// Each T' with and without the corrector.
std::vector<SampleQuality> speed_quality(const Denoiser& denoiser, const Corrector& corrector,
                                         const DiffusionSchedule& s, const std::vector<int>& steps,
                                         const SamplerConfig& base, int count, const std::vector<Layout>& real);

Table quality_table(const std::vector<SampleQuality>& rows, const std::string& schema);
// One row per T' from speed_quality output (plain and corrector side by side).
Table speed_quality_table(const std::vector<SampleQuality>& rows);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);
// Number of adjacent decreases (increasing = true) or increases.
int inversions(const std::vector<double>& v, bool increasing);

}  // namespace layoutcorr
