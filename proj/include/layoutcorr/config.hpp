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

// Run configuration shared by every CLI command. JSON with one object per
// section; omitted fields keep their defaults and unknown keys are errors.

#include <cstdint>
#include <string>

#include "json.hpp"
#include "layoutcorr/corrector.hpp"
#include "layoutcorr/data.hpp"
#include "layoutcorr/denoiser.hpp"
#include "layoutcorr/diffusion.hpp"
#include "layoutcorr/sampler.hpp"

namespace layoutcorr {

struct VocabSection {
  int num_categories = 5;
  int num_bins = 32;
  int n_max = 8;
};

struct ScheduleSection {
  int T = 100;
  BetaProfile profile;
};

struct DenoiserSection {
  DenoiserConfig model;  // vocabulary fields are taken from [vocab]/[schedule]
  TrainConfig train;
  double aux_weight = 0.1;
};

struct CorrectorSection {
  CorrectorConfig model;
  TrainConfig train;
};

struct EvalSection {
  int k = 3;
  int num_samples = 1000;
  bool with_max_iou = true;
};

struct DataSection {
  SynthConfig synth;
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t split_seed = 0;
};

struct RunConfig {
  VocabSection vocab;
  ScheduleSection schedule;
  DenoiserSection denoiser;
  CorrectorSection corrector;
  SamplerConfig sampler;
  EvalSection eval;
  DataSection data;

  RunConfig();

  Vocabulary make_vocab() const { return Vocabulary(vocab.num_categories, vocab.num_bins); }
  DiffusionSchedule make_schedule() const;

  // Pushes [vocab] and [schedule] into the model sections and checks ranges.
  void validate();
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);

  // FNV-1a over the canonical (sorted-key, compact) dump, as 16 hex digits.
  std::string hash() const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace layoutcorr
