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

// Generation loops: reverse diffusion sampling (optionally strided), MaskGIT
// style confidence decoding, and corrector-in-the-loop re-masking.
//
// Items of a batch are independent: item i draws from its own stream seeded
// by derive_seed(seed, i), so a layout does not depend on which other items
// share its batch (up to floating-point reassociation in batched matmuls).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutcorr/corrector.hpp"
#include "layoutcorr/denoiser.hpp"
#include "layoutcorr/diffusion.hpp"

namespace layoutcorr {

struct SamplerConfig {
  // Effective reverse steps T'. Visited times are round(k * T / T').
  int steps = 100;
  std::vector<int> corrector_timesteps = {10, 20, 30};
  SelectConfig select;
  // MaskGIT decoding length.
  int maskgit_steps = 10;
  bool record_trace = false;
  std::uint64_t seed = 0;

  void validate(int T) const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

// Fixed tokens per position; `fixed[p]` flags the conditioned positions.
struct Condition {
  std::vector<Token> tokens;
  std::vector<std::uint8_t> fixed;

  bool empty() const { return fixed.empty(); }
  int num_fixed() const;
};

enum class ConditionTask {
  kCategory,      // C -> S+P
  kCategorySize,  // C+S -> P
};

ConditionTask parse_condition_task(const std::string& name);
std::string condition_task_name(ConditionTask task);

// Takes categories (and sizes) from `reference`. PAD slots are fixed whole.
Condition make_condition(const TokenSeq& reference, ConditionTask task, const Vocabulary& vocab);
void validate_condition(const Condition& c, const Vocabulary& vocab, int seq_len);

struct TraceStep {
  int t = 0;  // time reached after this step
  TokenSeq tokens;
  std::vector<int> masked_positions;  // chosen by the corrector, empty otherwise
  std::vector<double> scores;         // empty when the corrector did not run
};

struct GenerationTrace {
  std::vector<TraceStep> steps;
  int denoiser_calls = 0;
  int corrector_calls = 0;
  int forward_ops() const { return denoiser_calls + corrector_calls; }
};

struct GenerationResult {
  TokenSeq tokens;
  Layout layout;
  // Element slots dropped while decoding inconsistent PAD patterns.
  int dropped = 0;
  GenerationTrace trace;  // counters always filled, steps only when recorded
};

// Visited times T = t_{T'} > ... > t_0 = 0.
std::vector<int> time_grid(int T, int steps);
// Which visited times trigger the corrector (nearest visited time > 0).
std::vector<int> corrector_times_on_grid(const std::vector<int>& grid, const std::vector<int>& requested);

std::vector<GenerationResult> generate_batch(const Denoiser& denoiser, const Corrector* corrector,
                                             const DiffusionSchedule& s, const SamplerConfig& cfg, int count,
                                             const std::vector<Condition>& conditions = {});

GenerationResult generate(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                          const SamplerConfig& cfg);

GenerationResult generate_conditional(const Denoiser& denoiser, const Corrector* corrector,
                                      const DiffusionSchedule& s, const Condition& condition,
                                      const SamplerConfig& cfg);

// Cosine mask-rate schedule; the corrector (if given) runs after every step
// but the last.
std::vector<GenerationResult> maskgit_batch(const Denoiser& denoiser, const Corrector* corrector,
                                            const DiffusionSchedule& s, const SamplerConfig& cfg, int count,
                                            const std::vector<Condition>& conditions = {});

GenerationResult maskgit_decode(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                                const SamplerConfig& cfg);

// One JSON object per step: {t, tokens, masked_positions, scores}.
std::string trace_to_jsonl(const GenerationTrace& trace);

}  // namespace layoutcorr
