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

// Per-token correctness scorer for mask-free sequences.
//
// Each element's five token embeddings (with the same fixed bin-index code
// as the denoiser) are concatenated with fixed sinusoidal codes of the
// element's six guide lines and fused by a small MLP into one element
// embedding; a timestep embedding is added and a transformer encoder
// runs over the elements without any positional encoding. A linear head emits five logits per element, one per field.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutcorr/denoiser.hpp"
#include "layoutcorr/diffusion.hpp"
#include "layoutcorr/nn.hpp"

namespace layoutcorr {

// What the binary target means.
enum class CorrectorObjective {
  kCorrectness,     // sampled token equals the clean token
  kMaskEstimation,  // position was not MASK in z_t
};

CorrectorObjective parse_objective(const std::string& name);
std::string objective_name(CorrectorObjective o);

struct CorrectorConfig {
  int num_categories = 5;
  int num_bins = 32;
  int n_max = 8;
  int T = 100;
  int embed_dim = 64;
  int num_layers = 4;
  int num_heads = 8;
  int ff_dim = 128;
  // Amplitude of a fixed sinusoidal code of the bin index added to geometry
  // token embeddings; 0 disables it.
  double bin_code_scale = 0.1;
  // Sinusoid frequencies per guide line (left, x-center, right, top,
  // y-center, bottom) fed to the element fusion; 0 disables.
  int edge_freqs = 8;
  double init_std = 0.02;
  CorrectorObjective objective = CorrectorObjective::kCorrectness;

  int seq_len() const { return n_max * kFieldsPerElement; }
  int num_classes() const { return num_categories + num_bins + 2; }
  int edge_code_dim() const { return 12 * edge_freqs; }
  void validate() const;

  nlohmann::json to_json() const;
  static CorrectorConfig from_json(const nlohmann::json& j);
  // Copies the vocabulary, n_max and T from a denoiser.
  static CorrectorConfig matching(const DenoiserConfig& d);
};

template <typename S>
class CorrectorT {
 public:
  CorrectorT(const CorrectorConfig& cfg, std::uint64_t seed);

  const CorrectorConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  // Logits, batch x seq_len. Inputs must be MASK-free.
  nn::Mat<S> logits_batch(const std::vector<TokenSeq>& seqs, const std::vector<int>& t) const;
  // Sigmoid scores in [0, 1], one per position.
  std::vector<double> score(const TokenSeq& seq, int t) const;
  std::vector<std::vector<double>> score_batch(const std::vector<TokenSeq>& seqs, const std::vector<int>& t) const;

  // Mean BCE over every position of the batch; adds its gradient to
  // params().grad.
  double bce_loss(const std::vector<TokenSeq>& seqs, const std::vector<int>& t,
                  const std::vector<std::vector<std::uint8_t>>& targets);
  double eval_bce(const std::vector<TokenSeq>& seqs, const std::vector<int>& t,
                  const std::vector<std::vector<std::uint8_t>>& targets) const;

 private:
  struct Cache;
  void forward(const std::vector<TokenSeq>& seqs, const std::vector<int>& t, Cache& c) const;

  CorrectorConfig cfg_;
  Vocabulary vocab_;
  nn::ParamSet<S> params_;
  nn::Param<S>* tok_emb_;
  nn::Param<S>* time_emb_;
  nn::Mat<S> bin_codes_;
  std::vector<double> edge_omega_;
  nn::Linear<S> fuse1_, fuse2_;
  std::vector<nn::EncoderBlock<S>> blocks_;
  nn::LayerNorm<S> final_ln_;
  nn::Linear<S> head_;
};

extern template class CorrectorT<float>;
extern template class CorrectorT<double>;

using Corrector = CorrectorT<float>;

// Mean binary cross-entropy of probabilities with clamping to [eps, 1-eps].
double bce_mean(std::span<const double> scores, std::span<const std::uint8_t> targets, double eps = 1e-7);

struct CorrectorTrainBatch {
  std::vector<TokenSeq> z0;
  std::vector<int> t;
  std::vector<TokenSeq> z_t;
  std::vector<TokenSeq> z_hat;  // mask-free sample of z_{t-1}
  std::vector<std::vector<std::uint8_t>> targets;
};

// Target bits for one item under the given objective.
std::vector<std::uint8_t> corrector_targets(const TokenSeq& z0, const TokenSeq& z_t, const TokenSeq& z_hat,
                                            CorrectorObjective objective, const Vocabulary& vocab);

CorrectorTrainBatch make_train_batch(const Denoiser& denoiser, const std::vector<TokenSeq>& z0,
                                     const DiffusionSchedule& s, CorrectorObjective objective, Rng& rng);

TrainLog train_corrector(Corrector& corrector, const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                         const DiffusionSchedule& s, const TrainConfig& tc, const ProgressFn& progress = {});

// BCE on freshly drawn batches (the corrector's own objective).
double heldout_bce(const Corrector& corrector, const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                   const DiffusionSchedule& s, int samples, Rng& rng);

enum class SelectMode { kThreshold, kLowestK };

struct SelectConfig {
  SelectMode mode = SelectMode::kThreshold;
  double threshold = 0.7;
  double tau = 0.05;
  // Perturb logit(score) instead of the score itself.
  bool logit_space = false;
};

SelectMode parse_select_mode(const std::string& name);
std::string select_mode_name(SelectMode m);

// Positions to reset to MASK, ascending. Noise is centered Gumbel scaled by
// tau. In lowest-k mode k = floor(len * gamma_bar). `protected_pos` may be
// empty (nothing protected) or hold one flag per position.
std::vector<int> select_tokens_to_mask(std::span<const double> scores, std::span<const std::uint8_t> protected_pos,
                                       const SelectConfig& cfg, double gamma_bar, Rng& rng);

void save_corrector(const Corrector& corrector, const std::string& path, const nlohmann::json& meta = nullptr);
Corrector load_corrector(const std::string& path);

}  // namespace layoutcorr
