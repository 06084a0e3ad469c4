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

// Transformer denoiser predicting the clean-token distribution from a
// corrupted sequence and its timestep.
//
// Inputs are token, field-type (c/x/y/w/h) and timestep embeddings summed per
// position, plus a fixed sinusoidal code of the bin index for geometry tokens
// so that nearby bins start out with nearby embeddings. There is no slot index embedding, so permuting whole elements
// permutes the output rows. Attention gets a learned per-head bias for pairs
// inside the same element so the five fields of an element can bind.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutcorr/diffusion.hpp"
#include "layoutcorr/nn.hpp"
#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

struct DenoiserConfig {
  int num_categories = 5;
  int num_bins = 32;
  int n_max = 8;
  int T = 100;
  int embed_dim = 64;
  int num_layers = 3;
  int num_heads = 4;
  int ff_dim = 128;
  double dropout = 0.0;
  bool element_bias = true;
  // Amplitude of a fixed sinusoidal code of the bin index added to geometry
  // token embeddings; 0 disables it.
  double bin_code_scale = 0.1;
  double init_std = 0.02;

  int seq_len() const { return n_max * kFieldsPerElement; }
  int num_classes() const { return num_categories + num_bins + 2; }
  void validate() const;

  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
  int steps = 3000;
  int batch = 64;
  int warmup = 100;
  // Cosine decay from lr down to lr * final_lr_frac.
  double final_lr_frac = 0.1;
  nn::AdamWConfig opt;
  std::uint64_t seed = 1;
  // Exponential moving-average factor for the reported loss.
  double ema = 0.98;
  int log_every = 0;  // 0 disables the progress callback

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  double lr_at(int step) const;
};

struct TrainLog {
  std::vector<double> loss;
  double final_ema = 0.0;
};

using ProgressFn = std::function<void(int step, double ema_loss)>;

struct HybridLoss {
  double total = 0.0;
  double vlb = 0.0;
  double aux = 0.0;
};

template <typename S>
class DenoiserT {
 public:
  DenoiserT(const DenoiserConfig& cfg, std::uint64_t seed);

  const DenoiserConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  // Legal-masked clean-token probabilities, one row per position of every
  // sequence ((batch * seq_len) x num_classes). MASK and field-illegal
  // classes get exactly zero.
  nn::Mat<S> denoise_batch(const std::vector<TokenSeq>& z_t, const std::vector<int>& t) const;
  Eigen::MatrixXd denoise(const TokenSeq& z_t, int t) const;

  // Mean over positions of KL(q(z_{t-1}|z_t,z0) || p(z_{t-1}|z_t)) plus
  // aux_weight * CE(p~, z0). At t=1 the KL term is -log p(z0|z1). Adds the
  // gradient of the returned total to params().grad (not zeroed here).
  HybridLoss hybrid_loss(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t, const std::vector<int>& t,
                         const DiffusionSchedule& s, double aux_weight, Rng* dropout_rng = nullptr);

  // Same objective without gradients.
  HybridLoss eval_loss(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t, const std::vector<int>& t,
                       const DiffusionSchedule& s, double aux_weight) const;

 private:
  struct Cache;
  void forward(const std::vector<TokenSeq>& z_t, const std::vector<int>& t, Cache& c, Rng* dropout_rng) const;
  HybridLoss loss_and_dprobs(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t,
                             const std::vector<int>& t, const DiffusionSchedule& s, double aux_weight,
                             const nn::Mat<S>& probs, nn::Mat<S>* dlogits) const;
  void check_inputs(const std::vector<TokenSeq>& z_t, const std::vector<int>& t) const;

  DenoiserConfig cfg_;
  Vocabulary vocab_;
  nn::ParamSet<S> params_;
  nn::Param<S>* tok_emb_;
  nn::Param<S>* field_emb_;
  nn::Param<S>* time_emb_;
  std::vector<nn::EncoderBlock<S>> blocks_;
  nn::LayerNorm<S> final_ln_;
  nn::Linear<S> head_;
  nn::Mat<S> bin_codes_;  // fixed, not a parameter
  nn::Mat<S> same_element_;
  // 0 for legal classes, 1 for excluded ones, per field.
  std::vector<std::vector<unsigned char>> excluded_;
};

extern template class DenoiserT<float>;
extern template class DenoiserT<double>;

using Denoiser = DenoiserT<float>;

// Rows of batch item `item` from denoise_batch output, widened to double and
// renormalized there (float rows can miss 1 by more than 1e-6).
Eigen::MatrixXd item_rows(const nn::Mat<float>& probs, int item, int len);

// Loss of a fixed predictor that is uniform over each field's legal set.
double uniform_baseline_loss(const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s, const Vocabulary& vocab,
                             double aux_weight, int samples, Rng& rng);

// Draws t uniformly in [1, T] and z_t ~ q(z_t | z0) for each item.
void corrupt_batch(const std::vector<TokenSeq>& z0, const DiffusionSchedule& s, Rng& rng, std::vector<TokenSeq>& z_t,
                   std::vector<int>& t);

TrainLog train_denoiser(Denoiser& model, const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s,
                        const TrainConfig& tc, double aux_weight, const ProgressFn& progress = {});

// Argmax accuracy of p~ against z0 over all positions, t uniform in [t_lo, t_hi].
double token_accuracy(const Denoiser& model, const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s,
                      int t_lo, int t_hi, int samples, Rng& rng);

void save_denoiser(const Denoiser& model, const std::string& path, const nlohmann::json& meta = nullptr);
Denoiser load_denoiser(const std::string& path);

}  // namespace layoutcorr
