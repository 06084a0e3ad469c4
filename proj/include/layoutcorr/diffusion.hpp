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

// Absorbing-state discrete diffusion over K+2 classes: K regular tokens,
// PAD (treated as a regular class, index K) and MASK (index K+1).
//
// One step keeps a token with probability alpha_t, moves it to each of the
// K+1 non-MASK classes with probability beta_t, and masks it with
// probability gamma_t. MASK is absorbing. Matrices use the (to, from)
// convention, so q(z_t | z_{t-1}) = Q_t(z_t, z_{t-1}) and columns sum to 1.
//
// Cumulants: alpha_bar_t = prod alpha_i, gamma_bar_t = 1 - prod (1 - gamma_i),
// (K+1) beta_bar_t = 1 - alpha_bar_t - gamma_bar_t. The stored beta_bar is
// the per-class value; beta_bar_total() is the (K+1)-fold sum.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutcorr/common.hpp"
#include "layoutcorr/rng.hpp"
#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

inline constexpr double kBetaEpsilon = 1e-6;
// gamma_bar_T stops this far below 1 so the last step keeps regular mass.
inline constexpr double kMaskHeadroom = 1e-4;
// Probabilities are floored here before being used as divisors.
inline constexpr double kProbFloor = 1e-30;

enum class BetaProfileKind { kEpsilonFlat, kLinearUp, kLinearDown };

// Shape of the total replacement mass beta_bar_total over t = 1..T.
struct BetaProfile {
  BetaProfileKind kind = BetaProfileKind::kEpsilonFlat;
  // Endpoint for the linear profiles (target for linear-up, start for linear-down).
  double value = kBetaEpsilon;

  static BetaProfile epsilon_flat() { return {}; }
  static BetaProfile linear_up(double target) { return {BetaProfileKind::kLinearUp, target}; }
  static BetaProfile linear_down(double start) { return {BetaProfileKind::kLinearDown, start}; }

  // "epsilon-flat", "linear-up:0.1", "linear-down:0.05".
  static BetaProfile parse(const std::string& text);
  std::string name() const;
};

// Per-step probabilities of the transition from z_s to z_t.
struct StepKernel {
  double keep = 1.0;         // alpha
  double replace = 0.0;      // beta, per destination class
  double mask = 0.0;         // gamma
};

class DiffusionSchedule {
 public:
  // K is the number of regular classes excluding PAD (vocab.num_regular()).
  static DiffusionSchedule build(int T, int K, const BetaProfile& profile);

  int T() const { return T_; }
  int K() const { return K_; }
  int num_classes() const { return K_ + 2; }
  int mask_index() const { return K_ + 1; }
  const BetaProfile& profile() const { return profile_; }

  // Per-step, 1 <= t <= T.
  double alpha(int t) const { return alpha_.at(t); }
  double beta(int t) const { return beta_.at(t); }
  double gamma(int t) const { return gamma_.at(t); }

  // Cumulative, 0 <= t <= T.
  double alpha_bar(int t) const { return alpha_bar_.at(t); }
  double beta_bar(int t) const { return beta_bar_.at(t); }
  double gamma_bar(int t) const { return gamma_bar_.at(t); }
  double beta_bar_total(int t) const { return (K_ + 1) * beta_bar_.at(t); }

  // q(z_t | z_s) for 0 <= s < t, in closed form from the cumulants.
  StepKernel span_kernel(int s, int t) const;

  nlohmann::json to_json() const;
  static DiffusionSchedule from_json(const nlohmann::json& j);

 private:
  int T_ = 0;
  int K_ = 0;
  BetaProfile profile_;
  std::vector<double> alpha_, beta_, gamma_;
  std::vector<double> alpha_bar_, beta_bar_, gamma_bar_;
};

// Q_t with entry (to, from).
Eigen::MatrixXd transition_matrix(const DiffusionSchedule& s, int t);

// q(z_t | z_0) over all K+2 classes.
Eigen::VectorXd cumulative_marginal(const DiffusionSchedule& s, int t, Token z0);

TokenSeq forward_sample(const TokenSeq& z0, int t, const DiffusionSchedule& s, Rng& rng);

// q(z_{t-1} | z_t, z_0).
Eigen::VectorXd posterior(Token z_t, Token z0, int t, const DiffusionSchedule& s);
// q(z_to | z_t, z_0) for 0 <= to < t.
Eigen::VectorXd posterior_span(Token z_t, Token z0, int t, int to, const DiffusionSchedule& s);

// Reverse mixture p(z_to | z_t) = sum_k p~(k) q(z_to | z_t, z_0 = k) for one
// (t, to) pair, evaluated in O(K) per position.
class ReverseMixture {
 public:
  ReverseMixture(const DiffusionSchedule& s, int t, int to);

  int t() const { return t_; }
  int to() const { return to_; }

  // `probs` covers all K+2 classes and must put zero mass on MASK.
  void mix(Token z_t, std::span<const double> probs, std::span<double> out) const;

  // KL(target || mix(probs)) with its gradient w.r.t. probs. `mixed` receives
  // the mixture. Terms where target is zero are skipped.
  double kl_and_grad(Token z_t, std::span<const double> probs, std::span<const double> target,
                     std::span<double> mixed, std::span<double> grad_probs) const;

 private:
  // q(z_t | z_to = i) for every class i.
  void likelihood(Token z_t, std::span<double> a) const;
  double normalizer(std::span<const double> a, double a_reg_sum, int k) const;

  const DiffusionSchedule* sched_;
  int t_, to_;
  StepKernel step_;
  double ab_, bb_, gb_;  // cumulants at `to`
};

// Per-position reverse distribution for a whole sequence. `denoiser_probs`
// has one row per position over K+2 classes.
Eigen::MatrixXd reverse_distribution(const Eigen::MatrixXd& denoiser_probs, const TokenSeq& z_t, int t,
                                     const DiffusionSchedule& s);
Eigen::MatrixXd fast_reverse_distribution(const Eigen::MatrixXd& denoiser_probs, const TokenSeq& z_t, int t,
                                          int delta, const DiffusionSchedule& s);

// Zeroes field-illegal regular classes in place and renormalizes. With
// `drop_mask` the MASK class is zeroed too.
void restrict_to_legal(std::span<double> dist, Field field, const Vocabulary& vocab, bool drop_mask);

// Draws one token per row of `dist` after restricting each row to its field's
// legal set (and dropping MASK when asked).
TokenSeq sample_tokens(const Eigen::MatrixXd& dist, const Vocabulary& vocab, bool drop_mask, Rng& rng);

}  // namespace layoutcorr
