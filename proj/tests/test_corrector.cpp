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

#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "grad_check.hpp"
#include "layoutcorr/corrector.hpp"
#include "layoutcorr/experiments.hpp"

using namespace layoutcorr;

namespace {

CorrectorConfig tiny_config() {
  CorrectorConfig c;
  c.num_categories = 3;
  c.num_bins = 6;
  c.n_max = 3;
  c.T = 20;
  c.embed_dim = 16;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ff_dim = 24;
  return c;
}

DenoiserConfig tiny_denoiser() {
  DenoiserConfig c;
  c.num_categories = 3;
  c.num_bins = 6;
  c.n_max = 3;
  c.T = 20;
  c.embed_dim = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ff_dim = 24;
  return c;
}

TokenSeq random_clean(Rng& rng, const Vocabulary& v, int n_max, int min_n = 1) {
  Layout l;
  const int n = rng.range(min_n, n_max);
  for (int i = 0; i < n; ++i) {
    l.elements.push_back({rng.range(0, v.num_categories() - 1), rng.range(1, v.num_bins()),
                          rng.range(1, v.num_bins()), rng.range(1, v.num_bins()), rng.range(1, v.num_bins())});
  }
  return tokenize(l, v, n_max);
}

// Moves element slot i to perm[i].
TokenSeq permute(const TokenSeq& s, const std::vector<int>& perm) {
  TokenSeq out = s;
  for (std::size_t e = 0; e < perm.size(); ++e) {
    for (int f = 0; f < kFieldsPerElement; ++f) {
      out.tokens[perm[e] * kFieldsPerElement + f] = s.tokens[e * kFieldsPerElement + f];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scores lie in [0, 1] and are equivariant to element order") {
  const CorrectorConfig cfg = tiny_config();
  const Corrector c(cfg, 5);
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const TokenSeq z = random_clean(rng, c.vocab(), cfg.n_max);
    const std::vector<int> perm = {2, 0, 1};
    const auto a = c.score(z, 7);
    const auto b = c.score(permute(z, perm), 7);
    for (int e = 0; e < cfg.n_max; ++e) {
      for (int f = 0; f < kFieldsPerElement; ++f) {
        const double x = a[e * kFieldsPerElement + f];
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        CHECK(b[perm[e] * kFieldsPerElement + f] == doctest::Approx(x).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("PAD positions are scored like any other token") {
  const CorrectorConfig cfg = tiny_config();
  const Corrector c(cfg, 5);
  Layout l;
  l.elements.push_back({1, 2, 3, 4, 5});
  const TokenSeq z = tokenize(l, c.vocab(), cfg.n_max);
  const auto s = c.score(z, 3);
  REQUIRE(s.size() == z.tokens.size());
  for (int p = kFieldsPerElement; p < z.length(); ++p) {
    CHECK(z.tokens[p] == c.vocab().pad_id());
    CHECK(std::isfinite(s[p]));
  }
}

TEST_CASE("MASK in the corrector input is rejected") {
  const CorrectorConfig cfg = tiny_config();
  const Corrector c(cfg, 5);
  Rng rng(2);
  TokenSeq z = random_clean(rng, c.vocab(), cfg.n_max);
  z.tokens[1] = c.vocab().mask_id();
  try {
    c.score(z, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMaskInput);
  }
}

TEST_CASE("analytic BCE values") {
  const std::vector<std::uint8_t> m = {1, 0, 1, 1, 0};
  std::vector<double> exact(m.begin(), m.end());
  CHECK(bce_mean(exact, m) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bce_mean(exact, m) >= 0.0);
  const std::vector<double> half(m.size(), 0.5);
  CHECK(bce_mean(half, m) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("logit BCE matches the clamped probability form") {
  const CorrectorConfig cfg = tiny_config();
  const CorrectorT<double> c(cfg, 9);
  Rng rng(3);
  std::vector<TokenSeq> z;
  std::vector<int> t;
  std::vector<std::vector<std::uint8_t>> m;
  std::vector<double> flat_scores;
  std::vector<std::uint8_t> flat_m;
  for (int b = 0; b < 4; ++b) {
    z.push_back(random_clean(rng, c.vocab(), cfg.n_max));
    t.push_back(rng.range(1, cfg.T));
    m.emplace_back();
    for (int p = 0; p < cfg.seq_len(); ++p) m.back().push_back(rng.bernoulli(0.5));
  }
  const auto scores = c.score_batch(z, t);
  for (int b = 0; b < 4; ++b) {
    flat_scores.insert(flat_scores.end(), scores[b].begin(), scores[b].end());
    flat_m.insert(flat_m.end(), m[b].begin(), m[b].end());
  }
  CHECK(c.eval_bce(z, t, m) == doctest::Approx(bce_mean(flat_scores, flat_m)).epsilon(1e-9));
}

TEST_CASE("BCE gradients match finite differences") {
  const CorrectorConfig cfg = tiny_config();
  CorrectorT<double> c(cfg, 11);
  // Larger weights make the check exercise non-trivial attention patterns.
  Rng init(12);
  for (const auto& p : c.params().all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.3 * init.normal();
  }
  Rng rng(13);
  std::vector<TokenSeq> z;
  std::vector<int> t;
  std::vector<std::vector<std::uint8_t>> m;
  for (int b = 0; b < 3; ++b) {
    z.push_back(random_clean(rng, c.vocab(), cfg.n_max));
    t.push_back(rng.range(1, cfg.T));
    m.emplace_back();
    for (int p = 0; p < cfg.seq_len(); ++p) m.back().push_back(rng.bernoulli(0.6));
  }
  c.params().zero_grad();
  const double loss = c.bce_loss(z, t, m);
  CHECK(loss == doctest::Approx(c.eval_bce(z, t, m)).epsilon(1e-12));
  const auto r = gradcheck::run(c.params(), [&] { return c.eval_bce(z, t, m); }, 60, rng);
  CHECK(r.checked == 60);
  CHECK_MESSAGE(r.worst_rel < 1e-4, r.worst_name);
}

TEST_CASE("training batches are mask-free and targets follow their definition") {
  const Denoiser d(tiny_denoiser(), 4);
  const auto s = DiffusionSchedule::build(20, d.vocab().num_regular(), BetaProfile::linear_up(0.1));
  Rng rng(14);
  std::vector<TokenSeq> z0;
  for (int i = 0; i < 32; ++i) z0.push_back(random_clean(rng, d.vocab(), 3));
  for (CorrectorObjective obj : {CorrectorObjective::kCorrectness, CorrectorObjective::kMaskEstimation}) {
    const CorrectorTrainBatch b = make_train_batch(d, z0, s, obj, rng);
    REQUIRE(b.z_hat.size() == z0.size());
    for (std::size_t i = 0; i < z0.size(); ++i) {
      CHECK(b.t[i] >= 1);
      CHECK(b.t[i] <= 20);
      CHECK_FALSE(b.z_hat[i].has_mask(d.vocab()));
      CHECK(b.targets[i] == corrector_targets(b.z0[i], b.z_t[i], b.z_hat[i], obj, d.vocab()));
      for (int p = 0; p < b.z0[i].length(); ++p) {
        CHECK(d.vocab().is_legal(field_at(p), b.z_hat[i].tokens[p]));
        const bool expect = obj == CorrectorObjective::kCorrectness ? b.z_hat[i].tokens[p] == b.z0[i].tokens[p]
                                                                     : b.z_t[i].tokens[p] != d.vocab().mask_id();
        CHECK(b.targets[i][p] == expect);
      }
    }
  }
}

TEST_CASE("threshold selection without noise is exact") {
  Rng rng(15);
  SelectConfig cfg;
  cfg.tau = 0.0;
  cfg.threshold = 0.7;
  const std::vector<double> high = {0.9, 0.71, 0.8, 1.0};
  CHECK(select_tokens_to_mask(high, {}, cfg, 0.5, rng).empty());
  const std::vector<double> mixed = {0.9, 0.2, 0.69, 0.7, 0.1};
  CHECK(select_tokens_to_mask(mixed, {}, cfg, 0.5, rng) == std::vector<int>{1, 2, 4});
  const std::vector<std::uint8_t> prot = {0, 1, 0, 0, 0};
  CHECK(select_tokens_to_mask(mixed, prot, cfg, 0.5, rng) == std::vector<int>{2, 4});
}

TEST_CASE("protected positions are never selected") {
  Rng rng(16);
  std::vector<double> scores(40);
  std::vector<std::uint8_t> prot(40);
  for (int seed = 0; seed < 200; ++seed) {
    for (int i = 0; i < 40; ++i) {
      scores[i] = rng.uniform();
      prot[i] = rng.bernoulli(0.3);
    }
    for (SelectMode mode : {SelectMode::kThreshold, SelectMode::kLowestK}) {
      SelectConfig cfg;
      cfg.mode = mode;
      cfg.tau = 0.3;
      cfg.logit_space = seed % 2 == 0;
      for (int p : select_tokens_to_mask(scores, prot, cfg, rng.uniform(), rng)) CHECK_FALSE(prot[p]);
    }
  }
}

TEST_CASE("lowest-k picks floor(len * gamma_bar) lowest unprotected scores") {
  Rng rng(17);
  SelectConfig cfg;
  cfg.mode = SelectMode::kLowestK;
  cfg.tau = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int len = 15;
    std::vector<double> scores(len);
    std::vector<std::uint8_t> prot(len);
    for (int i = 0; i < len; ++i) {
      scores[i] = rng.uniform();
      prot[i] = rng.bernoulli(0.2);
    }
    const double gb = rng.uniform();
    const auto sel = select_tokens_to_mask(scores, prot, cfg, gb, rng);
    // Oracle: sort unprotected by score.
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < len; ++i) {
      if (!prot[i]) cand.push_back({scores[i], i});
    }
    std::sort(cand.begin(), cand.end());
    const std::size_t k = std::min(cand.size(), static_cast<std::size_t>(std::floor(len * gb)));
    std::set<int> expect;
    for (std::size_t i = 0; i < k; ++i) expect.insert(cand[i].second);
    CHECK(std::set<int>(sel.begin(), sel.end()) == expect);
  }
}

TEST_CASE("centered Gumbel noise does not bias the threshold") {
  // With every score at the threshold, each position is selected with
  // probability P(g < mean) = exp(-exp(-gamma_E)).
  Rng rng(18);
  SelectConfig cfg;
  cfg.threshold = 0.5;
  cfg.tau = 0.1;
  const std::vector<double> scores(1000, 0.5);
  long hits = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) hits += select_tokens_to_mask(scores, {}, cfg, 0.0, rng).size();
  const double p = std::exp(-std::exp(-kEulerGamma));
  const double n = 1000.0 * reps;
  CHECK(std::abs(hits / n - p) < 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("untrained corrector detects at chance level") {
  CorrectorConfig cfg = tiny_config();
  cfg.n_max = 4;
  cfg.init_std = 1e-4;  // near-constant scores
  const Corrector c(cfg, 19);
  Rng rng(20);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(random_clean(rng, c.vocab(), cfg.n_max, 2));
  const int trials = 3000;
  const DetectionResult r = detection_accuracy(c, corpus, 3, 5, trials, rng);
  // Analytic chance: mean of 3 / (5 N).
  CHECK(r.chance > 0.0);
  const double sd = std::sqrt(r.chance * (1 - r.chance) / (3.0 * trials));
  CHECK(std::abs(r.accuracy - r.chance) < 5.0 * sd + 0.01);
}

TEST_CASE("corrector checkpoint round trip") {
  const CorrectorConfig cfg = tiny_config();
  const Corrector c(cfg, 21);
  const std::string path = "corrector_roundtrip.ckpt";
  save_corrector(c, path);
  const Corrector back = load_corrector(path);
  CHECK(back.config().to_json() == cfg.to_json());
  for (std::size_t i = 0; i < c.params().all().size(); ++i) {
    CHECK(c.params().all()[i]->value == back.params().all()[i]->value);
  }
  try {
    load_denoiser(path);
    FAIL("expected kind mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kIncompatible);
  }
  std::remove(path.c_str());
}
