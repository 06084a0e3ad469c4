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

#include "layoutcorr/denoiser.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "layoutcorr/checkpoint.hpp"
#include "layoutcorr/json_util.hpp"

namespace layoutcorr {

void DenoiserConfig::validate() const {
  if (num_categories < 1 || num_bins < 1 || n_max < 1 || T < 1) {
    throw Error(Errc::kConfig, "denoiser sizes must be positive");
  }
  if (embed_dim < 1 || num_layers < 0 || num_heads < 1 || ff_dim < 1) {
    throw Error(Errc::kConfig, "denoiser architecture sizes must be positive");
  }
  if (embed_dim % num_heads != 0) throw Error(Errc::kConfig, "embed_dim must be divisible by num_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(Errc::kConfig, "dropout must lie in [0, 1)");
  if (!(bin_code_scale >= 0.0)) throw Error(Errc::kConfig, "bin_code_scale must be >= 0");
  if (num_classes() > 256) throw Error(Errc::kConfig, "vocabulary too large");
}

nlohmann::json DenoiserConfig::to_json() const {
  return nlohmann::json{{"num_categories", num_categories},
                        {"num_bins", num_bins},
                        {"n_max", n_max},
                        {"T", T},
                        {"embed_dim", embed_dim},
                        {"num_layers", num_layers},
                        {"num_heads", num_heads},
                        {"ff_dim", ff_dim},
                        {"dropout", dropout},
                        {"element_bias", element_bias},
                        {"bin_code_scale", bin_code_scale},
                        {"init_std", init_std}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  ObjectReader r(j, "denoiser");
  r.get("num_categories", c.num_categories);
  r.get("num_bins", c.num_bins);
  r.get("n_max", c.n_max);
  r.get("T", c.T);
  r.get("embed_dim", c.embed_dim);
  r.get("num_layers", c.num_layers);
  r.get("num_heads", c.num_heads);
  r.get("ff_dim", c.ff_dim);
  r.get("dropout", c.dropout);
  r.get("element_bias", c.element_bias);
  r.get("bin_code_scale", c.bin_code_scale);
  r.get("init_std", c.init_std);
  r.finish();
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"steps", steps},
                        {"batch", batch},
                        {"warmup", warmup},
                        {"final_lr_frac", final_lr_frac},
                        {"lr", opt.lr},
                        {"beta1", opt.beta1},
                        {"beta2", opt.beta2},
                        {"eps", opt.eps},
                        {"weight_decay", opt.weight_decay},
                        {"clip_norm", opt.clip_norm},
                        {"seed", seed},
                        {"ema", ema}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  ObjectReader r(j, "train");
  r.get("steps", c.steps);
  r.get("batch", c.batch);
  r.get("warmup", c.warmup);
  r.get("final_lr_frac", c.final_lr_frac);
  r.get("lr", c.opt.lr);
  r.get("beta1", c.opt.beta1);
  r.get("beta2", c.opt.beta2);
  r.get("eps", c.opt.eps);
  r.get("weight_decay", c.opt.weight_decay);
  r.get("clip_norm", c.opt.clip_norm);
  r.get("seed", c.seed);
  r.get("ema", c.ema);
  r.finish();
  if (c.steps < 0 || c.batch < 1) throw Error(Errc::kConfig, "train steps/batch out of range");
  return c;
}

double TrainConfig::lr_at(int step) const {
  if (warmup > 0 && step < warmup) return opt.lr * (step + 1) / warmup;
  const int span = std::max(1, steps - warmup);
  const double frac = std::clamp(static_cast<double>(step - warmup) / span, 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(M_PI * frac));
  return opt.lr * (final_lr_frac + (1.0 - final_lr_frac) * cosine);
}

namespace {

// Loss of one position given p~ (zero on MASK). Writes dL/dp~ when `grad` is
// non-null. Returns {kl, ce}.
std::pair<double, double> position_loss(const ReverseMixture& mixture, Token z_t, Token z0, std::span<const double> p,
                                        double aux_weight, std::span<double> scratch, double* grad) {
  const int n = static_cast<int>(p.size());
  // scratch holds the point mass, target and mixed rows back to back.
  std::span<double> point = scratch.subspan(0, n);
  std::span<double> target = scratch.subspan(n, n);
  std::span<double> mixed = scratch.subspan(2 * n, n);
  std::fill(point.begin(), point.end(), 0.0);
  point[z0] = 1.0;
  mixture.mix(z_t, point, target);
  double g_local[256];
  std::span<double> g = grad ? std::span<double>(grad, n) : std::span<double>(g_local, n);
  const double kl = mixture.kl_and_grad(z_t, p, target, mixed, g);
  const double pz = std::max(p[z0], kProbFloor);
  g[z0] -= aux_weight / pz;
  return {kl, -std::log(pz)};
}

}  // namespace

template <typename S>
struct DenoiserT<S>::Cache {
  std::vector<typename nn::EncoderBlock<S>::Cache> blocks;
  typename nn::LayerNorm<S>::Cache ln;
  nn::Mat<S> hidden;
  nn::Mat<S> probs;
};

template <typename S>
DenoiserT<S>::DenoiserT(const DenoiserConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), vocab_(cfg.num_categories, cfg.num_bins) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg_.embed_dim;
  const int n = cfg_.num_classes();
  tok_emb_ = params_.add("tok_emb", n, d, false);
  field_emb_ = params_.add("field_emb", kFieldsPerElement, d, false);
  time_emb_ = params_.add("time_emb", cfg_.T + 1, d, false);
  nn::init_normal(*tok_emb_, rng, cfg_.init_std);
  nn::init_normal(*field_emb_, rng, cfg_.init_std);
  nn::init_normal(*time_emb_, rng, cfg_.init_std);
  bin_codes_ = nn::Mat<S>::Zero(n, d);
  bin_codes_.middleRows(cfg_.num_categories, cfg_.num_bins) =
      nn::sinusoid_rows<S>(cfg_.num_bins, d, cfg_.bin_code_scale, 4.0, 4.0 * cfg_.num_bins);
  blocks_.resize(cfg_.num_layers);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    blocks_[l].create(params_, "block" + std::to_string(l), d, cfg_.num_heads, cfg_.ff_dim, cfg_.element_bias, rng,
                      1.0 / std::sqrt(static_cast<double>(d)));
  }
  final_ln_.create(params_, "final_ln", d);
  head_.create(params_, "head", d, n, rng, cfg_.init_std);

  const int len = cfg_.seq_len();
  same_element_ = nn::Mat<S>::Zero(len, len);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < len; ++j) {
      if (i / kFieldsPerElement == j / kFieldsPerElement) same_element_(i, j) = S(1);
    }
  }
  excluded_.resize(kFieldsPerElement);
  for (int f = 0; f < kFieldsPerElement; ++f) {
    const auto& legal = vocab_.legal_mask(static_cast<Field>(f));
    excluded_[f].assign(n, 1);
    for (int k = 0; k < n; ++k) {
      if (legal[k] && k != vocab_.mask_id()) excluded_[f][k] = 0;
    }
  }
}

template <typename S>
void DenoiserT<S>::check_inputs(const std::vector<TokenSeq>& z_t, const std::vector<int>& t) const {
  if (z_t.size() != t.size() || z_t.empty()) throw Error(Errc::kInvalidArgument, "batch/t size mismatch");
  for (std::size_t b = 0; b < z_t.size(); ++b) {
    if (z_t[b].length() != cfg_.seq_len()) {
      throw Error(Errc::kInvalidArgument, "sequence length " + std::to_string(z_t[b].length()) + ", expected " +
                                              std::to_string(cfg_.seq_len()));
    }
    if (t[b] < 1 || t[b] > cfg_.T) throw Error(Errc::kInvalidArgument, "timestep " + std::to_string(t[b]));
    for (Token tok : z_t[b].tokens) {
      if (tok < 0 || tok >= cfg_.num_classes()) throw Error(Errc::kOutOfRange, "token " + std::to_string(tok));
    }
  }
}

template <typename S>
void DenoiserT<S>::forward(const std::vector<TokenSeq>& z_t, const std::vector<int>& t, Cache& c,
                           Rng* dropout_rng) const {
  check_inputs(z_t, t);
  const int len = cfg_.seq_len();
  const int batch = static_cast<int>(z_t.size());
  const int n = cfg_.num_classes();
  nn::Mat<S> x(static_cast<Eigen::Index>(batch) * len, cfg_.embed_dim);
  for (int b = 0; b < batch; ++b) {
    for (int p = 0; p < len; ++p) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * len + p;
      const Token tok = z_t[b].tokens[p];
      x.row(r) = tok_emb_->value.row(tok) + bin_codes_.row(tok) + field_emb_->value.row(p % kFieldsPerElement) +
                 time_emb_->value.row(t[b]);
    }
  }
  c.blocks.resize(blocks_.size());
  nn::Mat<S> y;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l].forward(x, len, &same_element_, y, c.blocks[l], dropout_rng, cfg_.dropout);
    x.swap(y);
  }
  final_ln_.forward(x, c.hidden, c.ln);
  head_.forward(c.hidden, c.probs);
  for (Eigen::Index r = 0; r < c.probs.rows(); ++r) {
    const auto& excl = excluded_[(r % len) % kFieldsPerElement];
    S mx = -std::numeric_limits<S>::infinity();
    for (int k = 0; k < n; ++k) {
      if (!excl[k]) mx = std::max(mx, c.probs(r, k));
    }
    S total = 0;
    for (int k = 0; k < n; ++k) {
      const S e = excl[k] ? S(0) : std::exp(c.probs(r, k) - mx);
      c.probs(r, k) = e;
      total += e;
    }
    c.probs.row(r) /= total;
  }
  if (!c.probs.allFinite()) throw Error(Errc::kNonFinite, "denoiser produced non-finite probabilities");
}

template <typename S>
nn::Mat<S> DenoiserT<S>::denoise_batch(const std::vector<TokenSeq>& z_t, const std::vector<int>& t) const {
  Cache c;
  forward(z_t, t, c, nullptr);
  return std::move(c.probs);
}

template <typename S>
Eigen::MatrixXd DenoiserT<S>::denoise(const TokenSeq& z_t, int t) const {
  Eigen::MatrixXd p = denoise_batch({z_t}, {t}).template cast<double>();
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
  return p;
}

Eigen::MatrixXd item_rows(const nn::Mat<float>& probs, int item, int len) {
  Eigen::MatrixXd p = probs.middleRows(static_cast<Eigen::Index>(item) * len, len).cast<double>();
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
  return p;
}

template <typename S>
HybridLoss DenoiserT<S>::loss_and_dprobs(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t,
                                         const std::vector<int>& t, const DiffusionSchedule& s, double aux_weight,
                                         const nn::Mat<S>& probs, nn::Mat<S>* dlogits) const {
  if (z0.size() != z_t.size()) throw Error(Errc::kInvalidArgument, "z0/z_t batch mismatch");
  if (s.K() != vocab_.num_regular() || s.T() != cfg_.T) {
    throw Error(Errc::kIncompatible, "schedule does not match the denoiser vocabulary/T");
  }
  const int len = cfg_.seq_len();
  const int n = cfg_.num_classes();
  const double scale = 1.0 / (static_cast<double>(z0.size()) * len);
  if (dlogits) dlogits->resize(probs.rows(), probs.cols());
  std::vector<double> p(n), g(n), scratch(3 * n);
  HybridLoss out;
  for (std::size_t b = 0; b < z0.size(); ++b) {
    if (z0[b].length() != len) throw Error(Errc::kInvalidArgument, "z0 length mismatch");
    const ReverseMixture mixture(s, t[b], t[b] - 1);
    for (int pos = 0; pos < len; ++pos) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * len + pos;
      const Token x0 = z0[b].tokens[pos];
      if (x0 == vocab_.mask_id()) throw Error(Errc::kMaskInput, "z0 contains MASK");
      for (int k = 0; k < n; ++k) p[k] = static_cast<double>(probs(r, k));
      const auto [kl, ce] = position_loss(mixture, z_t[b].tokens[pos], x0, p, aux_weight, scratch,
                                          dlogits ? g.data() : nullptr);
      out.vlb += kl * scale;
      out.aux += ce * scale;
      if (dlogits) {
        double dot = 0.0;
        for (int k = 0; k < n; ++k) dot += p[k] * g[k];
        for (int k = 0; k < n; ++k) (*dlogits)(r, k) = static_cast<S>(p[k] * (g[k] - dot) * scale);
      }
    }
  }
  out.total = out.vlb + aux_weight * out.aux;
  return out;
}

template <typename S>
HybridLoss DenoiserT<S>::hybrid_loss(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t,
                                     const std::vector<int>& t, const DiffusionSchedule& s, double aux_weight,
                                     Rng* dropout_rng) {
  Cache c;
  forward(z_t, t, c, dropout_rng);
  nn::Mat<S> dlogits;
  const HybridLoss loss = loss_and_dprobs(z0, z_t, t, s, aux_weight, c.probs, &dlogits);

  const int len = cfg_.seq_len();
  nn::Mat<S> dh, dx, dprev;
  head_.backward(c.hidden, dlogits, &dh);
  final_ln_.backward(dh, c.ln, dx);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    blocks_[l].backward(dx, len, &same_element_, c.blocks[l], dprev);
    dx.swap(dprev);
  }
  for (std::size_t b = 0; b < z_t.size(); ++b) {
    for (int p = 0; p < len; ++p) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * len + p;
      tok_emb_->grad.row(z_t[b].tokens[p]) += dx.row(r);
      field_emb_->grad.row(p % kFieldsPerElement) += dx.row(r);
      time_emb_->grad.row(t[b]) += dx.row(r);
    }
  }
  return loss;
}

template <typename S>
HybridLoss DenoiserT<S>::eval_loss(const std::vector<TokenSeq>& z0, const std::vector<TokenSeq>& z_t,
                                   const std::vector<int>& t, const DiffusionSchedule& s, double aux_weight) const {
  Cache c;
  forward(z_t, t, c, nullptr);
  return loss_and_dprobs(z0, z_t, t, s, aux_weight, c.probs, nullptr);
}

template class DenoiserT<float>;
template class DenoiserT<double>;

double uniform_baseline_loss(const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s, const Vocabulary& vocab,
                             double aux_weight, int samples, Rng& rng) {
  if (corpus.empty() || samples < 1) throw Error(Errc::kInvalidArgument, "baseline needs data");
  const int n = vocab.size();
  std::array<std::vector<double>, kFieldsPerElement> uniform;
  for (int f = 0; f < kFieldsPerElement; ++f) {
    uniform[f].assign(n, 0.0);
    const auto& legal = vocab.legal_tokens(static_cast<Field>(f));
    for (Token k : legal) uniform[f][k] = 1.0 / legal.size();
  }
  std::vector<double> scratch(3 * n);
  double total = 0.0;
  long count = 0;
  for (int i = 0; i < samples; ++i) {
    const TokenSeq& z0 = corpus[rng.below(corpus.size())];
    const int t = rng.range(1, s.T());
    const TokenSeq zt = forward_sample(z0, t, s, rng);
    const ReverseMixture mixture(s, t, t - 1);
    for (int p = 0; p < z0.length(); ++p) {
      const auto [kl, ce] =
          position_loss(mixture, zt.tokens[p], z0.tokens[p], uniform[p % kFieldsPerElement], aux_weight, scratch,
                        nullptr);
      total += kl + aux_weight * ce;
      ++count;
    }
  }
  return total / count;
}

void corrupt_batch(const std::vector<TokenSeq>& z0, const DiffusionSchedule& s, Rng& rng, std::vector<TokenSeq>& z_t,
                   std::vector<int>& t) {
  z_t.resize(z0.size());
  t.resize(z0.size());
  for (std::size_t b = 0; b < z0.size(); ++b) {
    t[b] = rng.range(1, s.T());
    z_t[b] = forward_sample(z0[b], t[b], s, rng);
  }
}

TrainLog train_denoiser(Denoiser& model, const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s,
                        const TrainConfig& tc, double aux_weight, const ProgressFn& progress) {
  if (corpus.empty()) throw Error(Errc::kInvalidArgument, "training corpus is empty");
  Rng rng(tc.seed);
  nn::AdamW<float> opt(model.params(), tc.opt);
  TrainLog log;
  log.loss.reserve(tc.steps);
  std::vector<TokenSeq> z0(tc.batch), zt;
  std::vector<int> t;
  double ema = 0.0;
  const bool use_dropout = model.config().dropout > 0.0;
  for (int step = 0; step < tc.steps; ++step) {
    for (auto& z : z0) z = corpus[rng.below(corpus.size())];
    corrupt_batch(z0, s, rng, zt, t);
    model.params().zero_grad();
    const HybridLoss loss = model.hybrid_loss(z0, zt, t, s, aux_weight, use_dropout ? &rng : nullptr);
    if (!std::isfinite(loss.total)) {
      throw Error(Errc::kDivergence, "denoiser loss is " + std::to_string(loss.total) + " at step " +
                                         std::to_string(step));
    }
    opt.step(tc.lr_at(step));
    if (!model.params().all_finite()) {
      throw Error(Errc::kDivergence, "non-finite denoiser parameters after step " + std::to_string(step));
    }
    ema = step == 0 ? loss.total : tc.ema * ema + (1.0 - tc.ema) * loss.total;
    log.loss.push_back(loss.total);
    if (progress && tc.log_every > 0 && (step + 1) % tc.log_every == 0) progress(step + 1, ema);
  }
  log.final_ema = ema;
  return log;
}

double token_accuracy(const Denoiser& model, const std::vector<TokenSeq>& corpus, const DiffusionSchedule& s,
                      int t_lo, int t_hi, int samples, Rng& rng) {
  if (corpus.empty()) throw Error(Errc::kInvalidArgument, "accuracy needs data");
  constexpr int kChunk = 64;
  long hits = 0, total = 0;
  for (int done = 0; done < samples; done += kChunk) {
    const int m = std::min(kChunk, samples - done);
    std::vector<TokenSeq> z0(m), zt(m);
    std::vector<int> t(m);
    for (int i = 0; i < m; ++i) {
      z0[i] = corpus[rng.below(corpus.size())];
      t[i] = rng.range(t_lo, t_hi);
      zt[i] = forward_sample(z0[i], t[i], s, rng);
    }
    const nn::Mat<float> probs = model.denoise_batch(zt, t);
    const int len = model.config().seq_len();
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < len; ++p) {
        Eigen::Index best;
        probs.row(static_cast<Eigen::Index>(i) * len + p).maxCoeff(&best);
        hits += (static_cast<Token>(best) == z0[i].tokens[p]);
        ++total;
      }
    }
  }
  return static_cast<double>(hits) / total;
}

void save_denoiser(const Denoiser& model, const std::string& path, const nlohmann::json& meta) {
  save_checkpoint(path, "denoiser", model.config().to_json(), model.params(), meta);
}

Denoiser load_denoiser(const std::string& path) {
  const CheckpointHeader h = read_checkpoint_header(path);
  if (h.kind != "denoiser") throw Error(Errc::kIncompatible, path + " holds a " + h.kind + " checkpoint");
  Denoiser model(DenoiserConfig::from_json(h.config), 0);
  load_checkpoint(path, "denoiser", model.params());
  return model;
}

}  // namespace layoutcorr
