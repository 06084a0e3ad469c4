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

#include "layoutcorr/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "layoutcorr/checkpoint.hpp"
#include "layoutcorr/json_util.hpp"

namespace layoutcorr {

CorrectorObjective parse_objective(const std::string& name) {
  if (name == "correctness") return CorrectorObjective::kCorrectness;
  if (name == "mask-estimation") return CorrectorObjective::kMaskEstimation;
  throw Error(Errc::kConfig, "unknown corrector objective '" + name + "'");
}

std::string objective_name(CorrectorObjective o) {
  return o == CorrectorObjective::kCorrectness ? "correctness" : "mask-estimation";
}

SelectMode parse_select_mode(const std::string& name) {
  if (name == "threshold") return SelectMode::kThreshold;
  if (name == "lowest-k") return SelectMode::kLowestK;
  throw Error(Errc::kConfig, "unknown selection mode '" + name + "'");
}

std::string select_mode_name(SelectMode m) { return m == SelectMode::kThreshold ? "threshold" : "lowest-k"; }

void CorrectorConfig::validate() const {
  if (num_categories < 1 || num_bins < 1 || n_max < 1 || T < 1) {
    throw Error(Errc::kConfig, "corrector sizes must be positive");
  }
  if (embed_dim < 1 || num_layers < 0 || num_heads < 1 || ff_dim < 1) {
    throw Error(Errc::kConfig, "corrector architecture sizes must be positive");
  }
  if (embed_dim % num_heads != 0) throw Error(Errc::kConfig, "embed_dim must be divisible by num_heads");
  if (!(bin_code_scale >= 0.0)) throw Error(Errc::kConfig, "bin_code_scale must be >= 0");
  if (edge_freqs < 0) throw Error(Errc::kConfig, "edge_freqs must be >= 0");
}

nlohmann::json CorrectorConfig::to_json() const {
  return nlohmann::json{{"num_categories", num_categories},
                        {"num_bins", num_bins},
                        {"n_max", n_max},
                        {"T", T},
                        {"embed_dim", embed_dim},
                        {"num_layers", num_layers},
                        {"num_heads", num_heads},
                        {"ff_dim", ff_dim},
                        {"bin_code_scale", bin_code_scale},
                        {"edge_freqs", edge_freqs},
                        {"init_std", init_std},
                        {"objective", objective_name(objective)}};
}

CorrectorConfig CorrectorConfig::from_json(const nlohmann::json& j) {
  CorrectorConfig c;
  ObjectReader r(j, "corrector");
  r.get("num_categories", c.num_categories);
  r.get("num_bins", c.num_bins);
  r.get("n_max", c.n_max);
  r.get("T", c.T);
  r.get("embed_dim", c.embed_dim);
  r.get("num_layers", c.num_layers);
  r.get("num_heads", c.num_heads);
  r.get("ff_dim", c.ff_dim);
  r.get("bin_code_scale", c.bin_code_scale);
  r.get("edge_freqs", c.edge_freqs);
  r.get("init_std", c.init_std);
  std::string obj = objective_name(c.objective);
  r.get("objective", obj);
  c.objective = parse_objective(obj);
  r.finish();
  c.validate();
  return c;
}

CorrectorConfig CorrectorConfig::matching(const DenoiserConfig& d) {
  CorrectorConfig c;
  c.num_categories = d.num_categories;
  c.num_bins = d.num_bins;
  c.n_max = d.n_max;
  c.T = d.T;
  c.embed_dim = d.embed_dim;
  return c;
}

template <typename S>
struct CorrectorT<S>::Cache {
  nn::Mat<S> concat, f1, g1;
  std::vector<typename nn::EncoderBlock<S>::Cache> blocks;
  typename nn::LayerNorm<S>::Cache ln;
  nn::Mat<S> hidden, logits;
};

template <typename S>
CorrectorT<S>::CorrectorT(const CorrectorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), vocab_(cfg.num_categories, cfg.num_bins) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg_.embed_dim;
  tok_emb_ = params_.add("tok_emb", cfg_.num_classes(), d, false);
  time_emb_ = params_.add("time_emb", cfg_.T + 1, d, false);
  nn::init_normal(*tok_emb_, rng, cfg_.init_std);
  nn::init_normal(*time_emb_, rng, cfg_.init_std);
  bin_codes_ = nn::Mat<S>::Zero(cfg_.num_classes(), d);
  bin_codes_.middleRows(cfg_.num_categories, cfg_.num_bins) =
      nn::sinusoid_rows<S>(cfg_.num_bins, d, cfg_.bin_code_scale, 4.0, 4.0 * cfg_.num_bins);
  // Periods from one bin up to twice the canvas.
  for (int k = 0; k < cfg_.edge_freqs; ++k) {
    const double frac = cfg_.edge_freqs > 1 ? static_cast<double>(k) / (cfg_.edge_freqs - 1) : 0.0;
    const double period = std::pow(2.0 * cfg_.num_bins, frac) / cfg_.num_bins;
    edge_omega_.push_back(2.0 * std::numbers::pi / period);
  }
  const int in = kFieldsPerElement * d + cfg_.edge_code_dim();
  fuse1_.create(params_, "fuse1", in, d, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  fuse2_.create(params_, "fuse2", d, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  blocks_.resize(cfg_.num_layers);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    blocks_[l].create(params_, "block" + std::to_string(l), d, cfg_.num_heads, cfg_.ff_dim, false, rng,
                      1.0 / std::sqrt(static_cast<double>(d)));
  }
  final_ln_.create(params_, "final_ln", d);
  head_.create(params_, "head", d, kFieldsPerElement, rng, cfg_.init_std);
}

template <typename S>
void CorrectorT<S>::forward(const std::vector<TokenSeq>& seqs, const std::vector<int>& t, Cache& c) const {
  if (seqs.empty() || seqs.size() != t.size()) throw Error(Errc::kInvalidArgument, "batch/t size mismatch");
  const int d = cfg_.embed_dim;
  const int slots = cfg_.n_max;
  const Eigen::Index rows = static_cast<Eigen::Index>(seqs.size()) * slots;
  c.concat.resize(rows, kFieldsPerElement * d + cfg_.edge_code_dim());
  c.concat.rightCols(cfg_.edge_code_dim()).setZero();
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    if (seqs[b].length() != cfg_.seq_len()) throw Error(Errc::kInvalidArgument, "sequence length mismatch");
    if (t[b] < 1 || t[b] > cfg_.T) throw Error(Errc::kInvalidArgument, "timestep " + std::to_string(t[b]));
    for (int p = 0; p < cfg_.seq_len(); ++p) {
      const Token tok = seqs[b].tokens[p];
      if (tok == vocab_.mask_id()) throw Error(Errc::kMaskInput, "corrector input contains MASK");
      if (tok < 0 || tok >= cfg_.num_classes()) throw Error(Errc::kOutOfRange, "token " + std::to_string(tok));
      const Eigen::Index r = static_cast<Eigen::Index>(b) * slots + p / kFieldsPerElement;
      c.concat.block(r, (p % kFieldsPerElement) * d, 1, d) = tok_emb_->value.row(tok) + bin_codes_.row(tok);
    }
    if (cfg_.edge_freqs == 0) continue;
    for (int e = 0; e < slots; ++e) {
      const Token* f = seqs[b].tokens.data() + e * kFieldsPerElement;
      bool geometric = true;
      for (int k = 1; k < kFieldsPerElement; ++k) {
        geometric = geometric && f[k] >= cfg_.num_categories && f[k] < vocab_.pad_id();
      }
      if (!geometric) continue;
      const int cats = cfg_.num_categories;
      const Rect box = to_rect(dequantize(
          Element{0, f[1] - cats + 1, f[2] - cats + 1, f[3] - cats + 1, f[4] - cats + 1}, vocab_));
      const double lines[6] = {box.left, (box.left + box.right) / 2, box.right,
                               box.top,  (box.top + box.bottom) / 2, box.bottom};
      const Eigen::Index r = static_cast<Eigen::Index>(b) * slots + e;
      Eigen::Index col = static_cast<Eigen::Index>(kFieldsPerElement) * d;
      for (double v : lines) {
        for (double w : edge_omega_) {
          c.concat(r, col++) = static_cast<S>(std::sin(w * v));
          c.concat(r, col++) = static_cast<S>(std::cos(w * v));
        }
      }
    }
  }
  fuse1_.forward(c.concat, c.f1);
  nn::Gelu<S>::forward(c.f1, c.g1);
  nn::Mat<S> x;
  fuse2_.forward(c.g1, x);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    x.middleRows(static_cast<Eigen::Index>(b) * slots, slots).rowwise() += time_emb_->value.row(t[b]);
  }
  c.blocks.resize(blocks_.size());
  nn::Mat<S> y;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l].forward(x, slots, nullptr, y, c.blocks[l], nullptr, 0.0);
    x.swap(y);
  }
  final_ln_.forward(x, c.hidden, c.ln);
  head_.forward(c.hidden, c.logits);
}

template <typename S>
nn::Mat<S> CorrectorT<S>::logits_batch(const std::vector<TokenSeq>& seqs, const std::vector<int>& t) const {
  Cache c;
  forward(seqs, t, c);
  // Row-major (batch*slots) x 5 has the same layout as batch x (5*slots).
  return Eigen::Map<const nn::Mat<S>>(c.logits.data(), static_cast<Eigen::Index>(seqs.size()), cfg_.seq_len());
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

template <typename S>
std::vector<std::vector<double>> CorrectorT<S>::score_batch(const std::vector<TokenSeq>& seqs,
                                                            const std::vector<int>& t) const {
  const nn::Mat<S> logits = logits_batch(seqs, t);
  std::vector<std::vector<double>> out(seqs.size(), std::vector<double>(cfg_.seq_len()));
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    for (int p = 0; p < cfg_.seq_len(); ++p) out[b][p] = sigmoid(static_cast<double>(logits(b, p)));
  }
  return out;
}

template <typename S>
std::vector<double> CorrectorT<S>::score(const TokenSeq& seq, int t) const {
  return score_batch({seq}, {t}).front();
}

template <typename S>
double CorrectorT<S>::eval_bce(const std::vector<TokenSeq>& seqs, const std::vector<int>& t,
                               const std::vector<std::vector<std::uint8_t>>& targets) const {
  const nn::Mat<S> logits = logits_batch(seqs, t);
  if (targets.size() != seqs.size()) throw Error(Errc::kInvalidArgument, "target batch mismatch");
  double total = 0.0;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    for (int p = 0; p < cfg_.seq_len(); ++p) {
      const double x = static_cast<double>(logits(b, p));
      total += softplus(x) - targets[b][p] * x;
    }
  }
  return total / (static_cast<double>(seqs.size()) * cfg_.seq_len());
}

template <typename S>
double CorrectorT<S>::bce_loss(const std::vector<TokenSeq>& seqs, const std::vector<int>& t,
                               const std::vector<std::vector<std::uint8_t>>& targets) {
  Cache c;
  forward(seqs, t, c);
  if (targets.size() != seqs.size()) throw Error(Errc::kInvalidArgument, "target batch mismatch");
  const int len = cfg_.seq_len();
  const int slots = cfg_.n_max;
  const double scale = 1.0 / (static_cast<double>(seqs.size()) * len);
  nn::Mat<S> dlogits(c.logits.rows(), c.logits.cols());
  double total = 0.0;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    if (static_cast<int>(targets[b].size()) != len) throw Error(Errc::kInvalidArgument, "target length mismatch");
    for (int p = 0; p < len; ++p) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * slots + p / kFieldsPerElement;
      const int f = p % kFieldsPerElement;
      const double x = static_cast<double>(c.logits(r, f));
      const double y = targets[b][p];
      total += softplus(x) - y * x;
      dlogits(r, f) = static_cast<S>((sigmoid(x) - y) * scale);
    }
  }

  const int d = cfg_.embed_dim;
  nn::Mat<S> dh, dx, dprev;
  head_.backward(c.hidden, dlogits, &dh);
  final_ln_.backward(dh, c.ln, dx);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    blocks_[l].backward(dx, slots, nullptr, c.blocks[l], dprev);
    dx.swap(dprev);
  }
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    time_emb_->grad.row(t[b]) += dx.middleRows(static_cast<Eigen::Index>(b) * slots, slots).colwise().sum();
  }
  nn::Mat<S> dg1, df1, dconcat;
  fuse2_.backward(c.g1, dx, &dg1);
  nn::Gelu<S>::backward(c.f1, dg1, df1);
  fuse1_.backward(c.concat, df1, &dconcat);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    for (int p = 0; p < len; ++p) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * slots + p / kFieldsPerElement;
      tok_emb_->grad.row(seqs[b].tokens[p]) += dconcat.block(r, (p % kFieldsPerElement) * d, 1, d);
    }
  }
  return total * scale;
}

template class CorrectorT<float>;
template class CorrectorT<double>;

double bce_mean(std::span<const double> scores, std::span<const std::uint8_t> targets, double eps) {
  if (scores.size() != targets.size() || scores.empty()) {
    throw Error(Errc::kInvalidArgument, "scores/targets size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], eps, 1.0 - eps);
    total -= targets[i] ? std::log(p) : std::log1p(-p);
  }
  return total / scores.size();
}

std::vector<std::uint8_t> corrector_targets(const TokenSeq& z0, const TokenSeq& z_t, const TokenSeq& z_hat,
                                            CorrectorObjective objective, const Vocabulary& vocab) {
  std::vector<std::uint8_t> m(z0.tokens.size());
  for (std::size_t p = 0; p < m.size(); ++p) {
    m[p] = objective == CorrectorObjective::kCorrectness ? z_hat.tokens[p] == z0.tokens[p]
                                                         : z_t.tokens[p] != vocab.mask_id();
  }
  return m;
}

CorrectorTrainBatch make_train_batch(const Denoiser& denoiser, const std::vector<TokenSeq>& z0,
                                     const DiffusionSchedule& s, CorrectorObjective objective, Rng& rng) {
  CorrectorTrainBatch batch;
  batch.z0 = z0;
  corrupt_batch(z0, s, rng, batch.z_t, batch.t);
  const nn::Mat<float> probs = denoiser.denoise_batch(batch.z_t, batch.t);
  const int len = denoiser.config().seq_len();
  const Vocabulary& vocab = denoiser.vocab();
  batch.z_hat.resize(z0.size());
  batch.targets.resize(z0.size());
  for (std::size_t b = 0; b < z0.size(); ++b) {
    const Eigen::MatrixXd p = item_rows(probs, static_cast<int>(b), len);
    const Eigen::MatrixXd rev = reverse_distribution(p, batch.z_t[b], batch.t[b], s);
    batch.z_hat[b] = sample_tokens(rev, vocab, true, rng);
    batch.targets[b] = corrector_targets(z0[b], batch.z_t[b], batch.z_hat[b], objective, vocab);
  }
  return batch;
}

TrainLog train_corrector(Corrector& corrector, const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                         const DiffusionSchedule& s, const TrainConfig& tc, const ProgressFn& progress) {
  if (corpus.empty()) throw Error(Errc::kInvalidArgument, "training corpus is empty");
  if (corrector.config().seq_len() != denoiser.config().seq_len() ||
      corrector.config().num_classes() != denoiser.config().num_classes()) {
    throw Error(Errc::kIncompatible, "corrector and denoiser vocabularies differ");
  }
  Rng rng(tc.seed);
  nn::AdamW<float> opt(corrector.params(), tc.opt);
  TrainLog log;
  log.loss.reserve(tc.steps);
  std::vector<TokenSeq> z0(tc.batch);
  double ema = 0.0;
  for (int step = 0; step < tc.steps; ++step) {
    for (auto& z : z0) z = corpus[rng.below(corpus.size())];
    const CorrectorTrainBatch batch = make_train_batch(denoiser, z0, s, corrector.config().objective, rng);
    corrector.params().zero_grad();
    const double loss = corrector.bce_loss(batch.z_hat, batch.t, batch.targets);
    if (!std::isfinite(loss)) {
      throw Error(Errc::kDivergence, "corrector loss is " + std::to_string(loss) + " at step " + std::to_string(step));
    }
    opt.step(tc.lr_at(step));
    if (!corrector.params().all_finite()) {
      throw Error(Errc::kDivergence, "non-finite corrector parameters after step " + std::to_string(step));
    }
    ema = step == 0 ? loss : tc.ema * ema + (1.0 - tc.ema) * loss;
    log.loss.push_back(loss);
    if (progress && tc.log_every > 0 && (step + 1) % tc.log_every == 0) progress(step + 1, ema);
  }
  log.final_ema = ema;
  return log;
}

double heldout_bce(const Corrector& corrector, const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                   const DiffusionSchedule& s, int samples, Rng& rng) {
  if (corpus.empty() || samples < 1) throw Error(Errc::kInvalidArgument, "held-out BCE needs data");
  constexpr int kChunk = 64;
  double total = 0.0;
  for (int done = 0; done < samples; done += kChunk) {
    const int m = std::min(kChunk, samples - done);
    std::vector<TokenSeq> z0(m);
    for (auto& z : z0) z = corpus[rng.below(corpus.size())];
    const CorrectorTrainBatch batch = make_train_batch(denoiser, z0, s, corrector.config().objective, rng);
    total += corrector.eval_bce(batch.z_hat, batch.t, batch.targets) * m;
  }
  return total / samples;
}

std::vector<int> select_tokens_to_mask(std::span<const double> scores, std::span<const std::uint8_t> protected_pos,
                                       const SelectConfig& cfg, double gamma_bar, Rng& rng) {
  if (!protected_pos.empty() && protected_pos.size() != scores.size()) {
    throw Error(Errc::kInvalidArgument, "protected mask length mismatch");
  }
  const int len = static_cast<int>(scores.size());
  std::vector<double> perturbed(len);
  for (int i = 0; i < len; ++i) {
    const double noise = cfg.tau > 0.0 ? cfg.tau * (rng.gumbel() - kEulerGamma) : 0.0;
    if (cfg.logit_space) {
      const double p = std::clamp(scores[i], 1e-12, 1.0 - 1e-12);
      perturbed[i] = sigmoid(std::log(p / (1.0 - p)) + noise);
    } else {
      perturbed[i] = scores[i] + noise;
    }
  }
  const auto is_protected = [&](int i) { return !protected_pos.empty() && protected_pos[i]; };
  std::vector<int> out;
  if (cfg.mode == SelectMode::kThreshold) {
    for (int i = 0; i < len; ++i) {
      if (!is_protected(i) && perturbed[i] < cfg.threshold) out.push_back(i);
    }
    return out;
  }
  std::vector<int> cand;
  for (int i = 0; i < len; ++i) {
    if (!is_protected(i)) cand.push_back(i);
  }
  const auto k = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(std::floor(len * gamma_bar + 1e-12)));
  std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return perturbed[a] < perturbed[b]; });
  out.assign(cand.begin(), cand.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

void save_corrector(const Corrector& corrector, const std::string& path, const nlohmann::json& meta) {
  save_checkpoint(path, "corrector", corrector.config().to_json(), corrector.params(), meta);
}

Corrector load_corrector(const std::string& path) {
  const CheckpointHeader h = read_checkpoint_header(path);
  if (h.kind != "corrector") throw Error(Errc::kIncompatible, path + " holds a " + h.kind + " checkpoint");
  Corrector c(CorrectorConfig::from_json(h.config), 0);
  load_checkpoint(path, "corrector", c.params());
  return c;
}

}  // namespace layoutcorr
