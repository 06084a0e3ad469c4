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

// Small transformer toolkit with hand-written backward passes.
//
// Activations for a batch of equal-length sequences are stacked into one
// row-major (batch * len) x dim matrix. Every layer exposes forward() that
// fills a cache and backward() that accumulates parameter gradients and
// returns the input gradient. Templated on the scalar type so the same code
// runs in f32 for training and f64 for finite-difference checks.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "layoutcorr/common.hpp"
#include "layoutcorr/rng.hpp"

namespace layoutcorr::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool decay = false;
};

template <typename S>
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param<S>* add(std::string name, int rows, int cols, bool decay) {
    auto p = std::make_unique<Param<S>>();
    p->name = std::move(name);
    p->value = Mat<S>::Zero(rows, cols);
    p->grad = Mat<S>::Zero(rows, cols);
    p->decay = decay;
    params_.push_back(std::move(p));
    return params_.back().get();
  }

  const std::vector<std::unique_ptr<Param<S>>>& all() const { return params_; }

  Param<S>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p->value.allFinite()) return false;
    }
    return true;
  }

 private:
  std::vector<std::unique_ptr<Param<S>>> params_;
};

template <typename S>
void init_normal(Param<S>& p, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<S>(rng.normal() * stddev);
}

// Row i holds amplitude * (sin(i w_k), cos(i w_k)) pairs, with periods
// spaced geometrically from min_period to max_period. Odd dim leaves the
// last column zero.
template <typename S>
Mat<S> sinusoid_rows(int count, int dim, double amplitude, double min_period, double max_period) {
  Mat<S> m = Mat<S>::Zero(count, dim);
  const int pairs = dim / 2;
  for (int k = 0; k < pairs; ++k) {
    const double frac = pairs > 1 ? static_cast<double>(k) / (pairs - 1) : 0.0;
    const double w = 2.0 * std::numbers::pi / (min_period * std::pow(max_period / min_period, frac));
    for (int i = 0; i < count; ++i) {
      m(i, 2 * k) = static_cast<S>(amplitude * std::sin(i * w));
      m(i, 2 * k + 1) = static_cast<S>(amplitude * std::cos(i * w));
    }
  }
  return m;
}

template <typename S>
struct Linear {
  Param<S>* w = nullptr;  // in x out
  Param<S>* b = nullptr;  // 1 x out

  void create(ParamSet<S>& ps, const std::string& name, int in, int out, Rng& rng, double stddev) {
    w = ps.add(name + ".w", in, out, true);
    b = ps.add(name + ".b", 1, out, false);
    init_normal(*w, rng, stddev);
  }

  void forward(const Mat<S>& x, Mat<S>& y) const {
    y.noalias() = x * w->value;
    y.rowwise() += b->value.row(0);
  }

  void backward(const Mat<S>& x, const Mat<S>& dy, Mat<S>* dx) const {
    w->grad.noalias() += x.transpose() * dy;
    b->grad.row(0) += dy.colwise().sum();
    if (dx) dx->noalias() = dy * w->value.transpose();
  }
};

template <typename S>
struct LayerNorm {
  Param<S>* gain = nullptr;
  Param<S>* bias = nullptr;
  S eps = S(1e-5);

  struct Cache {
    Mat<S> xhat;
    Vec<S> rstd;
  };

  void create(ParamSet<S>& ps, const std::string& name, int dim) {
    gain = ps.add(name + ".g", 1, dim, false);
    bias = ps.add(name + ".b", 1, dim, false);
    gain->value.setOnes();
  }

  void forward(const Mat<S>& x, Mat<S>& y, Cache& c) const {
    const Vec<S> mean = x.rowwise().mean();
    c.xhat = x.colwise() - mean;
    c.rstd = ((c.xhat.array().square().rowwise().sum() / static_cast<S>(x.cols())) + eps).rsqrt();
    c.xhat.array().colwise() *= c.rstd.array();
    y = (c.xhat.array().rowwise() * gain->value.row(0).array()).rowwise() + bias->value.row(0).array();
  }

  void backward(const Mat<S>& dy, const Cache& c, Mat<S>& dx) const {
    gain->grad.row(0) += dy.cwiseProduct(c.xhat).colwise().sum();
    bias->grad.row(0) += dy.colwise().sum();
    const S inv_d = S(1) / static_cast<S>(dy.cols());
    const Mat<S> dxhat = dy.array().rowwise() * gain->value.row(0).array();
    const Vec<S> m1 = dxhat.rowwise().sum() * inv_d;
    const Vec<S> m2 = dxhat.cwiseProduct(c.xhat).rowwise().sum() * inv_d;
    dx = c.xhat.array().colwise() * (-m2.array());
    dx += dxhat;
    dx.colwise() -= m1;
    dx.array().colwise() *= c.rstd.array();
  }
};

// tanh approximation of GELU.
template <typename S>
struct Gelu {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)

  static void forward(const Mat<S>& x, Mat<S>& y) {
    const auto v = x.array();
    y = S(0.5) * v * (S(1) + (S(kC) * (v + S(0.044715) * v.cube())).tanh());
  }

  static void backward(const Mat<S>& x, const Mat<S>& dy, Mat<S>& dx) {
    const auto v = x.array();
    const auto th = (S(kC) * (v + S(0.044715) * v.cube())).tanh().eval();
    const auto du = S(kC) * (S(1) + S(3 * 0.044715) * v.square());
    dx = dy.array() * (S(0.5) * (S(1) + th) + S(0.5) * v * (S(1) - th.square()) * du);
  }
};

// Multi-head self-attention without any positional term. An optional
// per-head learned bias is added to the logits of pairs sharing a group
// (positions of the same element); it depends only on group membership, so
// the layer stays equivariant to permutations of whole groups.
template <typename S>
struct SelfAttention {
  Linear<S> qkv;
  Linear<S> out;
  Param<S>* group_bias = nullptr;  // 1 x heads
  int heads = 1;

  struct Cache {
    Mat<S> qkv;
    std::vector<Mat<S>> probs;  // batch * heads matrices of len x len
    Mat<S> ctx;
  };

  void create(ParamSet<S>& ps, const std::string& name, int dim, int num_heads, bool with_group_bias, Rng& rng,
              double stddev) {
    if (dim % num_heads != 0) throw Error(Errc::kConfig, "embed_dim must be divisible by num_heads");
    heads = num_heads;
    qkv.create(ps, name + ".qkv", dim, 3 * dim, rng, stddev);
    out.create(ps, name + ".out", dim, dim, rng, stddev);
    if (with_group_bias) group_bias = ps.add(name + ".group_bias", 1, num_heads, false);
  }

  // `same_group` is len x len with 1 where two positions share a group.
  void forward(const Mat<S>& x, int len, const Mat<S>* same_group, Mat<S>& y, Cache& c) const {
    const int dim = static_cast<int>(x.cols());
    const int dh = dim / heads;
    const int batch = static_cast<int>(x.rows()) / len;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    qkv.forward(x, c.qkv);
    c.ctx.resize(x.rows(), dim);
    c.probs.resize(static_cast<std::size_t>(batch) * heads);
    Mat<S> logits(len, len);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * len;
      for (int h = 0; h < heads; ++h) {
        const auto q = c.qkv.block(r0, h * dh, len, dh);
        const auto k = c.qkv.block(r0, dim + h * dh, len, dh);
        const auto v = c.qkv.block(r0, 2 * dim + h * dh, len, dh);
        logits.noalias() = q * k.transpose();
        logits *= scale;
        if (group_bias && same_group) logits += group_bias->value(0, h) * (*same_group);
        Mat<S>& p = c.probs[static_cast<std::size_t>(b) * heads + h];
        p.resize(len, len);
        softmax_rows(logits, p);
        c.ctx.block(r0, h * dh, len, dh).noalias() = p * v;
      }
    }
    out.forward(c.ctx, y);
  }

  // Shifting by the block maximum keeps the exp vectorized over the whole
  // block; rows that would underflow are redone with their own maximum.
  static void softmax_rows(const Mat<S>& logits, Mat<S>& p) {
    p = (logits.array() - logits.maxCoeff()).exp();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      S sum = p.row(i).sum();
      if (!(sum > S(1e-20))) {
        p.row(i) = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
        sum = p.row(i).sum();
      }
      p.row(i) *= S(1) / sum;
    }
  }

  void backward(const Mat<S>& x, const Mat<S>& dy, int len, const Mat<S>* same_group, const Cache& c,
                Mat<S>& dx) const {
    const int dim = static_cast<int>(x.cols());
    const int dh = dim / heads;
    const int batch = static_cast<int>(x.rows()) / len;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    Mat<S> dctx;
    out.backward(c.ctx, dy, &dctx);
    Mat<S> dqkv(x.rows(), 3 * dim);
    Mat<S> dp(len, len), ds(len, len);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * len;
      for (int h = 0; h < heads; ++h) {
        const Mat<S>& p = c.probs[static_cast<std::size_t>(b) * heads + h];
        const auto q = c.qkv.block(r0, h * dh, len, dh);
        const auto k = c.qkv.block(r0, dim + h * dh, len, dh);
        const auto v = c.qkv.block(r0, 2 * dim + h * dh, len, dh);
        const auto dout = dctx.block(r0, h * dh, len, dh);
        dp.noalias() = dout * v.transpose();
        dqkv.block(r0, 2 * dim + h * dh, len, dh).noalias() = p.transpose() * dout;
        const Vec<S> dot = dp.cwiseProduct(p).rowwise().sum();
        ds = p.array() * (dp.colwise() - dot).array();
        if (group_bias && same_group) group_bias->grad(0, h) += ds.cwiseProduct(*same_group).sum();
        ds *= scale;
        dqkv.block(r0, h * dh, len, dh).noalias() = ds * k;
        dqkv.block(r0, dim + h * dh, len, dh).noalias() = ds.transpose() * q;
      }
    }
    qkv.backward(x, dqkv, &dx);
  }
};

// Pre-LN transformer encoder block with optional residual-branch dropout.
template <typename S>
struct EncoderBlock {
  LayerNorm<S> ln1, ln2;
  SelfAttention<S> attn;
  Linear<S> ff1, ff2;

  struct Cache {
    typename LayerNorm<S>::Cache ln1, ln2;
    typename SelfAttention<S>::Cache attn;
    Mat<S> x, h1, mid, h2, f1, g;
    Mat<S> drop1, drop2;  // empty when dropout is off
  };

  void create(ParamSet<S>& ps, const std::string& name, int dim, int heads, int ff_dim, bool group_bias, Rng& rng,
              double stddev) {
    ln1.create(ps, name + ".ln1", dim);
    attn.create(ps, name + ".attn", dim, heads, group_bias, rng, stddev);
    ln2.create(ps, name + ".ln2", dim);
    ff1.create(ps, name + ".ff1", dim, ff_dim, rng, stddev);
    ff2.create(ps, name + ".ff2", ff_dim, dim, rng, stddev);
  }

  void forward(const Mat<S>& x, int len, const Mat<S>* same_group, Mat<S>& y, Cache& c, Rng* dropout_rng,
               double dropout) const {
    c.x = x;
    ln1.forward(x, c.h1, c.ln1);
    Mat<S> a;
    attn.forward(c.h1, len, same_group, a, c.attn);
    const bool drop = dropout_rng != nullptr && dropout > 0.0;
    if (drop) {
      c.drop1 = make_mask(a.rows(), a.cols(), *dropout_rng, dropout);
      a = a.cwiseProduct(c.drop1);
    } else {
      c.drop1.resize(0, 0);
    }
    c.mid = x + a;
    ln2.forward(c.mid, c.h2, c.ln2);
    ff1.forward(c.h2, c.f1);
    Gelu<S>::forward(c.f1, c.g);
    Mat<S> f2;
    ff2.forward(c.g, f2);
    if (drop) {
      c.drop2 = make_mask(f2.rows(), f2.cols(), *dropout_rng, dropout);
      f2 = f2.cwiseProduct(c.drop2);
    } else {
      c.drop2.resize(0, 0);
    }
    y = c.mid + f2;
  }

  void backward(const Mat<S>& dy, int len, const Mat<S>* same_group, const Cache& c, Mat<S>& dx) const {
    Mat<S> df2 = c.drop2.size() ? Mat<S>(dy.cwiseProduct(c.drop2)) : dy;
    Mat<S> dg, df1, dh2, dmid;
    ff2.backward(c.g, df2, &dg);
    Gelu<S>::backward(c.f1, dg, df1);
    ff1.backward(c.h2, df1, &dh2);
    ln2.backward(dh2, c.ln2, dmid);
    dmid += dy;
    Mat<S> da = c.drop1.size() ? Mat<S>(dmid.cwiseProduct(c.drop1)) : dmid;
    Mat<S> dh1, dln;
    attn.backward(c.h1, da, len, same_group, c.attn, dh1);
    ln1.backward(dh1, c.ln1, dln);
    dx = dmid + dln;
  }

 private:
  static Mat<S> make_mask(Eigen::Index rows, Eigen::Index cols, Rng& rng, double p) {
    Mat<S> m(rows, cols);
    const S keep = static_cast<S>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? S(0) : keep;
    return m;
  }
};

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables global-norm clipping
};

// Decoupled weight decay, applied only to parameters flagged `decay`.
template <typename S>
class AdamW {
 public:
  AdamW(ParamSet<S>& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
    for (const auto& p : params.all()) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  // Returns the pre-clipping global gradient norm.
  double step(double lr) {
    double sq = 0.0;
    for (const auto& p : params_->all()) sq += static_cast<double>(p->grad.squaredNorm());
    const double norm = std::sqrt(sq);
    const double scale = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, steps_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, steps_);
    const auto& ps = params_->all();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Param<S>& p = *ps[i];
      const Mat<S> g = p.grad * static_cast<S>(scale);
      m_[i] = static_cast<S>(cfg_.beta1) * m_[i] + static_cast<S>(1.0 - cfg_.beta1) * g;
      v_[i] = static_cast<S>(cfg_.beta2) * v_[i] + static_cast<S>(1.0 - cfg_.beta2) * g.cwiseProduct(g);
      if (p.decay && cfg_.weight_decay > 0.0) p.value *= static_cast<S>(1.0 - lr * cfg_.weight_decay);
      const S step = static_cast<S>(lr / bc1);
      const S b2 = static_cast<S>(bc2);
      const S eps = static_cast<S>(cfg_.eps);
      p.value.array() -= step * m_[i].array() / ((v_[i].array() / b2).sqrt() + eps);
    }
    return norm;
  }

  long steps() const { return steps_; }

 private:
  ParamSet<S>* params_;
  AdamWConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  long steps_ = 0;
};

}  // namespace layoutcorr::nn
