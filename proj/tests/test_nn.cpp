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


#include "doctest.h"
#include "grad_check.hpp"
#include "layoutcorr/nn.hpp"

using namespace layoutcorr;
using nn::Mat;

namespace {

Mat<double> random_mat(Rng& rng, int r, int c) {
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("encoder block gradients") {
  Rng rng(1);
  nn::ParamSet<double> ps;
  nn::EncoderBlock<double> block;
  block.create(ps, "b", 8, 2, 12, true, rng, 0.5);
  ps.find("b.attn.group_bias")->value << 0.3, -0.7;
  ps.find("b.ln1.g")->value.setRandom();
  ps.find("b.ln2.b")->value.setRandom();
  const int len = 6, batch = 2;
  Mat<double> group = Mat<double>::Zero(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) group(i, j) = (i / 3 == j / 3) ? 1.0 : 0.0;
  Mat<double> x = random_mat(rng, batch * len, 8);
  const Mat<double> weights = random_mat(rng, batch * len, 8);

  auto loss = [&](Mat<double>* dx) {
    nn::EncoderBlock<double>::Cache c;
    Mat<double> y;
    Rng drop(77);
    block.forward(x, len, &group, y, c, &drop, 0.25);
    if (dx) block.backward(weights, len, &group, c, *dx);
    return y.cwiseProduct(weights).sum();
  };
  ps.zero_grad();
  Mat<double> dx;
  loss(&dx);
  const auto r = gradcheck::run(ps, [&] { return loss(nullptr); }, 40, rng);
  CHECK_MESSAGE(r.worst_rel < 1e-4, r.worst_name);

  // Input gradient.
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(rng.below(x.size()));
    const double saved = x.data()[i];
    x.data()[i] = saved + 1e-5;
    const double up = loss(nullptr);
    x.data()[i] = saved - 1e-5;
    const double down = loss(nullptr);
    x.data()[i] = saved;
    CHECK(dx.data()[i] == doctest::Approx((up - down) / 2e-5).epsilon(1e-6));
  }
}

TEST_CASE("attention without group bias ignores element grouping") {
  Rng rng(2);
  nn::ParamSet<double> ps;
  nn::SelfAttention<double> attn;
  attn.create(ps, "a", 8, 4, false, rng, 0.5);
  const Mat<double> x = random_mat(rng, 5, 8);
  Mat<double> group = Mat<double>::Ones(5, 5);
  nn::SelfAttention<double>::Cache c1, c2;
  Mat<double> y1, y2;
  attn.forward(x, 5, nullptr, y1, c1);
  attn.forward(x, 5, &group, y2, c2);
  CHECK((y1 - y2).cwiseAbs().maxCoeff() < 1e-14);
  for (const auto& p : c1.probs) CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adamw decays only flagged parameters") {
  nn::ParamSet<double> ps;
  auto* w = ps.add("w", 1, 1, true);
  auto* b = ps.add("b", 1, 1, false);
  w->value(0, 0) = 1.0;
  b->value(0, 0) = 1.0;
  nn::AdamWConfig cfg;
  cfg.weight_decay = 0.5;
  nn::AdamW<double> opt(ps, cfg);
  ps.zero_grad();
  opt.step(0.1);
  CHECK(w->value(0, 0) == doctest::Approx(0.95));
  CHECK(b->value(0, 0) == 1.0);
  // Global-norm clipping leaves the first Adam step size unchanged.
  w->grad(0, 0) = 100.0;
  const double norm = opt.step(0.1);
  CHECK(norm == doctest::Approx(100.0));
  CHECK(w->value(0, 0) < 0.95 * 0.95);
}

TEST_CASE("sinusoid rows depend on index differences only") {
  const Mat<double> m = nn::sinusoid_rows<double>(32, 12, 0.5, 4.0, 128.0);
  CHECK(m.rows() == 32);
  CHECK(m.cols() == 12);
  for (int k = 0; k < 6; ++k) {
    CHECK(m(0, 2 * k) == 0.0);
    CHECK(m(0, 2 * k + 1) == doctest::Approx(0.5));
  }
  // sum_k cos(w_k (i - j)) scaled by amplitude^2.
  for (int shift : {1, 5, 17}) {
    const double a = m.row(0).dot(m.row(shift));
    const double b = m.row(10).dot(m.row(10 + shift));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  CHECK(m.row(3).squaredNorm() == doctest::Approx(6 * 0.25));
  const Mat<double> odd = nn::sinusoid_rows<double>(4, 5, 1.0, 2.0, 8.0);
  CHECK(odd.col(4).cwiseAbs().maxCoeff() == 0.0);
}
