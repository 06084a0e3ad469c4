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
#include "layoutcorr/rng.hpp"
#include "layoutcorr/vocab.hpp"

using namespace layoutcorr;

namespace {

Layout random_layout(Rng& rng, const Vocabulary& v, int n_max) {
  Layout l;
  const int n = rng.range(0, n_max);
  for (int i = 0; i < n; ++i) {
    l.elements.push_back({rng.range(0, v.num_categories() - 1), rng.range(1, v.num_bins()),
                          rng.range(1, v.num_bins()), rng.range(1, v.num_bins()), rng.range(1, v.num_bins())});
  }
  return l;
}

}  // namespace

TEST_CASE("vocabulary ids") {
  const Vocabulary v(5, 32);
  CHECK(v.num_regular() == 37);
  CHECK(v.pad_id() == 37);
  CHECK(v.mask_id() == 38);
  CHECK(v.size() == 39);
  int counts[4] = {0, 0, 0, 0};
  for (Token t = 0; t < v.size(); ++t) counts[static_cast<int>(v.classify(t))]++;
  CHECK(counts[0] == 5);
  CHECK(counts[1] == 32);
  CHECK(counts[2] == 1);
  CHECK(counts[3] == 1);
  CHECK_THROWS_AS(v.classify(39), Error);
  CHECK(v.legal_tokens(Field::kCategory).size() == 6);
  CHECK(v.legal_tokens(Field::kW).size() == 33);
  for (int f = 0; f < kFieldsPerElement; ++f) {
    CHECK_FALSE(v.is_legal(static_cast<Field>(f), v.mask_id()));
    CHECK(v.is_legal(static_cast<Field>(f), v.pad_id()));
  }
  CHECK_FALSE(v.is_legal(Field::kCategory, 5));
  CHECK_FALSE(v.is_legal(Field::kX, 4));
}

TEST_CASE("tokenize basics") {
  const Vocabulary v(5, 32);
  const TokenSeq empty = tokenize(Layout{}, v, 4);
  CHECK(empty.length() == 20);
  for (Token t : empty.tokens) CHECK(t == v.pad_id());

  Layout one;
  one.elements.push_back({2, 1, 1, 1, 1});
  const TokenSeq seq = tokenize(one, v, 4);
  CHECK(seq.tokens[0] == 2);
  for (int i = 1; i < 5; ++i) CHECK(seq.tokens[i] == 5);
  for (int i = 5; i < 20; ++i) CHECK(seq.tokens[i] == v.pad_id());
  CHECK(seq.element_count(v) == 1);
  CHECK(detokenize(seq, v) == one);
}

TEST_CASE("tokenize errors") {
  const Vocabulary v(5, 32);
  Layout l;
  for (int i = 0; i < 3; ++i) l.elements.push_back({0, 1, 1, 1, 1});
  CHECK_THROWS_AS(tokenize(l, v, 2), Error);
  try {
    tokenize(l, v, 2);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooManyElements);
  }
  Layout bad;
  bad.elements.push_back({0, 0, 1, 1, 1});
  try {
    tokenize(bad, v, 2);
    FAIL("expected out-of-range");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kOutOfRange);
  }
  bad.elements[0] = {5, 1, 1, 1, 1};
  CHECK_THROWS_AS(tokenize(bad, v, 2), Error);
  bad.elements[0] = {0, 1, 1, 33, 1};
  CHECK_THROWS_AS(tokenize(bad, v, 2), Error);
}

TEST_CASE("detokenize errors") {
  const Vocabulary v(5, 32);
  Layout one;
  one.elements.push_back({1, 3, 4, 5, 6});
  TokenSeq seq = tokenize(one, v, 2);
  for (int pos = 0; pos < seq.length(); ++pos) {
    TokenSeq s = seq;
    s.tokens[pos] = v.mask_id();
    try {
      detokenize(s, v);
      FAIL("expected residual-mask");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kResidualMask);
    }
  }
  TokenSeq mixed = seq;
  mixed.tokens[2] = v.pad_id();
  try {
    detokenize(mixed, v);
    FAIL("expected mixed-pad");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMixedPad);
  }
  TokenSeq illegal = seq;
  illegal.tokens[0] = 10;  // geometry id in the category field
  try {
    detokenize(illegal, v);
    FAIL("expected illegal-token");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kIllegalToken);
  }
  int dropped = -1;
  CHECK(detokenize_lenient(mixed, v, &dropped).size() == 0);
  CHECK(dropped == 1);
  CHECK(detokenize_lenient(seq, v, &dropped) == one);
  CHECK(dropped == 0);
}

TEST_CASE("round trip on random layouts") {
  const Vocabulary v(5, 32);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Layout l = random_layout(rng, v, 8);
    const TokenSeq s = tokenize(l, v, 8);
    CHECK(s.length() == 40);
    CHECK(detokenize(s, v) == l);
    CHECK(tokenize(detokenize(s, v), v, 8) == s);
  }
}

TEST_CASE("round trip exhaustive on a tiny vocabulary") {
  const Vocabulary v(2, 3);
  for (int c = 0; c < 2; ++c)
    for (int x = 1; x <= 3; ++x)
      for (int y = 1; y <= 3; ++y)
        for (int w = 1; w <= 3; ++w)
          for (int h = 1; h <= 3; ++h) {
            Layout l;
            l.elements.push_back({c, x, y, w, h});
            CHECK(detokenize(tokenize(l, v, 1), v) == l);
          }
}

TEST_CASE("dequantize bin centers") {
  const Vocabulary v(5, 32);
  CHECK(bin_center(0, 32) == doctest::Approx(0.015625).epsilon(1e-15));
  CHECK(bin_center(31, 32) == doctest::Approx(0.984375).epsilon(1e-15));
  const Box b = dequantize(Element{0, 1, 32, 1, 32}, v);
  CHECK(b.cx == 0.015625);
  CHECK(b.cy == 0.984375);
  for (int x = 1; x <= 32; ++x) {
    for (int w = 1; w <= 32; ++w) {
      const Element e{3, x, 33 - x, w, x};
      CHECK(quantize(dequantize(e, v), 3, v) == e);
    }
  }
  const Rect r = to_rect(Box{0.01, 0.5, 0.1, 0.2});
  CHECK(r.left == 0.0);
  CHECK(r.right == doctest::Approx(0.06));
  CHECK(r.area() == doctest::Approx(0.06 * 0.2));
}
