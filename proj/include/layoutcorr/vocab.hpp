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

// Quantized layout representation and the shared token vocabulary.
//
// Token ids: categories [0, C), geometry bins [C, C+B), then PAD = C+B and
// MASK = C+B+1. A layout of at most n_max elements flattens to 5*n_max
// tokens in field order (c, x, y, w, h); unused slots are all PAD.
//
// Element geometry is stored 1-based (bins 1..B) and category 0-based, so
// bin b of an Element maps to token C + b - 1.

#include <array>
#include <span>
#include <vector>

#include "layoutcorr/common.hpp"

namespace layoutcorr {

inline constexpr int kFieldsPerElement = 5;

enum class Field : int { kCategory = 0, kX = 1, kY = 2, kW = 3, kH = 4 };

inline Field field_at(int position) { return static_cast<Field>(position % kFieldsPerElement); }

enum class TokenClass { kCategory, kGeometry, kPad, kMask };

class Vocabulary {
 public:
  Vocabulary(int num_categories, int num_bins);

  int num_categories() const { return num_categories_; }
  int num_bins() const { return num_bins_; }
  // Regular classes K = C + B (PAD and MASK excluded).
  int num_regular() const { return num_categories_ + num_bins_; }
  int pad_id() const { return num_regular(); }
  int mask_id() const { return num_regular() + 1; }
  int size() const { return num_regular() + 2; }

  TokenClass classify(Token token) const;

  // Legal set of a field: its regular range plus PAD. MASK is never legal.
  bool is_legal(Field field, Token token) const;
  const std::vector<Token>& legal_tokens(Field field) const {
    return legal_[static_cast<int>(field)];
  }
  // 0/1 flags over all size() token ids.
  const std::vector<unsigned char>& legal_mask(Field field) const {
    return legal_mask_[static_cast<int>(field)];
  }

  Token category_token(int category) const;
  // `bin0` is 0-based.
  Token geometry_token(int bin0) const;
  int category_of(Token token) const { return token; }
  int bin_of(Token token) const { return token - num_categories_; }

  bool operator==(const Vocabulary& other) const {
    return num_categories_ == other.num_categories_ && num_bins_ == other.num_bins_;
  }

 private:
  int num_categories_;
  int num_bins_;
  std::array<std::vector<Token>, kFieldsPerElement> legal_;
  std::array<std::vector<unsigned char>, kFieldsPerElement> legal_mask_;
};

struct Element {
  int c = 0;
  int x = 1;
  int y = 1;
  int w = 1;
  int h = 1;

  bool operator==(const Element&) const = default;
};

struct Layout {
  std::vector<Element> elements;

  std::size_t size() const { return elements.size(); }
  bool operator==(const Layout&) const = default;
};

struct TokenSeq {
  std::vector<Token> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  int slots() const { return length() / kFieldsPerElement; }
  // Number of element slots whose category position is not PAD.
  int element_count(const Vocabulary& vocab) const;
  bool has_mask(const Vocabulary& vocab) const;

  bool operator==(const TokenSeq&) const = default;
};

TokenSeq tokenize(const Layout& layout, const Vocabulary& vocab, int n_max);

// Strict inverse of tokenize.
Layout detokenize(const TokenSeq& seq, const Vocabulary& vocab);

// Generation-side decoding: slots containing any PAD or any field-illegal
// token are dropped instead of raising. `dropped` receives the number of
// non-empty slots that were discarded.
Layout detokenize_lenient(const TokenSeq& seq, const Vocabulary& vocab, int* dropped = nullptr);

// Continuous box with center/size in [0, 1].
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// Edges clamped to the unit canvas.
struct Rect {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double area() const { return (right - left) * (bottom - top); }
};

// Bin-center convention: 0-based bin b maps to (b + 0.5) / B.
double bin_center(int bin0, int num_bins);
int quantize_bin(double value, int num_bins);

Box dequantize(const Element& element, const Vocabulary& vocab);
Element quantize(const Box& box, int category, const Vocabulary& vocab);
Rect to_rect(const Box& box);

}  // namespace layoutcorr
