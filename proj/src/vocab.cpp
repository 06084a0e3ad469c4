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

#include "layoutcorr/vocab.hpp"

#include <algorithm>
#include <cmath>

namespace layoutcorr {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kTooManyElements: return "too-many-elements";
    case Errc::kOutOfRange: return "out-of-range";
    case Errc::kResidualMask: return "residual-mask";
    case Errc::kMixedPad: return "mixed-pad";
    case Errc::kIllegalToken: return "illegal-token";
    case Errc::kMaskInput: return "mask-in-input";
    case Errc::kInfeasibleProfile: return "infeasible-profile";
    case Errc::kZeroProbability: return "zero-probability";
    case Errc::kUnnormalized: return "unnormalized";
    case Errc::kStepOvershoot: return "step-overshoot";
    case Errc::kNonFinite: return "non-finite";
    case Errc::kDivergence: return "divergence";
    case Errc::kParse: return "parse";
    case Errc::kInsufficientSamples: return "insufficient-samples";
    case Errc::kNotPsd: return "not-psd";
    case Errc::kEmptySplit: return "empty-split";
    case Errc::kIo: return "io";
    case Errc::kConfig: return "config";
    case Errc::kIncompatible: return "incompatible";
    case Errc::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

Vocabulary::Vocabulary(int num_categories, int num_bins)
    : num_categories_(num_categories), num_bins_(num_bins) {
  if (num_categories < 1 || num_bins < 1) {
    throw Error(Errc::kInvalidArgument, "vocabulary needs at least one category and one bin");
  }
  for (int f = 0; f < kFieldsPerElement; ++f) {
    auto& legal = legal_[f];
    if (f == 0) {
      for (int c = 0; c < num_categories_; ++c) legal.push_back(c);
    } else {
      for (int b = 0; b < num_bins_; ++b) legal.push_back(num_categories_ + b);
    }
    legal.push_back(pad_id());
    legal_mask_[f].assign(size(), 0);
    for (Token t : legal) legal_mask_[f][t] = 1;
  }
}

TokenClass Vocabulary::classify(Token token) const {
  if (token < 0 || token >= size()) {
    throw Error(Errc::kOutOfRange, "token id " + std::to_string(token) + " outside vocabulary");
  }
  if (token < num_categories_) return TokenClass::kCategory;
  if (token < num_regular()) return TokenClass::kGeometry;
  if (token == pad_id()) return TokenClass::kPad;
  return TokenClass::kMask;
}

bool Vocabulary::is_legal(Field field, Token token) const {
  if (token < 0 || token >= size()) return false;
  return legal_mask_[static_cast<int>(field)][token] != 0;
}

Token Vocabulary::category_token(int category) const {
  if (category < 0 || category >= num_categories_) {
    throw Error(Errc::kOutOfRange, "category " + std::to_string(category));
  }
  return category;
}

Token Vocabulary::geometry_token(int bin0) const {
  if (bin0 < 0 || bin0 >= num_bins_) {
    throw Error(Errc::kOutOfRange, "bin " + std::to_string(bin0));
  }
  return num_categories_ + bin0;
}

int TokenSeq::element_count(const Vocabulary& vocab) const {
  int n = 0;
  for (int s = 0; s < slots(); ++s) {
    if (tokens[s * kFieldsPerElement] != vocab.pad_id()) ++n;
  }
  return n;
}

bool TokenSeq::has_mask(const Vocabulary& vocab) const {
  return std::find(tokens.begin(), tokens.end(), vocab.mask_id()) != tokens.end();
}

TokenSeq tokenize(const Layout& layout, const Vocabulary& vocab, int n_max) {
  if (static_cast<int>(layout.size()) > n_max) {
    throw Error(Errc::kTooManyElements, std::to_string(layout.size()) + " elements, limit " +
                                            std::to_string(n_max));
  }
  TokenSeq seq;
  seq.tokens.assign(static_cast<std::size_t>(n_max) * kFieldsPerElement, vocab.pad_id());
  const int bins = vocab.num_bins();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Element& e = layout.elements[i];
    if (e.c < 0 || e.c >= vocab.num_categories()) {
      throw Error(Errc::kOutOfRange, "element " + std::to_string(i) + " category " + std::to_string(e.c));
    }
    for (int v : {e.x, e.y, e.w, e.h}) {
      if (v < 1 || v > bins) {
        throw Error(Errc::kOutOfRange, "element " + std::to_string(i) + " bin " + std::to_string(v));
      }
    }
    Token* out = &seq.tokens[i * kFieldsPerElement];
    out[0] = vocab.category_token(e.c);
    out[1] = vocab.geometry_token(e.x - 1);
    out[2] = vocab.geometry_token(e.y - 1);
    out[3] = vocab.geometry_token(e.w - 1);
    out[4] = vocab.geometry_token(e.h - 1);
  }
  return seq;
}

namespace {

Element decode_slot(const Token* tok, const Vocabulary& vocab) {
  Element e;
  e.c = vocab.category_of(tok[0]);
  e.x = vocab.bin_of(tok[1]) + 1;
  e.y = vocab.bin_of(tok[2]) + 1;
  e.w = vocab.bin_of(tok[3]) + 1;
  e.h = vocab.bin_of(tok[4]) + 1;
  return e;
}

}  // namespace

Layout detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
  if (seq.length() % kFieldsPerElement != 0) {
    throw Error(Errc::kOutOfRange, "sequence length is not a multiple of 5");
  }
  Layout layout;
  for (int s = 0; s < seq.slots(); ++s) {
    const Token* tok = &seq.tokens[s * kFieldsPerElement];
    int pads = 0;
    for (int f = 0; f < kFieldsPerElement; ++f) {
      if (tok[f] == vocab.mask_id()) {
        throw Error(Errc::kResidualMask, "MASK at position " + std::to_string(s * kFieldsPerElement + f));
      }
      if (tok[f] == vocab.pad_id()) ++pads;
    }
    if (pads == kFieldsPerElement) continue;
    if (pads != 0) throw Error(Errc::kMixedPad, "slot " + std::to_string(s) + " is partially PAD");
    for (int f = 0; f < kFieldsPerElement; ++f) {
      if (!vocab.is_legal(static_cast<Field>(f), tok[f])) {
        throw Error(Errc::kIllegalToken, "token " + std::to_string(tok[f]) + " at position " +
                                             std::to_string(s * kFieldsPerElement + f));
      }
    }
    layout.elements.push_back(decode_slot(tok, vocab));
  }
  return layout;
}

Layout detokenize_lenient(const TokenSeq& seq, const Vocabulary& vocab, int* dropped) {
  Layout layout;
  int lost = 0;
  for (int s = 0; s < seq.slots(); ++s) {
    const Token* tok = &seq.tokens[s * kFieldsPerElement];
    int pads = 0;
    bool legal = true;
    for (int f = 0; f < kFieldsPerElement; ++f) {
      if (tok[f] == vocab.pad_id()) ++pads;
      else if (!vocab.is_legal(static_cast<Field>(f), tok[f])) legal = false;
    }
    if (pads == kFieldsPerElement) continue;
    if (pads != 0 || !legal) {
      ++lost;
      continue;
    }
    layout.elements.push_back(decode_slot(tok, vocab));
  }
  if (dropped) *dropped = lost;
  return layout;
}

double bin_center(int bin0, int num_bins) { return (bin0 + 0.5) / num_bins; }

int quantize_bin(double value, int num_bins) {
  const int b = static_cast<int>(std::floor(value * num_bins));
  return std::clamp(b, 0, num_bins - 1);
}

Box dequantize(const Element& e, const Vocabulary& vocab) {
  const int b = vocab.num_bins();
  return Box{bin_center(e.x - 1, b), bin_center(e.y - 1, b), bin_center(e.w - 1, b),
             bin_center(e.h - 1, b)};
}

Element quantize(const Box& box, int category, const Vocabulary& vocab) {
  const int b = vocab.num_bins();
  return Element{category, quantize_bin(box.cx, b) + 1, quantize_bin(box.cy, b) + 1,
                 quantize_bin(box.w, b) + 1, quantize_bin(box.h, b) + 1};
}

Rect to_rect(const Box& box) {
  Rect r;
  r.left = std::clamp(box.cx - box.w / 2.0, 0.0, 1.0);
  r.right = std::clamp(box.cx + box.w / 2.0, 0.0, 1.0);
  r.top = std::clamp(box.cy - box.h / 2.0, 0.0, 1.0);
  r.bottom = std::clamp(box.cy + box.h / 2.0, 0.0, 1.0);
  return r;
}

}  // namespace layoutcorr
