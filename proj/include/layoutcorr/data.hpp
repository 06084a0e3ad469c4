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

// Procedural layout corpora and JSONL dataset IO.
//
// Both grammars place boxes on a half-bin lattice: with 0-based center bin b
// and size bin s, an element covers [2b - s, 2b + s + 1] in units of 1/(2B)
// (shifted by half a unit). Shared edges are therefore exact and boxes that
// are separated by one lattice unit never touch.
//
//   doc-like: a full-width header, then one column or two columns of
//             left-aligned blocks stacked top to bottom.
//   ui-like:  full-width bars stacked top to bottom, with occasional
//             side-by-side pairs.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

enum class Grammar { kDocLike, kUiLike };

Grammar parse_grammar(const std::string& name);
std::string grammar_name(Grammar g);

struct SynthConfig {
  Grammar grammar = Grammar::kDocLike;
  int min_elements = 2;
  int max_elements = 8;
  int num_categories = 5;
  int num_bins = 32;
  // Uniform +-jitter applied to x and y bins after construction.
  int jitter = 0;
  std::uint64_t seed = 0;
  int count = 10000;

  void validate(int n_max) const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

// Layout i depends only on (seed, i).
Layout synth_layout(const SynthConfig& cfg, std::uint64_t index);
std::vector<Layout> synth_generate(const SynthConfig& cfg);

struct Dataset {
  nlohmann::json meta;  // optional header record, null when absent
  std::vector<Layout> layouts;
};

// One {"elements": [...]} record per line. A first line of the form
// {"meta": {...}} is written when meta is non-null.
void save_jsonl(const Dataset& ds, const std::string& path);
std::string to_jsonl(const Dataset& ds);

// Validates every record against the vocabulary and n_max. Errors name the
// 1-based line number.
Dataset load_jsonl(const std::string& path, const Vocabulary& vocab, int n_max);
Dataset parse_jsonl(const std::string& text, const Vocabulary& vocab, int n_max, const std::string& source = "<string>");

nlohmann::json layout_to_json(const Layout& l);
Layout layout_from_json(const nlohmann::json& j);

struct Split {
  std::vector<Layout> train, val, test;
};

// Ratios must sum to 1 (within 1e-9). A split with a positive ratio that
// ends up empty raises an empty-split error.
Split split_dataset(const std::vector<Layout>& layouts, double train, double val, double test, std::uint64_t seed);

std::vector<TokenSeq> tokenize_all(const std::vector<Layout>& layouts, const Vocabulary& vocab, int n_max);

}  // namespace layoutcorr
