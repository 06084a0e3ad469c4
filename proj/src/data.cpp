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

#include "layoutcorr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "layoutcorr/json_util.hpp"
#include "layoutcorr/rng.hpp"

namespace layoutcorr {

Grammar parse_grammar(const std::string& name) {
  if (name == "doc-like") return Grammar::kDocLike;
  if (name == "ui-like") return Grammar::kUiLike;
  throw Error(Errc::kConfig, "unknown grammar '" + name + "'");
}

std::string grammar_name(Grammar g) { return g == Grammar::kDocLike ? "doc-like" : "ui-like"; }

void SynthConfig::validate(int n_max) const {
  if (min_elements < 1 || max_elements < min_elements || max_elements > n_max) {
    throw Error(Errc::kConfig, "element range must lie within [1, n_max]");
  }
  if (num_bins < 8) throw Error(Errc::kConfig, "synthetic grammars need at least 8 bins");
  if (num_categories < 1) throw Error(Errc::kConfig, "need at least one category");
  if (jitter < 0 || 4 * jitter >= num_bins) throw Error(Errc::kConfig, "jitter must be below B/4");
  if (count < 0) throw Error(Errc::kConfig, "negative sample count");
}

nlohmann::json SynthConfig::to_json() const {
  return nlohmann::json{{"grammar", grammar_name(grammar)},
                        {"min_elements", min_elements},
                        {"max_elements", max_elements},
                        {"num_categories", num_categories},
                        {"num_bins", num_bins},
                        {"jitter", jitter},
                        {"seed", seed},
                        {"count", count}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  ObjectReader r(j, "data");
  std::string g = grammar_name(c.grammar);
  r.get("grammar", g);
  c.grammar = parse_grammar(g);
  r.get("min_elements", c.min_elements);
  r.get("max_elements", c.max_elements);
  r.get("num_categories", c.num_categories);
  r.get("num_bins", c.num_bins);
  r.get("jitter", c.jitter);
  r.get("seed", c.seed);
  r.get("count", c.count);
  r.finish();
  return c;
}

namespace {

// Horizontal or vertical extent on the half-bin lattice, edges inclusive.
struct Span {
  int lo;
  int hi;
};

// 0-based (center, size) bins of a lattice span; needs lo + hi = 1 (mod 4).
std::pair<int, int> span_bins(Span s) { return {(s.lo + s.hi - 1) / 4, (s.hi - s.lo - 1) / 2}; }

// Largest value <= limit congruent to `residue` mod 4.
int floor_mod4(int limit, int residue) {
  int v = limit;
  while (((v % 4) + 4) % 4 != residue) --v;
  return v;
}

struct Columns {
  Span full;
  Span left;
  Span right;
};

Columns make_columns(int bins) {
  Columns c;
  const int top = 2 * bins - 1;
  c.full = {3, floor_mod4(top - 1, 2)};
  c.left = {3, floor_mod4(bins - 2, 2)};
  c.right = {c.left.hi + 1, c.full.hi};
  return c;
}

// Narrower span sharing the left edge of `col`; the width bin keeps parity.
Span narrowed(Span col, int shrink) {
  const int w = (col.hi - col.lo - 1) / 2 - 2 * shrink;
  return {col.lo, col.lo + 2 * std::max(w, 1) + 1};
}

int scaled(int v, int bins) { return std::max(0, static_cast<int>(std::lround(v * bins / 32.0))); }

struct HeightRange {
  int lo, hi;
};

// Stacks boxes downward from `cursor` inside [0, limit].
class Stacker {
 public:
  Stacker(int start, int limit) : cursor_(start), limit_(limit) {}

  // Places a box of size bin h; returns false when it does not fit.
  bool place(int h, int gap, Span* out) {
    int top = cursor_ + gap;
    if (((top + h) & 1) != 0) ++top;
    const int bottom = top + 2 * h + 1;
    if (bottom > limit_) return false;
    *out = {top, bottom};
    cursor_ = bottom;
    return true;
  }

  int cursor() const { return cursor_; }

 private:
  int cursor_;
  int limit_;
};

Element make_element(int c, Span xs, Span ys, int num_categories) {
  const auto [bx, bw] = span_bins(xs);
  const auto [by, bh] = span_bins(ys);
  return Element{c % num_categories, bx + 1, by + 1, bw + 1, bh + 1};
}

int pick(Rng& rng, std::initializer_list<double> weights) {
  std::vector<double> w(weights);
  return rng.categorical(std::span<const double>(w));
}

Layout doc_layout(const SynthConfig& cfg, Rng& rng, int n) {
  const int B = cfg.num_bins;
  const Columns cols = make_columns(B);
  const int limit = 2 * B - 2;
  static const HeightRange kHeights[5] = {{1, 3}, {2, 5}, {6, 11}, {4, 8}, {3, 6}};
  const auto height = [&](int cat) {
    const HeightRange r = kHeights[cat];
    return std::max(0, rng.range(scaled(r.lo, B), std::max(scaled(r.lo, B), scaled(r.hi, B))));
  };

  Layout l;
  Stacker header(rng.range(1, 3), limit);
  Span ys{};
  header.place(height(0), 0, &ys);
  l.elements.push_back(make_element(0, cols.full, ys, cfg.num_categories));

  const int body = n - 1;
  const bool two_columns = body >= 4 || (body >= 2 && rng.bernoulli(0.5));
  std::vector<Span> col_spans = two_columns ? std::vector<Span>{cols.left, cols.right} : std::vector<Span>{cols.full};
  std::vector<Stacker> stacks;
  const int gap_below_header = rng.range(1, 3);
  for (std::size_t k = 0; k < col_spans.size(); ++k) stacks.emplace_back(header.cursor() + gap_below_header, limit);

  std::size_t col = 0;
  for (int i = 0; i < body; ++i) {
    int cat = 1 + pick(rng, {0.45, 0.2, 0.15, 0.2});
    bool placed = false;
    for (std::size_t attempt = 0; attempt < 2 * col_spans.size() && !placed; ++attempt) {
      const std::size_t c = (col + attempt) % col_spans.size();
      if (attempt == col_spans.size()) cat = 1;  // fall back to the shortest kind
      const int h = attempt >= col_spans.size() ? scaled(kHeights[1].lo, B) : height(cat);
      if (stacks[c].place(h, rng.range(1, 2), &ys)) {
        // Narrow blocks keep the shared left edge, so only the first column may shrink.
        const Span xs = c == 0 && rng.bernoulli(0.25) ? narrowed(col_spans[c], rng.range(1, 3)) : col_spans[c];
        l.elements.push_back(make_element(cat, xs, ys, cfg.num_categories));
        placed = true;
        col = c;
      }
    }
    if (!placed) break;
    // Fill columns roughly evenly.
    if (two_columns && (i % 2 == 1 || rng.bernoulli(0.3))) col = (col + 1) % col_spans.size();
  }
  return l;
}

Layout ui_layout(const SynthConfig& cfg, Rng& rng, int n) {
  const int B = cfg.num_bins;
  const Columns cols = make_columns(B);
  const int limit = 2 * B - 2;
  static const HeightRange kHeights[5] = {{1, 2}, {2, 4}, {5, 9}, {1, 3}, {1, 3}};
  const auto height = [&](int cat) {
    const HeightRange r = kHeights[cat];
    return rng.range(scaled(r.lo, B), std::max(scaled(r.lo, B), scaled(r.hi, B)));
  };

  Layout l;
  Stacker stack(rng.range(0, 2), limit);
  Span ys{};
  stack.place(height(0), 0, &ys);
  l.elements.push_back(make_element(0, cols.full, ys, cfg.num_categories));
  while (static_cast<int>(l.size()) < n) {
    const bool pair = static_cast<int>(l.size()) + 2 <= n && rng.bernoulli(0.3);
    if (pair) {
      const int cat = rng.bernoulli(0.6) ? 3 : 2;
      if (!stack.place(height(cat), rng.range(1, 2), &ys)) break;
      l.elements.push_back(make_element(cat, cols.left, ys, cfg.num_categories));
      l.elements.push_back(make_element(cat, cols.right, ys, cfg.num_categories));
    } else {
      const int cat = std::array<int, 3>{1, 2, 4}[pick(rng, {0.5, 0.2, 0.3})];
      if (!stack.place(height(cat), rng.range(1, 2), &ys)) break;
      l.elements.push_back(make_element(cat, cols.full, ys, cfg.num_categories));
    }
  }
  return l;
}

}  // namespace

Layout synth_layout(const SynthConfig& cfg, std::uint64_t index) {
  Rng rng(derive_seed(cfg.seed, index));
  const int n = rng.range(cfg.min_elements, cfg.max_elements);
  Layout l = cfg.grammar == Grammar::kDocLike ? doc_layout(cfg, rng, n) : ui_layout(cfg, rng, n);
  if (cfg.jitter > 0) {
    for (Element& e : l.elements) {
      e.x = std::clamp(e.x + rng.range(-cfg.jitter, cfg.jitter), 1, cfg.num_bins);
      e.y = std::clamp(e.y + rng.range(-cfg.jitter, cfg.jitter), 1, cfg.num_bins);
    }
  }
  return l;
}

std::vector<Layout> synth_generate(const SynthConfig& cfg) {
  cfg.validate(cfg.max_elements);
  std::vector<Layout> out;
  out.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) out.push_back(synth_layout(cfg, static_cast<std::uint64_t>(i)));
  return out;
}

nlohmann::json layout_to_json(const Layout& l) {
  nlohmann::ordered_json elems = nlohmann::ordered_json::array();
  for (const Element& e : l.elements) {
    elems.push_back(nlohmann::ordered_json{{"c", e.c}, {"x", e.x}, {"y", e.y}, {"w", e.w}, {"h", e.h}});
  }
  return nlohmann::json::parse(nlohmann::ordered_json{{"elements", elems}}.dump());
}

Layout layout_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("elements") || !j.at("elements").is_array()) {
    throw Error(Errc::kParse, "record needs an \"elements\" array");
  }
  Layout l;
  for (const auto& e : j.at("elements")) {
    if (!e.is_object()) throw Error(Errc::kParse, "element is not an object");
    Element el;
    for (const char* key : {"c", "x", "y", "w", "h"}) {
      if (!e.contains(key) || !e.at(key).is_number_integer()) {
        throw Error(Errc::kParse, std::string("element field '") + key + "' missing or not an integer");
      }
    }
    if (e.size() != 5) throw Error(Errc::kParse, "element has unexpected fields");
    el.c = e.at("c").get<int>();
    el.x = e.at("x").get<int>();
    el.y = e.at("y").get<int>();
    el.w = e.at("w").get<int>();
    el.h = e.at("h").get<int>();
    l.elements.push_back(el);
  }
  return l;
}

std::string to_jsonl(const Dataset& ds) {
  std::string out;
  if (!ds.meta.is_null()) out += nlohmann::json{{"meta", ds.meta}}.dump() + "\n";
  for (const Layout& l : ds.layouts) {
    nlohmann::ordered_json elems = nlohmann::ordered_json::array();
    for (const Element& e : l.elements) {
      elems.push_back(nlohmann::ordered_json{{"c", e.c}, {"x", e.x}, {"y", e.y}, {"w", e.w}, {"h", e.h}});
    }
    out += nlohmann::ordered_json{{"elements", elems}}.dump() + "\n";
  }
  return out;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::kIo, "cannot write " + path);
  os << to_jsonl(ds);
  if (!os) throw Error(Errc::kIo, "write failed for " + path);
}

Dataset parse_jsonl(const std::string& text, const Vocabulary& vocab, int n_max, const std::string& source) {
  Dataset ds;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParse, where + "malformed JSON (" + e.what() + ")");
    }
    if (lineno == 1 && j.is_object() && j.contains("meta") && !j.contains("elements")) {
      ds.meta = j.at("meta");
      continue;
    }
    try {
      Layout l = layout_from_json(j);
      tokenize(l, vocab, n_max);
      ds.layouts.push_back(std::move(l));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return ds;
}

Dataset load_jsonl(const std::string& path, const Vocabulary& vocab, int n_max) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_jsonl(buf.str(), vocab, n_max, path);
}

Split split_dataset(const std::vector<Layout>& layouts, double train, double val, double test, std::uint64_t seed) {
  if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9) {
    throw Error(Errc::kInvalidArgument, "split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> idx(layouts.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  const std::size_t n = layouts.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train * n + 1e-9));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(val * n + 1e-9)));
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    const Layout& l = layouts[idx[i]];
    if (i < n_train) s.train.push_back(l);
    else if (i < n_train + n_val) s.val.push_back(l);
    else s.test.push_back(l);
  }
  if ((train > 0 && s.train.empty()) || (val > 0 && s.val.empty()) || (test > 0 && s.test.empty())) {
    throw Error(Errc::kEmptySplit, "a split with a positive ratio is empty");
  }
  return s;
}

std::vector<TokenSeq> tokenize_all(const std::vector<Layout>& layouts, const Vocabulary& vocab, int n_max) {
  std::vector<TokenSeq> out;
  out.reserve(layouts.size());
  for (const Layout& l : layouts) out.push_back(tokenize(l, vocab, n_max));
  return out;
}

}  // namespace layoutcorr
