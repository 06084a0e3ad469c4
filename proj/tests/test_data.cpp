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

#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "doctest.h"
#include "layoutcorr/data.hpp"
#include "layoutcorr/metrics.hpp"

using namespace layoutcorr;

namespace {

const Vocabulary kVocab(5, 32);

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::kInvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("generated layouts are aligned, disjoint and tokenizable") {
  for (Grammar g : {Grammar::kDocLike, Grammar::kUiLike}) {
    SynthConfig c;
    c.grammar = g;
    c.count = 3000;
    const auto layouts = synth_generate(c);
    CHECK(alignment_score(layouts, kVocab) == 0.0);
    CHECK(overlap_score(layouts, kVocab) == 0.0);
    std::set<std::size_t> sizes;
    for (const Layout& l : layouts) {
      CHECK(l.size() >= 1);
      CHECK(l.size() <= 8);
      sizes.insert(l.size());
      CHECK_NOTHROW(tokenize(l, kVocab, 8));
    }
    CHECK(sizes.size() >= 5);
  }
}

TEST_CASE("jitter breaks the constructed structure") {
  SynthConfig c;
  c.count = 500;
  c.jitter = 1;
  const auto layouts = synth_generate(c);
  CHECK(alignment_score(layouts, kVocab) > 0.0);
  CHECK(overlap_score(layouts, kVocab) > 0.0);
}

TEST_CASE("generation is deterministic per seed and per index") {
  SynthConfig c;
  c.count = 300;
  c.seed = 42;
  const std::string a = to_jsonl({nlohmann::json(), synth_generate(c)});
  const std::string b = to_jsonl({nlohmann::json(), synth_generate(c)});
  CHECK(a == b);
  const auto all = synth_generate(c);
  CHECK(synth_layout(c, 123) == all[123]);
  c.seed = 43;
  CHECK(to_jsonl({nlohmann::json(), synth_generate(c)}) != a);
}

TEST_CASE("config validation") {
  SynthConfig c;
  c.jitter = 8;  // B/4
  CHECK(code_of([&] { c.validate(8); }) == Errc::kConfig);
  c.jitter = 0;
  c.max_elements = 9;
  CHECK(code_of([&] { c.validate(8); }) == Errc::kConfig);
  CHECK(code_of([] { SynthConfig::from_json({{"grammar", "doc-like"}, {"colour", 1}}); }) == Errc::kConfig);
  CHECK(code_of([] { parse_grammar("magazine"); }) == Errc::kConfig);
  const SynthConfig back = SynthConfig::from_json(SynthConfig{}.to_json());
  CHECK(back.to_json() == SynthConfig{}.to_json());
}

TEST_CASE("JSONL save/load round trip on 10k layouts") {
  SynthConfig c;
  c.count = 10000;
  c.jitter = 2;
  Dataset ds{nlohmann::json{{"seed", 0}, {"grammar", "doc-like"}}, synth_generate(c)};
  const std::string path = "data_roundtrip.jsonl";
  save_jsonl(ds, path);
  const Dataset back = load_jsonl(path, kVocab, 8);
  CHECK(back.meta == ds.meta);
  REQUIRE(back.layouts.size() == ds.layouts.size());
  for (std::size_t i = 0; i < ds.layouts.size(); ++i) CHECK(back.layouts[i] == ds.layouts[i]);
  CHECK(to_jsonl(back) == to_jsonl(ds));
  std::remove(path.c_str());
}

TEST_CASE("loader errors name the offending line") {
  const std::string good = R"({"elements":[{"c":0,"x":1,"y":1,"w":1,"h":1}]})";
  const std::string text = good + "\n" + good + "\n{\"elements\":[oops\n";
  CHECK(code_of([&] { parse_jsonl(text, kVocab, 8, "f.jsonl"); }) == Errc::kParse);
  CHECK(message_of([&] { parse_jsonl(text, kVocab, 8, "f.jsonl"); }).find("f.jsonl:3:") != std::string::npos);

  const std::string range = good + "\n" + R"({"elements":[{"c":0,"x":0,"y":1,"w":1,"h":1}]})" + "\n";
  CHECK(code_of([&] { parse_jsonl(range, kVocab, 8, "r.jsonl"); }) == Errc::kOutOfRange);
  CHECK(message_of([&] { parse_jsonl(range, kVocab, 8, "r.jsonl"); }).find("r.jsonl:2:") != std::string::npos);

  const std::string missing = R"({"elements":[{"c":0,"x":1,"y":1,"w":1}]})";
  CHECK(code_of([&] { parse_jsonl(missing, kVocab, 8); }) == Errc::kParse);

  CHECK(code_of([&] { load_jsonl("/nonexistent/dir/x.jsonl", kVocab, 8); }) == Errc::kIo);
}

TEST_CASE("layouts above n_max are rejected") {
  Layout l;
  for (int i = 0; i < 26; ++i) l.elements.push_back({0, 1, 1, 1, 1});
  const std::string text = to_jsonl({nlohmann::json(), {l}});
  CHECK(code_of([&] { parse_jsonl(text, kVocab, 25); }) == Errc::kTooManyElements);
  l.elements.pop_back();
  CHECK(parse_jsonl(to_jsonl({nlohmann::json(), {l}}), kVocab, 25).layouts.size() == 1);
}

TEST_CASE("split is disjoint, exhaustive and seed-deterministic") {
  SynthConfig c;
  c.count = 1000;
  std::vector<Layout> layouts = synth_generate(c);
  // Tag each layout so identity survives the shuffle.
  for (std::size_t i = 0; i < layouts.size(); ++i) layouts[i].elements[0].x = static_cast<int>(i % 32) + 1;
  for (std::size_t i = 0; i < layouts.size(); ++i) layouts[i].elements[0].y = static_cast<int>(i / 32) + 1;

  const Split all = split_dataset(layouts, 1.0, 0.0, 0.0, 5);
  CHECK(all.train.size() == layouts.size());
  CHECK(all.val.empty());
  CHECK(all.test.empty());

  const Split a = split_dataset(layouts, 0.8, 0.1, 0.1, 7);
  const Split b = split_dataset(layouts, 0.8, 0.1, 0.1, 7);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.val.size() + a.test.size() == layouts.size());
  std::set<std::pair<int, int>> seen;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const Layout& l : *part) seen.insert({l.elements[0].x, l.elements[0].y});
  }
  CHECK(seen.size() == layouts.size());
  CHECK(split_dataset(layouts, 0.8, 0.1, 0.1, 8).train != a.train);

  const std::vector<Layout> two(layouts.begin(), layouts.begin() + 2);
  CHECK(code_of([&] { split_dataset(two, 0.5, 0.25, 0.25, 1); }) == Errc::kEmptySplit);
  CHECK(code_of([&] { split_dataset(layouts, 0.5, 0.2, 0.2, 1); }) == Errc::kInvalidArgument);
}
