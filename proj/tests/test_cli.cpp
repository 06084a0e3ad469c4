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


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "layoutcorr/config.hpp"
#include "layoutcorr/data.hpp"
#include "layoutcorr/render.hpp"

namespace fs = std::filesystem;
using namespace layoutcorr;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::kInvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Layout fixture() {
  Layout l;
  l.elements = {{0, 16, 2, 32, 3}, {3, 5, 12, 8, 10}, {1, 24, 30, 4, 2}};
  return l;
}

// Runs the CLI, returning its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + LAYOUTCORR_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("layoutcorr_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("FNV-1a matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("run config round trips and hashes canonically") {
  const RunConfig def;
  const RunConfig back = RunConfig::from_json(def.to_json());
  CHECK(back.to_json() == def.to_json());
  CHECK(back.hash() == def.hash());
  CHECK(def.hash() == hex64(fnv1a64(def.to_json().dump())));
  CHECK(RunConfig::from_json(nlohmann::json::object()).hash() == def.hash());

  // Key order in the input does not matter.
  const auto a = nlohmann::json::parse(R"({"sampler": {"steps": 50, "tau": 0.1}, "vocab": {"n_max": 9}})");
  const auto b = nlohmann::json::parse(R"({"vocab": {"n_max": 9}, "sampler": {"tau": 0.1, "steps": 50}})");
  CHECK(RunConfig::from_json(a).hash() == RunConfig::from_json(b).hash());
  CHECK(RunConfig::from_json(a).hash() != def.hash());
}

TEST_CASE("vocabulary settings propagate to every section") {
  const RunConfig rc = RunConfig::from_json(
      nlohmann::json::parse(R"({"vocab": {"num_categories": 4, "num_bins": 16, "n_max": 6},
                                "schedule": {"T": 40, "profile": "linear-up:0.1"},
                                "sampler": {"steps": 40},
                                "data": {"max_elements": 6}})"));
  CHECK(rc.denoiser.model.num_bins == 16);
  CHECK(rc.denoiser.model.T == 40);
  CHECK(rc.corrector.model.n_max == 6);
  CHECK(rc.corrector.model.num_categories == 4);
  CHECK(rc.data.synth.num_bins == 16);
  CHECK(rc.make_schedule().T() == 40);
  CHECK(rc.make_schedule().K() == 20);
}

TEST_CASE("bad configs are rejected") {
  const auto bad = [](const char* text) {
    return code_of([&] { RunConfig::from_json(nlohmann::json::parse(text)); });
  };
  CHECK(bad(R"({"vocabulary": {}})") == Errc::kConfig);
  CHECK(bad(R"({"vocab": {"bins": 3}})") == Errc::kConfig);
  CHECK(bad(R"({"denoiser": {"num_bins": 16}})") == Errc::kConfig);
  CHECK(bad(R"({"denoiser": {"train": {"stepz": 1}}})") == Errc::kConfig);
  CHECK(bad(R"({"corrector": {"objective": "bogus"}})") == Errc::kConfig);
  CHECK(bad(R"({"sampler": {"steps": "many"}})") == Errc::kConfig);
  CHECK(bad(R"({"sampler": {"steps": 500}})") == Errc::kConfig);
  CHECK(bad(R"({"eval": {"k": 0}})") == Errc::kConfig);
  CHECK(bad(R"({"vocab": {"n_max": 6}})") == Errc::kConfig);  // data.max_elements is 8
  CHECK(bad(R"({"schedule": {"T": 40}})") == Errc::kConfig);  // sampler.steps is 100
  CHECK(bad(R"({"data": {"train_frac": 0.9}})") == Errc::kConfig);
  CHECK(bad(R"({"data": {"num_bins": 16}})") == Errc::kConfig);
  CHECK(bad(R"({"schedule": {"profile": "cosine"}})") == Errc::kConfig);
  CHECK(bad(R"({"schedule": {"profile": "linear-down:0.1"}})") == Errc::kInfeasibleProfile);
  CHECK(code_of([] { RunConfig::load("/nonexistent/config.json"); }) == Errc::kIo);
}

TEST_CASE("SVG rendering matches the golden file") {
  const Vocabulary v(5, 32);
  const std::string svg = layout_to_svg(fixture(), v, "version=test");
  const fs::path golden = fs::path(LAYOUTCORR_GOLDEN_DIR) / "fixture.svg";
  if (std::getenv("LAYOUTCORR_UPDATE_GOLDEN")) {
    std::ofstream(golden, std::ios::binary) << svg;
  }
  CHECK(svg == slurp(golden));
  // Header: x in [0, 125/128], y in [1/128, 11/128].
  CHECK(svg.find("<rect x=\"0.00\" y=\"4.69\" width=\"390.62\" height=\"46.88\" fill=\"#e6194b\"") != std::string::npos);
  CHECK(svg.find("fill-opacity=\"0.4\"") != std::string::npos);
  CHECK(std::string(category_color(5)) != category_color(4));
}

TEST_CASE("CLI end to end") {
  const TempDir dir;
  const std::string cfg_path = dir / "tiny.json";
  std::ofstream(cfg_path) << R"({
    "vocab": {"num_categories": 5, "num_bins": 32, "n_max": 8},
    "schedule": {"T": 20},
    "denoiser": {"embed_dim": 16, "num_layers": 1, "num_heads": 2, "ff_dim": 24,
                 "train": {"steps": 15, "batch": 8, "warmup": 2}},
    "corrector": {"embed_dim": 16, "num_layers": 1, "num_heads": 2, "ff_dim": 24,
                  "train": {"steps": 10, "batch": 8, "warmup": 2}},
    "sampler": {"steps": 20, "corrector_timesteps": [5, 10]},
    "eval": {"k": 3, "num_samples": 12},
    "data": {"count": 200}
  })";
  const std::string o = "--config " + cfg_path + " --out " + dir.path.string();
  REQUIRE(cli(o + " synth") == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["counts"]["total"] == 200);
  CHECK(manifest["counts"]["train"].get<int>() + manifest["counts"]["val"].get<int>() +
            manifest["counts"]["test"].get<int>() ==
        200);
  CHECK(manifest.contains("config_hash"));
  const std::string first = slurp(dir / "dataset.jsonl");
  REQUIRE(cli(o + " synth") == 0);
  CHECK(slurp(dir / "dataset.jsonl") == first);

  REQUIRE(cli(o + " train-ddm --log-every 5") == 0);
  REQUIRE(cli(o + " train-corrector") == 0);
  CHECK(fs::exists(dir / "train_ddm.csv"));

  const std::string corr = " --corrector " + (dir / "corrector.ckpt");
  REQUIRE(cli(o + " --seed 7 sample --n 10 --name a.jsonl" + corr) == 0);
  REQUIRE(cli(o + " --seed 7 sample --n 10 --name b.jsonl" + corr) == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  const Dataset a = load_jsonl(dir / "a.jsonl", Vocabulary(5, 32), 8);
  CHECK(a.layouts.size() == 10);
  CHECK(a.meta["seed"] == 7);
  CHECK(a.meta["version"] == kVersion);
  CHECK(a.meta["config_hash"].get<std::string>().size() == 16);
  CHECK(a.meta["forward_ops_per_sample"] == 22.0);
  REQUIRE(cli(o + " --seed 8 sample --n 10 --name c.jsonl" + corr) == 0);
  CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));

  REQUIRE(cli(o + " sample --n 4 --trace --name t.jsonl --condition cs2p --reference " + (dir / "test.jsonl") + corr) ==
          0);
  CHECK(fs::exists(dir.path / "traces" / "trace_00003.jsonl"));
  REQUIRE(cli(o + " sample --n 4 --maskgit --name m.jsonl" + corr) == 0);

  REQUIRE(cli(o + " eval --generated " + (dir / "a.jsonl")) == 0);
  const std::string rep = slurp(dir / "report.json");
  REQUIRE(cli(o + " eval --generated " + (dir / "a.jsonl")) == 0);
  CHECK(slurp(dir / "report.json") == rep);
  CHECK(nlohmann::json::parse(rep)["report"].contains("frechet_geo"));

  REQUIRE(cli(o + " experiment speed-quality --steps 5,10,20 --n 8") == 0);
  const std::string csv = slurp(dir / "speed_quality.csv");
  CHECK(csv.rfind("# speed-quality-v1 version=", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 3);
  REQUIRE(cli(o + " experiment recover --trials 6") == 0);
  REQUIRE(cli(o + " experiment detect --trials 6") == 0);
  REQUIRE(cli(o + " experiment score-vs-corruption --trials 6 --caps 0,1,2") == 0);
  REQUIRE(cli(o + " experiment tsr --t-values 0,5,10 --samples-per-t 4") == 0);
  CHECK(fs::exists(dir / "tsr.csv"));

  REQUIRE(cli(o + " render " + (dir / "a.jsonl") + " --svg " + (dir / "svg")) == 0);
  int svgs = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "svg")) svgs += e.path().extension() == ".svg";
  CHECK(svgs == 10);
  CHECK(slurp(dir.path / "svg" / "layout_00000.svg").rfind("<!-- version=", 0) == 0);

  // Failures exit nonzero.
  CHECK(cli(o + " sample --denoiser " + (dir / "missing.ckpt")) != 0);
  const std::string other = dir / "other.json";
  std::ofstream(other) << R"({"vocab": {"num_bins": 16}, "schedule": {"T": 20}})";
  CHECK(cli("--config " + other + " --out " + dir.path.string() + " sample --n 2") != 0);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(cli("--config " + (dir / "broken.json") + " --out " + dir.path.string() + " synth") != 0);
  CHECK(cli(o + " experiment nothing") != 0);
}
