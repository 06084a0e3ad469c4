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

#include "layoutcorr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "layoutcorr/json_util.hpp"

namespace layoutcorr {

namespace {

const char* const kVocabKeys[] = {"num_categories", "num_bins", "n_max", "T"};

// Splits the shared vocabulary keys off a model section; they live in
// [vocab] and [schedule] only.
nlohmann::json model_part(const nlohmann::json& j, const char* section) {
  nlohmann::json m = j;
  for (const char* k : kVocabKeys) {
    if (m.contains(k)) {
      throw Error(Errc::kConfig, std::string("[") + section + "] '" + k + "' belongs in [vocab]/[schedule]");
    }
  }
  m.erase("train");
  m.erase("aux_weight");
  return m;
}

nlohmann::json strip_vocab(nlohmann::json j) {
  for (const char* k : kVocabKeys) j.erase(k);
  return j;
}

template <typename T>
void take(nlohmann::json& j, const char* key, T& out, const char* section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::kConfig, std::string("[") + section + "] bad value for '" + key + "'");
  }
  j.erase(it);
}

}  // namespace

RunConfig::RunConfig() {
  denoiser.train.opt.lr = 1e-3;
  denoiser.train.steps = 6000;
  corrector.train.opt.lr = 1e-3;
  corrector.train.steps = 3000;
  validate();
}

DiffusionSchedule RunConfig::make_schedule() const {
  return DiffusionSchedule::build(schedule.T, make_vocab().num_regular(), schedule.profile);
}

void RunConfig::validate() {
  if (vocab.num_categories < 1 || vocab.num_bins < 1 || vocab.n_max < 1) {
    throw Error(Errc::kConfig, "[vocab] sizes must be positive");
  }
  if (schedule.T < 1) throw Error(Errc::kConfig, "[schedule] T must be positive");
  for (auto* m : {&denoiser.model.num_categories, &corrector.model.num_categories, &data.synth.num_categories}) {
    *m = vocab.num_categories;
  }
  for (auto* m : {&denoiser.model.num_bins, &corrector.model.num_bins, &data.synth.num_bins}) *m = vocab.num_bins;
  denoiser.model.n_max = corrector.model.n_max = vocab.n_max;
  denoiser.model.T = corrector.model.T = schedule.T;
  denoiser.model.validate();
  corrector.model.validate();
  sampler.validate(schedule.T);
  data.synth.validate(vocab.n_max);
  if (eval.k < 1 || eval.num_samples < 1) throw Error(Errc::kConfig, "[eval] k and num_samples must be positive");
  const double sum = data.train_frac + data.val_frac + data.test_frac;
  if (data.train_frac < 0 || data.val_frac < 0 || data.test_frac < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error(Errc::kConfig, "[data] split fractions must be non-negative and sum to 1");
  }
  // Surfaces the infeasible-profile error at load time.
  make_schedule();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json d = strip_vocab(denoiser.model.to_json());
  d["train"] = denoiser.train.to_json();
  d["aux_weight"] = denoiser.aux_weight;
  nlohmann::json c = strip_vocab(corrector.model.to_json());
  c["train"] = corrector.train.to_json();
  nlohmann::json data_j = data.synth.to_json();
  data_j.erase("num_categories");
  data_j.erase("num_bins");
  data_j["train_frac"] = data.train_frac;
  data_j["val_frac"] = data.val_frac;
  data_j["test_frac"] = data.test_frac;
  data_j["split_seed"] = data.split_seed;
  return nlohmann::json{
      {"vocab", {{"num_categories", vocab.num_categories}, {"num_bins", vocab.num_bins}, {"n_max", vocab.n_max}}},
      {"schedule", {{"T", schedule.T}, {"profile", schedule.profile.name()}}},
      {"denoiser", d},
      {"corrector", c},
      {"sampler", sampler.to_json()},
      {"eval", {{"k", eval.k}, {"num_samples", eval.num_samples}, {"with_max_iou", eval.with_max_iou}}},
      {"data", data_j}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig rc;
  ObjectReader top(j, "root");
  if (const auto* v = top.sub("vocab")) {
    ObjectReader r(*v, "vocab");
    r.get("num_categories", rc.vocab.num_categories);
    r.get("num_bins", rc.vocab.num_bins);
    r.get("n_max", rc.vocab.n_max);
    r.finish();
  }
  const auto fill_vocab = [&](nlohmann::json m) {
    m["num_categories"] = rc.vocab.num_categories;
    m["num_bins"] = rc.vocab.num_bins;
    m["n_max"] = rc.vocab.n_max;
    m["T"] = rc.schedule.T;
    return m;
  };
  if (const auto* s = top.sub("schedule")) {
    ObjectReader r(*s, "schedule");
    std::string profile = rc.schedule.profile.name();
    r.get("T", rc.schedule.T);
    r.get("profile", profile);
    r.finish();
    rc.schedule.profile = BetaProfile::parse(profile);
  }
  if (const auto* d = top.sub("denoiser")) {
    if (!d->is_object()) throw Error(Errc::kConfig, "[denoiser] must be an object");
    rc.denoiser.model = DenoiserConfig::from_json(fill_vocab(model_part(*d, "denoiser")));
    if (d->contains("train")) rc.denoiser.train = TrainConfig::from_json(d->at("train"));
    nlohmann::json rest = *d;
    take(rest, "aux_weight", rc.denoiser.aux_weight, "denoiser");
    if (rc.denoiser.aux_weight < 0) throw Error(Errc::kConfig, "[denoiser] aux_weight must be non-negative");
  } else {
    rc.denoiser.model = DenoiserConfig::from_json(fill_vocab(strip_vocab(rc.denoiser.model.to_json())));
  }
  if (const auto* c = top.sub("corrector")) {
    if (!c->is_object()) throw Error(Errc::kConfig, "[corrector] must be an object");
    if (c->contains("aux_weight")) throw Error(Errc::kConfig, "[corrector] unknown key 'aux_weight'");
    rc.corrector.model = CorrectorConfig::from_json(fill_vocab(model_part(*c, "corrector")));
    if (c->contains("train")) rc.corrector.train = TrainConfig::from_json(c->at("train"));
  }
  if (const auto* s = top.sub("sampler")) rc.sampler = SamplerConfig::from_json(*s);
  if (const auto* e = top.sub("eval")) {
    ObjectReader r(*e, "eval");
    r.get("k", rc.eval.k);
    r.get("num_samples", rc.eval.num_samples);
    r.get("with_max_iou", rc.eval.with_max_iou);
    r.finish();
  }
  if (const auto* d = top.sub("data")) {
    if (!d->is_object()) throw Error(Errc::kConfig, "[data] must be an object");
    nlohmann::json rest = *d;
    for (const char* k : {"num_categories", "num_bins"}) {
      if (rest.contains(k)) throw Error(Errc::kConfig, std::string("[data] '") + k + "' belongs in [vocab]");
    }
    take(rest, "train_frac", rc.data.train_frac, "data");
    take(rest, "val_frac", rc.data.val_frac, "data");
    take(rest, "test_frac", rc.data.test_frac, "data");
    take(rest, "split_seed", rc.data.split_seed, "data");
    rc.data.synth = SynthConfig::from_json(rest);
  }
  top.finish();
  rc.validate();
  return rc;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kConfig, path + ": " + e.what());
  }
  return from_json(j);
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace layoutcorr
