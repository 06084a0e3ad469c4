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

#include "layoutcorr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "layoutcorr/json_util.hpp"

namespace layoutcorr {

void SamplerConfig::validate(int T) const {
  if (steps < 1 || steps > T) throw Error(Errc::kConfig, "sampler steps must lie in [1, T]");
  for (int t : corrector_timesteps) {
    if (t < 1 || t > T) throw Error(Errc::kConfig, "corrector timestep " + std::to_string(t) + " outside [1, T]");
  }
  if (select.tau < 0.0) throw Error(Errc::kConfig, "tau must be non-negative");
  if (maskgit_steps < 1) throw Error(Errc::kConfig, "maskgit_steps must be positive");
}

nlohmann::json SamplerConfig::to_json() const {
  return nlohmann::json{{"steps", steps},
                        {"corrector_timesteps", corrector_timesteps},
                        {"threshold", select.threshold},
                        {"tau", select.tau},
                        {"select_mode", select_mode_name(select.mode)},
                        {"logit_space", select.logit_space},
                        {"maskgit_steps", maskgit_steps},
                        {"record_trace", record_trace},
                        {"seed", seed}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  ObjectReader r(j, "sampler");
  r.get("steps", c.steps);
  r.get("corrector_timesteps", c.corrector_timesteps);
  r.get("threshold", c.select.threshold);
  r.get("tau", c.select.tau);
  std::string mode = select_mode_name(c.select.mode);
  r.get("select_mode", mode);
  c.select.mode = parse_select_mode(mode);
  r.get("logit_space", c.select.logit_space);
  r.get("maskgit_steps", c.maskgit_steps);
  r.get("record_trace", c.record_trace);
  r.get("seed", c.seed);
  r.finish();
  return c;
}

int Condition::num_fixed() const { return static_cast<int>(std::count(fixed.begin(), fixed.end(), 1)); }

ConditionTask parse_condition_task(const std::string& name) {
  if (name == "c2sp" || name == "C->S+P") return ConditionTask::kCategory;
  if (name == "cs2p" || name == "C+S->P") return ConditionTask::kCategorySize;
  throw Error(Errc::kConfig, "unknown condition task '" + name + "'");
}

std::string condition_task_name(ConditionTask task) { return task == ConditionTask::kCategory ? "c2sp" : "cs2p"; }

Condition make_condition(const TokenSeq& reference, ConditionTask task, const Vocabulary& vocab) {
  Condition c;
  c.tokens = reference.tokens;
  c.fixed.assign(reference.tokens.size(), 0);
  for (int e = 0; e < reference.slots(); ++e) {
    const int base = e * kFieldsPerElement;
    if (reference.tokens[base] == vocab.pad_id()) {
      std::fill_n(c.fixed.begin() + base, kFieldsPerElement, 1);
      continue;
    }
    c.fixed[base] = 1;
    if (task == ConditionTask::kCategorySize) {
      c.fixed[base + static_cast<int>(Field::kW)] = 1;
      c.fixed[base + static_cast<int>(Field::kH)] = 1;
    }
  }
  return c;
}

void validate_condition(const Condition& c, const Vocabulary& vocab, int seq_len) {
  if (c.empty()) return;
  if (static_cast<int>(c.fixed.size()) != seq_len || static_cast<int>(c.tokens.size()) != seq_len) {
    throw Error(Errc::kInvalidArgument, "condition length does not match the sequence length");
  }
  for (int p = 0; p < seq_len; ++p) {
    if (c.fixed[p] && !vocab.is_legal(field_at(p), c.tokens[p])) {
      throw Error(Errc::kIllegalToken, "condition token " + std::to_string(c.tokens[p]) + " is illegal at position " +
                                           std::to_string(p));
    }
  }
}

std::vector<int> time_grid(int T, int steps) {
  if (steps < 1 || steps > T) throw Error(Errc::kConfig, "steps must lie in [1, T]");
  std::vector<int> g(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    g[k] = static_cast<int>((2LL * k * T + steps) / (2LL * steps));
  }
  return g;
}

std::vector<int> corrector_times_on_grid(const std::vector<int>& grid, const std::vector<int>& requested) {
  std::set<int> out;
  // Landing times of the reverse steps, excluding the final t = 0.
  const std::vector<int> landing(grid.begin() + 1, grid.end() - 1);
  if (landing.empty()) return {};
  for (int c : requested) {
    int best = landing.front();
    for (int v : landing) {
      if (std::abs(v - c) < std::abs(best - c)) best = v;
    }
    out.insert(best);
  }
  return {out.begin(), out.end()};
}

namespace {

void impose(TokenSeq& z, const Condition* c) {
  if (!c || c->empty()) return;
  for (std::size_t p = 0; p < z.tokens.size(); ++p) {
    if (c->fixed[p]) z.tokens[p] = c->tokens[p];
  }
}

struct Item {
  Rng rng;
  TokenSeq z;
  const Condition* cond = nullptr;
  GenerationResult result;
};

std::vector<Item> start_items(const Denoiser& denoiser, const SamplerConfig& cfg, int begin, int end,
                              const std::vector<Condition>& conditions) {
  const int len = denoiser.config().seq_len();
  std::vector<Item> items;
  for (int i = begin; i < end; ++i) {
    Item it{Rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i))), {}, nullptr, {}};
    it.z.tokens.assign(len, denoiser.vocab().mask_id());
    if (!conditions.empty()) it.cond = &conditions[conditions.size() == 1 ? 0 : i];
    impose(it.z, it.cond);
    items.push_back(std::move(it));
  }
  return items;
}

Eigen::MatrixXd rows_of(const nn::Mat<float>& probs, std::size_t item, int len) {
  return item_rows(probs, static_cast<int>(item), len);
}

// Scores mask-free proposals, re-masks the selected positions and writes the
// result into each item's state.
void correct(const Corrector& corrector, std::vector<Item>& items, std::vector<TokenSeq>& proposals,
             const std::vector<int>& tv, double gamma_bar, const SelectConfig& select, bool record) {
  auto scores = corrector.score_batch(proposals, tv);
  const Token mask = corrector.vocab().mask_id();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Item& it = items[i];
    ++it.result.trace.corrector_calls;
    std::vector<std::uint8_t> prot;
    if (it.cond && !it.cond->empty()) {
      prot = it.cond->fixed;
      for (std::size_t p = 0; p < prot.size(); ++p) {
        if (prot[p]) scores[i][p] = 1.0;
      }
    }
    const std::vector<int> sel = select_tokens_to_mask(scores[i], prot, select, gamma_bar, it.rng);
    it.z = std::move(proposals[i]);
    for (int p : sel) it.z.tokens[p] = mask;
    if (record) {
      TraceStep& st = it.result.trace.steps.back();
      st.tokens = it.z;
      st.masked_positions = sel;
      st.scores = std::move(scores[i]);
    }
  }
}

// Resamples surviving MASK positions from the denoiser at t = 1.
void finish_items(const Denoiser& denoiser, const DiffusionSchedule& s, std::vector<Item>& items) {
  const Vocabulary& vocab = denoiser.vocab();
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].z.has_mask(vocab)) pending.push_back(i);
  }
  if (!pending.empty()) {
    std::vector<TokenSeq> zs;
    for (std::size_t i : pending) zs.push_back(items[i].z);
    const nn::Mat<float> probs = denoiser.denoise_batch(zs, std::vector<int>(zs.size(), 1));
    const int len = denoiser.config().seq_len();
    for (std::size_t j = 0; j < pending.size(); ++j) {
      Item& it = items[pending[j]];
      ++it.result.trace.denoiser_calls;
      const Eigen::MatrixXd rev = reverse_distribution(rows_of(probs, j, len), it.z, 1, s);
      const TokenSeq fill = sample_tokens(rev, vocab, true, it.rng);
      for (int p = 0; p < len; ++p) {
        if (it.z.tokens[p] == vocab.mask_id()) it.z.tokens[p] = fill.tokens[p];
      }
      impose(it.z, it.cond);
      if (it.z.has_mask(vocab)) throw Error(Errc::kResidualMask, "MASK survived the final resampling pass");
    }
  }
  for (Item& it : items) {
    it.result.tokens = it.z;
    it.result.layout = detokenize_lenient(it.z, vocab, &it.result.dropped);
  }
}

void check_models(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s) {
  if (s.K() != denoiser.vocab().num_regular() || s.T() != denoiser.config().T) {
    throw Error(Errc::kIncompatible, "schedule does not match the denoiser");
  }
  if (corrector && (corrector->config().seq_len() != denoiser.config().seq_len() ||
                    corrector->config().num_classes() != denoiser.config().num_classes())) {
    throw Error(Errc::kIncompatible, "corrector and denoiser vocabularies differ");
  }
}

constexpr int kChunk = 64;

}  // namespace

std::vector<GenerationResult> generate_batch(const Denoiser& denoiser, const Corrector* corrector,
                                             const DiffusionSchedule& s, const SamplerConfig& cfg, int count,
                                             const std::vector<Condition>& conditions) {
  check_models(denoiser, corrector, s);
  const int T = denoiser.config().T;
  const int len = denoiser.config().seq_len();
  const Vocabulary& vocab = denoiser.vocab();
  cfg.validate(T);
  if (!conditions.empty() && conditions.size() != 1 && static_cast<int>(conditions.size()) != count) {
    throw Error(Errc::kInvalidArgument, "need one condition or one per item");
  }
  for (const Condition& c : conditions) validate_condition(c, vocab, len);

  const std::vector<int> grid = time_grid(T, cfg.steps);
  std::vector<int> fix_times;
  if (corrector) fix_times = corrector_times_on_grid(grid, cfg.corrector_timesteps);

  std::vector<GenerationResult> out;
  out.reserve(count);
  for (int begin = 0; begin < count; begin += kChunk) {
    const int end = std::min(count, begin + kChunk);
    std::vector<Item> items = start_items(denoiser, cfg, begin, end, conditions);
    std::vector<TokenSeq> zs(items.size()), proposals(items.size());
    for (int k = cfg.steps; k >= 1; --k) {
      const int t = grid[k];
      const int to = grid[k - 1];
      const bool fix = std::binary_search(fix_times.begin(), fix_times.end(), to);
      for (std::size_t i = 0; i < items.size(); ++i) zs[i] = items[i].z;
      const nn::Mat<float> probs = denoiser.denoise_batch(zs, std::vector<int>(items.size(), t));
      for (std::size_t i = 0; i < items.size(); ++i) {
        Item& it = items[i];
        ++it.result.trace.denoiser_calls;
        const Eigen::MatrixXd rev = to == t - 1 ? reverse_distribution(rows_of(probs, i, len), it.z, t, s)
                                                : fast_reverse_distribution(rows_of(probs, i, len), it.z, t, t - to, s);
        TokenSeq next = sample_tokens(rev, vocab, fix, it.rng);
        impose(next, it.cond);
        if (fix) {
          proposals[i] = std::move(next);
        } else {
          it.z = std::move(next);
        }
        if (cfg.record_trace) it.result.trace.steps.push_back({to, it.z, {}, {}});
      }
      if (fix) {
        correct(*corrector, items, proposals, std::vector<int>(items.size(), to + 1), s.gamma_bar(to), cfg.select,
                cfg.record_trace);
      }
    }
    finish_items(denoiser, s, items);
    for (Item& it : items) out.push_back(std::move(it.result));
  }
  return out;
}

GenerationResult generate(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                          const SamplerConfig& cfg) {
  return std::move(generate_batch(denoiser, corrector, s, cfg, 1).front());
}

GenerationResult generate_conditional(const Denoiser& denoiser, const Corrector* corrector,
                                      const DiffusionSchedule& s, const Condition& condition,
                                      const SamplerConfig& cfg) {
  return std::move(generate_batch(denoiser, corrector, s, cfg, 1, {condition}).front());
}

namespace {

// Smallest t whose cumulative mask probability reaches `fraction`.
int time_for_mask_fraction(const DiffusionSchedule& s, double fraction) {
  for (int t = 1; t <= s.T(); ++t) {
    if (s.gamma_bar(t) >= fraction - 1e-12) return t;
  }
  return s.T();
}

}  // namespace

std::vector<GenerationResult> maskgit_batch(const Denoiser& denoiser, const Corrector* corrector,
                                            const DiffusionSchedule& s, const SamplerConfig& cfg, int count,
                                            const std::vector<Condition>& conditions) {
  check_models(denoiser, corrector, s);
  const int len = denoiser.config().seq_len();
  const Vocabulary& vocab = denoiser.vocab();
  const Token mask = vocab.mask_id();
  cfg.validate(denoiser.config().T);
  if (!conditions.empty() && conditions.size() != 1 && static_cast<int>(conditions.size()) != count) {
    throw Error(Errc::kInvalidArgument, "need one condition or one per item");
  }
  for (const Condition& c : conditions) validate_condition(c, vocab, len);
  const int steps = cfg.maskgit_steps;
  const auto rate = [&](int k) { return k >= steps ? 0.0 : std::cos(M_PI / 2.0 * k / steps); };

  std::vector<GenerationResult> out;
  out.reserve(count);
  for (int begin = 0; begin < count; begin += kChunk) {
    const int end = std::min(count, begin + kChunk);
    std::vector<Item> items = start_items(denoiser, cfg, begin, end, conditions);
    std::vector<TokenSeq> zs(items.size()), proposals(items.size());
    std::vector<int> tv(items.size());
    for (int k = 1; k <= steps; ++k) {
      for (std::size_t i = 0; i < items.size(); ++i) {
        zs[i] = items[i].z;
        const long masked = std::count(zs[i].tokens.begin(), zs[i].tokens.end(), mask);
        tv[i] = time_for_mask_fraction(s, static_cast<double>(masked) / len);
      }
      const nn::Mat<float> probs = denoiser.denoise_batch(zs, tv);
      const bool fix = corrector != nullptr && k < steps;
      std::vector<int> t_after(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        Item& it = items[i];
        ++it.result.trace.denoiser_calls;
        const TokenSeq cand = sample_tokens(rows_of(probs, i, len), vocab, true, it.rng);
        std::vector<std::pair<double, int>> conf;
        int free_positions = 0;
        for (int p = 0; p < len; ++p) {
          const bool fixed = it.cond && !it.cond->empty() && it.cond->fixed[p];
          if (!fixed) ++free_positions;
          if (it.z.tokens[p] == mask) conf.push_back({-static_cast<double>(probs(i * len + p, cand.tokens[p])), p});
        }
        const int target = static_cast<int>(std::floor(free_positions * rate(k)));
        const int commit = std::max(0, static_cast<int>(conf.size()) - target);
        std::stable_sort(conf.begin(), conf.end());
        for (int j = 0; j < commit; ++j) it.z.tokens[conf[j].second] = cand.tokens[conf[j].second];
        impose(it.z, it.cond);
        const long masked = std::count(it.z.tokens.begin(), it.z.tokens.end(), mask);
        t_after[i] = std::max(1, time_for_mask_fraction(s, static_cast<double>(masked) / len));
        if (fix) {
          proposals[i] = it.z;
          for (int p = 0; p < len; ++p) {
            if (proposals[i].tokens[p] == mask) proposals[i].tokens[p] = cand.tokens[p];
          }
        }
        if (cfg.record_trace) it.result.trace.steps.push_back({k, it.z, {}, {}});
      }
      if (fix) {
        // Keep uncommitted positions masked; the corrector may add more.
        std::vector<TokenSeq> committed(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) committed[i] = items[i].z;
        correct(*corrector, items, proposals, t_after, 0.0, cfg.select, cfg.record_trace);
        for (std::size_t i = 0; i < items.size(); ++i) {
          for (int p = 0; p < len; ++p) {
            if (committed[i].tokens[p] == mask) items[i].z.tokens[p] = mask;
          }
          if (cfg.record_trace) items[i].result.trace.steps.back().tokens = items[i].z;
        }
      }
    }
    finish_items(denoiser, s, items);
    for (Item& it : items) out.push_back(std::move(it.result));
  }
  return out;
}

GenerationResult maskgit_decode(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                                const SamplerConfig& cfg) {
  return std::move(maskgit_batch(denoiser, corrector, s, cfg, 1).front());
}

std::string trace_to_jsonl(const GenerationTrace& trace) {
  std::string out;
  for (const TraceStep& st : trace.steps) {
    nlohmann::ordered_json j{{"t", st.t},
                             {"tokens", st.tokens.tokens},
                             {"masked_positions", st.masked_positions},
                             {"scores", st.scores}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace layoutcorr
