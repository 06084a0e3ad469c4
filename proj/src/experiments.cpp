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

#include "layoutcorr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace layoutcorr {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string Table::to_csv(const std::string& provenance) const {
  std::ostringstream os;
  os << "# " << schema;
  if (!provenance.empty()) os << " " << provenance;
  os << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

ReplaceMode parse_replace_mode(const std::string& name) {
  if (name == "mask-replace" || name == "mask") return ReplaceMode::kMask;
  if (name == "token-replace" || name == "token") return ReplaceMode::kToken;
  throw Error(Errc::kConfig, "unknown replace mode '" + name + "'");
}

std::string replace_mode_name(ReplaceMode m) { return m == ReplaceMode::kMask ? "mask-replace" : "token-replace"; }

namespace {

constexpr int kChunk = 64;

// Runs reverse steps t_start -> 0 on every sequence in place.
void run_reverse(const Denoiser& denoiser, const DiffusionSchedule& s, std::vector<TokenSeq>& zs, int t_start,
                 Rng& rng) {
  const int len = denoiser.config().seq_len();
  for (int t = t_start; t >= 1; --t) {
    const nn::Mat<float> probs = denoiser.denoise_batch(zs, std::vector<int>(zs.size(), t));
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const Eigen::MatrixXd p = item_rows(probs, static_cast<int>(i), len);
      zs[i] = sample_tokens(reverse_distribution(p, zs[i], t, s), denoiser.vocab(), false, rng);
    }
  }
}

const TokenSeq& draw(const std::vector<TokenSeq>& corpus, Rng& rng) {
  if (corpus.empty()) throw Error(Errc::kInvalidArgument, "experiment needs a non-empty corpus");
  return corpus[rng.below(corpus.size())];
}

}  // namespace

std::vector<TsrPoint> tsr_curve(const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                                const DiffusionSchedule& s, const std::vector<int>& t_values, int samples_per_t,
                                Rng& rng) {
  const Token mask = denoiser.vocab().mask_id();
  std::vector<TsrPoint> out;
  for (int t : t_values) {
    if (t < 0 || t > s.T()) throw Error(Errc::kInvalidArgument, "TSR timestep outside [0, T]");
    TsrPoint pt;
    pt.t = t;
    long kept = 0;
    for (int done = 0; done < samples_per_t; done += kChunk) {
      const int m = std::min(kChunk, samples_per_t - done);
      std::vector<TokenSeq> zt(m);
      for (auto& z : zt) z = t == 0 ? draw(corpus, rng) : forward_sample(draw(corpus, rng), t, s, rng);
      std::vector<TokenSeq> z = zt;
      if (t > 0) run_reverse(denoiser, s, z, t, rng);
      for (int i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < zt[i].tokens.size(); ++p) {
          if (zt[i].tokens[p] == mask) continue;
          ++pt.tokens;
          kept += (z[i].tokens[p] == zt[i].tokens[p]);
        }
      }
    }
    pt.tsr = pt.tokens ? static_cast<double>(kept) / pt.tokens : 1.0;
    out.push_back(pt);
  }
  return out;
}

Table tsr_table(const std::vector<TsrPoint>& points, const std::string& profile) {
  Table tb{"tsr-v1", {"profile", "t", "tsr", "tokens"}, {}};
  for (const auto& p : points) tb.add({profile, std::to_string(p.t), fmt(p.tsr), std::to_string(p.tokens)});
  return tb;
}

std::vector<int> pick_positions(const TokenSeq& seq, const Vocabulary& vocab, int n, bool geometry_only, Rng& rng) {
  std::vector<int> cand;
  for (int p = 0; p < seq.length(); ++p) {
    const int base = p - p % kFieldsPerElement;
    if (seq.tokens[base] == vocab.pad_id()) continue;
    if (geometry_only && field_at(p) == Field::kCategory) continue;
    cand.push_back(p);
  }
  if (static_cast<int>(cand.size()) < n) throw Error(Errc::kInvalidArgument, "layout too small for the replacement");
  rng.shuffle(cand.begin(), cand.end());
  cand.resize(n);
  std::sort(cand.begin(), cand.end());
  return cand;
}

Token random_other_token(Token current, int position, const Vocabulary& vocab, Rng& rng) {
  std::vector<Token> options;
  for (Token k : vocab.legal_tokens(field_at(position))) {
    if (k != current && k != vocab.pad_id()) options.push_back(k);
  }
  if (options.empty()) return current;
  return options[rng.below(options.size())];
}

RecoveryResult token_correction_success(const Denoiser& denoiser, const std::vector<TokenSeq>& corpus,
                                        const DiffusionSchedule& s, ReplaceMode mode, int t_start, int n_replace,
                                        int trials, Rng& rng) {
  RecoveryResult r;
  r.trials = trials;
  if (n_replace == 0) {
    r.successes = trials;
    return r;
  }
  const Vocabulary& vocab = denoiser.vocab();
  for (int done = 0; done < trials; done += kChunk) {
    const int m = std::min(kChunk, trials - done);
    std::vector<TokenSeq> clean(m), z(m);
    std::vector<std::vector<int>> where(m);
    for (int i = 0; i < m; ++i) {
      clean[i] = draw(corpus, rng);
      z[i] = clean[i];
      where[i] = pick_positions(clean[i], vocab, n_replace, false, rng);
      for (int p : where[i]) {
        z[i].tokens[p] = mode == ReplaceMode::kMask ? vocab.mask_id() : random_other_token(clean[i].tokens[p], p, vocab, rng);
      }
    }
    run_reverse(denoiser, s, z, t_start, rng);
    for (int i = 0; i < m; ++i) {
      bool ok = true;
      for (int p : where[i]) ok = ok && z[i].tokens[p] == clean[i].tokens[p];
      r.successes += ok;
    }
  }
  return r;
}

DetectionResult detection_accuracy(const Corrector& corrector, const std::vector<TokenSeq>& corpus, int n_replace,
                                   int t_eval, int trials, Rng& rng) {
  const Vocabulary& vocab = corrector.vocab();
  DetectionResult r;
  r.trials = trials;
  double acc = 0.0, chance = 0.0;
  for (int done = 0; done < trials; done += kChunk) {
    const int m = std::min(kChunk, trials - done);
    std::vector<TokenSeq> z(m);
    std::vector<std::vector<int>> where(m);
    for (int i = 0; i < m; ++i) {
      z[i] = draw(corpus, rng);
      where[i] = pick_positions(z[i], vocab, n_replace, false, rng);
      for (int p : where[i]) z[i].tokens[p] = random_other_token(z[i].tokens[p], p, vocab, rng);
    }
    const auto scores = corrector.score_batch(z, std::vector<int>(m, t_eval));
    for (int i = 0; i < m; ++i) {
      // Rank only positions of real elements, as the corruption does.
      std::vector<int> live;
      for (int p = 0; p < z[i].length(); ++p) {
        if (z[i].tokens[p - p % kFieldsPerElement] != vocab.pad_id()) live.push_back(p);
      }
      std::stable_sort(live.begin(), live.end(), [&](int a, int b) { return scores[i][a] < scores[i][b]; });
      live.resize(n_replace);
      int hit = 0;
      for (int p : where[i]) hit += std::find(live.begin(), live.end(), p) != live.end();
      acc += static_cast<double>(hit) / n_replace;
      chance += static_cast<double>(n_replace) / (z[i].element_count(vocab) * kFieldsPerElement);
    }
  }
  r.accuracy = acc / trials;
  r.chance = chance / trials;
  return r;
}

std::vector<CorruptionPoint> score_vs_corruption(const Corrector& corrector, const std::vector<TokenSeq>& corpus,
                                                 const std::vector<int>& caps, int t_eval, int trials, Rng& rng) {
  const Vocabulary& vocab = corrector.vocab();
  const int B = vocab.num_bins();
  for (int cap : caps) {
    if (cap < 0 || 2 * cap > B) throw Error(Errc::kInvalidArgument, "cap must lie in [0, B/2]");
  }
  std::vector<double> rep_sum(caps.size(), 0.0), clean_sum(caps.size(), 0.0);
  std::vector<long> rep_n(caps.size(), 0), clean_n(caps.size(), 0);
  // Every cap sees the same layouts, positions and draws (u, sign); the
  // offset magnitude is ceil(u * cap), reflected when it leaves the range.
  for (int done = 0; done < trials; done += kChunk) {
    const int m = std::min(kChunk, trials - done);
    std::vector<TokenSeq> base(m);
    std::vector<std::vector<int>> where(m);
    std::vector<std::vector<std::pair<double, bool>>> draws(m);
    for (int i = 0; i < m; ++i) {
      base[i] = draw(corpus, rng);
      where[i] = pick_positions(base[i], vocab, 3, true, rng);
      for (std::size_t j = 0; j < where[i].size(); ++j) draws[i].push_back({rng.uniform_open(), rng.bernoulli(0.5)});
    }
    for (std::size_t c = 0; c < caps.size(); ++c) {
      const int cap = caps[c];
      std::vector<TokenSeq> z = base;
      if (cap > 0) {
        for (int i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < where[i].size(); ++j) {
            const int p = where[i][j];
            const int bin = vocab.bin_of(z[i].tokens[p]);
            const int mag = std::clamp(static_cast<int>(std::ceil(draws[i][j].first * cap)), 1, cap);
            int moved = draws[i][j].second ? bin + mag : bin - mag;
            if (moved < 0 || moved >= B) moved = draws[i][j].second ? bin - mag : bin + mag;
            z[i].tokens[p] = vocab.geometry_token(moved);
          }
        }
      }
      const auto scores = corrector.score_batch(z, std::vector<int>(m, t_eval));
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < z[i].length(); ++p) {
          if (z[i].tokens[p - p % kFieldsPerElement] == vocab.pad_id()) continue;
          if (std::binary_search(where[i].begin(), where[i].end(), p)) {
            rep_sum[c] += scores[i][p];
            ++rep_n[c];
          } else {
            clean_sum[c] += scores[i][p];
            ++clean_n[c];
          }
        }
      }
    }
  }
  std::vector<CorruptionPoint> out;
  for (std::size_t c = 0; c < caps.size(); ++c) {
    out.push_back({caps[c], rep_n[c] ? rep_sum[c] / rep_n[c] : 0.0, clean_n[c] ? clean_sum[c] / clean_n[c] : 0.0});
  }
  return out;
}

Table corruption_table(const std::vector<CorruptionPoint>& points) {
  Table tb{"score-vs-corruption-v1", {"cap", "replaced_mean", "clean_mean"}, {}};
  for (const auto& p : points) tb.add({std::to_string(p.cap), fmt(p.replaced_mean), fmt(p.clean_mean)});
  return tb;
}

SampleQuality sample_quality(const Denoiser& denoiser, const Corrector* corrector, const DiffusionSchedule& s,
                             const SamplerConfig& cfg, int count, const std::vector<Layout>& real, int k) {
  const auto results = generate_batch(denoiser, corrector, s, cfg, count);
  std::vector<Layout> layouts;
  layouts.reserve(results.size());
  for (const auto& r : results) layouts.push_back(r.layout);
  SampleQuality q;
  q.steps = cfg.steps;
  q.corrected = corrector != nullptr && !cfg.corrector_timesteps.empty();
  ReportOptions opt;
  opt.k = k;
  opt.with_max_iou = false;
  q.report = evaluate_layouts(layouts, real, denoiser.vocab(), denoiser.config().n_max, opt);
  return q;
}

std::vector<std::vector<int>> nested_schedules(int count, int step) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  for (int i = 1; i <= count; ++i) {
    cur.push_back(i * step);
    out.push_back(cur);
  }
  return out;
}

std::string schedule_name(const std::vector<int>& schedule) {
  std::string s = "{";
  for (std::size_t i = 0; i < schedule.size(); ++i) s += (i ? " " : "") + std::to_string(schedule[i]);
  return s + "}";
}

std::vector<SampleQuality> sweep_schedules(const Denoiser& denoiser, const Corrector& corrector,
                                           const DiffusionSchedule& s, const std::vector<std::vector<int>>& schedules,
                                           const SamplerConfig& base, int count, const std::vector<Layout>& real,
                                           bool include_baseline) {
  std::vector<SampleQuality> out;
  std::vector<std::vector<int>> all;
  if (include_baseline) all.push_back({});
  all.insert(all.end(), schedules.begin(), schedules.end());
  for (const auto& sched : all) {
    SamplerConfig cfg = base;
    cfg.corrector_timesteps = sched;
    SampleQuality q = sample_quality(denoiser, sched.empty() ? nullptr : &corrector, s, cfg, count, real);
    q.label = schedule_name(sched);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<SampleQuality> speed_quality(const Denoiser& denoiser, const Corrector& corrector,
                                         const DiffusionSchedule& s, const std::vector<int>& steps,
                                         const SamplerConfig& base, int count, const std::vector<Layout>& real) {
  std::vector<SampleQuality> out;
  for (int st : steps) {
    for (bool corrected : {false, true}) {
      SamplerConfig cfg = base;
      cfg.steps = st;
      SampleQuality q = sample_quality(denoiser, corrected ? &corrector : nullptr, s, cfg, count, real);
      q.label = corrected ? "corrector" : "plain";
      out.push_back(std::move(q));
    }
  }
  return out;
}

Table quality_table(const std::vector<SampleQuality>& rows, const std::string& schema) {
  Table tb{schema, {"label", "steps", "corrected", "frechet_geo", "precision", "recall", "alignment_x100", "overlap_x100"},
           {}};
  for (const auto& q : rows) {
    tb.add({q.label, std::to_string(q.steps), q.corrected ? "1" : "0", fmt(q.report.frechet), fmt(q.report.precision),
            fmt(q.report.recall), fmt(q.report.alignment * 100.0), fmt(q.report.overlap * 100.0)});
  }
  return tb;
}

Table speed_quality_table(const std::vector<SampleQuality>& rows) {
  Table tb{"speed-quality-v1",
           {"steps", "frechet_plain", "frechet_corrector", "precision_plain", "precision_corrector", "recall_plain",
            "recall_corrector"},
           {}};
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const MetricReport& a = rows[i].report;
    const MetricReport& b = rows[i + 1].report;
    tb.add({std::to_string(rows[i].steps), fmt(a.frechet), fmt(b.frechet), fmt(a.precision), fmt(b.precision),
            fmt(a.recall), fmt(b.recall)});
  }
  return tb;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(Errc::kInvalidArgument, "spearman needs paired samples");
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

int inversions(const std::vector<double>& v, bool increasing) {
  int n = 0;
  for (std::size_t i = 1; i < v.size(); ++i) n += increasing ? v[i] < v[i - 1] : v[i] > v[i - 1];
  return n;
}

}  // namespace layoutcorr
