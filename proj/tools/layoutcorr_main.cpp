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

// layoutcorr command-line tool.

#include <Eigen/Core>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "layoutcorr/checkpoint.hpp"
#include "layoutcorr/config.hpp"
#include "layoutcorr/experiments.hpp"
#include "layoutcorr/features.hpp"
#include "layoutcorr/render.hpp"

namespace fs = std::filesystem;
using namespace layoutcorr;

namespace {

struct Global {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
};

struct Context {
  RunConfig rc;
  std::string hash;
  fs::path out;

  Vocabulary vocab() const { return rc.make_vocab(); }
  int n_max() const { return rc.vocab.n_max; }

  nlohmann::json provenance(std::uint64_t seed) const {
    return nlohmann::ordered_json{{"version", kVersion}, {"config_hash", hash}, {"seed", seed}};
  }
  std::string provenance_line(std::uint64_t seed) const {
    return std::string("version=") + kVersion + " config_hash=" + hash + " seed=" + std::to_string(seed);
  }
  std::string path(const std::string& name) const { return (out / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::kIo, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(Errc::kIo, "write failed for '" + path + "'");
}

Context make_context(const Global& g) {
  Context ctx;
  if (!g.config.empty()) ctx.rc = RunConfig::load(g.config);
  if (g.seed) {
    ctx.rc.sampler.seed = *g.seed;
    ctx.rc.data.synth.seed = *g.seed;
    ctx.rc.data.split_seed = *g.seed;
    ctx.rc.denoiser.train.seed = *g.seed;
    ctx.rc.corrector.train.seed = *g.seed;
  }
  ctx.rc.validate();
  ctx.hash = ctx.rc.hash();
  std::string out = g.out;
  if (out.empty()) {
    const char* env = std::getenv("LAYOUTCORR_OUT");
    out = env && *env ? env : "runs";
  }
  ctx.out = out;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw Error(Errc::kIo, "cannot create '" + out + "': " + ec.message());
  Eigen::setNbThreads(std::max(1, g.threads));
  nlohmann::json resolved = ctx.rc.to_json();
  resolved["config_hash"] = ctx.hash;
  write_file(ctx.path("config.json"), resolved.dump(2) + "\n");
  return ctx;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw Error(Errc::kIo, std::string("missing ") + what + " '" + path + "'");
}

std::string or_default(const std::string& v, const Context& ctx, const char* name) {
  return v.empty() ? ctx.path(name) : v;
}

Dataset load_data(const Context& ctx, const std::string& path) {
  require_file(path, "dataset");
  return load_jsonl(path, ctx.vocab(), ctx.n_max());
}

// Checkpoints must agree with [vocab] and [schedule].
Denoiser open_denoiser(const Context& ctx, const std::string& path) {
  require_file(path, "denoiser checkpoint");
  const CheckpointHeader h = read_checkpoint_header(path);
  Denoiser d = load_denoiser(path);
  const DenoiserConfig& c = d.config();
  if (c.num_categories != ctx.rc.vocab.num_categories || c.num_bins != ctx.rc.vocab.num_bins ||
      c.n_max != ctx.rc.vocab.n_max || c.T != ctx.rc.schedule.T) {
    throw Error(Errc::kIncompatible, path + ": denoiser vocabulary or T differs from the config");
  }
  if (h.meta.is_object() && h.meta.contains("schedule") &&
      h.meta["schedule"].value("profile", "") != ctx.rc.schedule.profile.name()) {
    throw Error(Errc::kIncompatible, path + ": trained with schedule '" + h.meta["schedule"].value("profile", "") +
                                         "', config uses '" + ctx.rc.schedule.profile.name() + "'");
  }
  return d;
}

Corrector open_corrector(const Context& ctx, const std::string& path) {
  require_file(path, "corrector checkpoint");
  Corrector c = load_corrector(path);
  const CorrectorConfig& k = c.config();
  if (k.num_categories != ctx.rc.vocab.num_categories || k.num_bins != ctx.rc.vocab.num_bins ||
      k.n_max != ctx.rc.vocab.n_max || k.T != ctx.rc.schedule.T) {
    throw Error(Errc::kIncompatible, path + ": corrector vocabulary or T differs from the config");
  }
  return c;
}

void save_dataset(const Context& ctx, const std::string& name, const std::vector<Layout>& layouts,
                  nlohmann::json meta) {
  save_jsonl(Dataset{std::move(meta), layouts}, ctx.path(name));
}

std::vector<Layout> layouts_of(const std::vector<GenerationResult>& results) {
  std::vector<Layout> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.layout);
  return out;
}

void note(const std::string& msg) { std::cerr << msg << "\n"; }

// ---- synth ----

struct SynthOpts {
  std::optional<int> count;
  std::optional<std::string> grammar;
  std::optional<int> jitter;
};

int run_synth(const Global& g, const SynthOpts& o) {
  Context ctx = make_context(g);
  SynthConfig& sc = ctx.rc.data.synth;
  if (o.count) sc.count = *o.count;
  if (o.grammar) sc.grammar = parse_grammar(*o.grammar);
  if (o.jitter) sc.jitter = *o.jitter;
  sc.validate(ctx.n_max());
  ctx.hash = ctx.rc.hash();
  const auto layouts = synth_generate(sc);
  const Split sp = split_dataset(layouts, ctx.rc.data.train_frac, ctx.rc.data.val_frac, ctx.rc.data.test_frac,
                                 ctx.rc.data.split_seed);
  nlohmann::json meta = ctx.provenance(sc.seed);
  meta["synth"] = sc.to_json();
  const auto with_part = [&](const char* part) {
    nlohmann::json m = meta;
    m["part"] = part;
    return m;
  };
  save_dataset(ctx, "dataset.jsonl", layouts, with_part("all"));
  save_dataset(ctx, "train.jsonl", sp.train, with_part("train"));
  save_dataset(ctx, "val.jsonl", sp.val, with_part("val"));
  save_dataset(ctx, "test.jsonl", sp.test, with_part("test"));
  nlohmann::ordered_json manifest = ctx.provenance(sc.seed);
  manifest["grammar"] = grammar_name(sc.grammar);
  manifest["split_seed"] = ctx.rc.data.split_seed;
  manifest["counts"] = {{"total", layouts.size()}, {"train", sp.train.size()}, {"val", sp.val.size()},
                        {"test", sp.test.size()}};
  manifest["files"] = {"dataset.jsonl", "train.jsonl", "val.jsonl", "test.jsonl"};
  write_file(ctx.path("manifest.json"), manifest.dump(2) + "\n");
  note("wrote " + std::to_string(layouts.size()) + " layouts to " + ctx.out.string());
  return 0;
}

// ---- training ----

struct TrainOpts {
  std::string data;
  std::string denoiser;
  std::optional<int> steps;
  std::optional<std::string> objective;
  int log_every = 100;
};

std::string log_csv(const char* schema, const std::vector<std::pair<int, double>>& rows, const std::string& prov) {
  Table tb{schema, {"step", "ema_loss"}, {}};
  for (const auto& [step, loss] : rows) tb.add({std::to_string(step), fmt(loss)});
  return tb.to_csv(prov);
}

int run_train_ddm(const Global& g, const TrainOpts& o) {
  Context ctx = make_context(g);
  if (o.steps) ctx.rc.denoiser.train.steps = *o.steps;
  ctx.hash = ctx.rc.hash();
  const Dataset ds = load_data(ctx, or_default(o.data, ctx, "train.jsonl"));
  const auto corpus = tokenize_all(ds.layouts, ctx.vocab(), ctx.n_max());
  const DiffusionSchedule s = ctx.rc.make_schedule();
  TrainConfig tc = ctx.rc.denoiser.train;
  tc.log_every = o.log_every;
  Denoiser model(ctx.rc.denoiser.model, tc.seed);
  std::vector<std::pair<int, double>> log;
  const TrainLog tl = train_denoiser(model, corpus, s, tc, ctx.rc.denoiser.aux_weight, [&](int step, double loss) {
    log.push_back({step, loss});
    note("step " + std::to_string(step) + " loss " + fmt(loss));
  });
  nlohmann::json meta = ctx.provenance(tc.seed);
  meta["schedule"] = {{"T", s.T()}, {"profile", s.profile().name()}};
  meta["train"] = tc.to_json();
  meta["train_size"] = corpus.size();
  save_denoiser(model, ctx.path("denoiser.ckpt"), meta);
  write_file(ctx.path("train_ddm.csv"), log_csv("train-log-v1", log, ctx.provenance_line(tc.seed)));
  (void)tl;
  note("saved " + ctx.path("denoiser.ckpt"));
  return 0;
}

int run_train_corrector(const Global& g, const TrainOpts& o) {
  Context ctx = make_context(g);
  if (o.steps) ctx.rc.corrector.train.steps = *o.steps;
  if (o.objective) ctx.rc.corrector.model.objective = parse_objective(*o.objective);
  ctx.hash = ctx.rc.hash();
  const Denoiser denoiser = open_denoiser(ctx, or_default(o.denoiser, ctx, "denoiser.ckpt"));
  const Dataset ds = load_data(ctx, or_default(o.data, ctx, "train.jsonl"));
  const auto corpus = tokenize_all(ds.layouts, ctx.vocab(), ctx.n_max());
  const DiffusionSchedule s = ctx.rc.make_schedule();
  TrainConfig tc = ctx.rc.corrector.train;
  tc.log_every = o.log_every;
  Corrector corrector(ctx.rc.corrector.model, tc.seed);
  std::vector<std::pair<int, double>> log;
  train_corrector(corrector, denoiser, corpus, s, tc, [&](int step, double loss) {
    log.push_back({step, loss});
    note("step " + std::to_string(step) + " bce " + fmt(loss));
  });
  nlohmann::json meta = ctx.provenance(tc.seed);
  meta["objective"] = objective_name(corrector.config().objective);
  meta["train"] = tc.to_json();
  save_corrector(corrector, ctx.path("corrector.ckpt"), meta);
  write_file(ctx.path("train_corrector.csv"), log_csv("train-log-v1", log, ctx.provenance_line(tc.seed)));
  note("saved " + ctx.path("corrector.ckpt"));
  return 0;
}

// ---- sampling ----

struct SamplerOpts {
  std::optional<int> steps;
  std::optional<std::vector<int>> corrector_timesteps;
  std::optional<double> threshold;
  std::optional<double> tau;
  std::optional<std::string> select_mode;
  bool logit_space = false;
  std::optional<int> maskgit_steps;
};

void apply(SamplerConfig& c, const SamplerOpts& o) {
  if (o.steps) c.steps = *o.steps;
  if (o.corrector_timesteps) c.corrector_timesteps = *o.corrector_timesteps;
  if (o.threshold) c.select.threshold = *o.threshold;
  if (o.tau) c.select.tau = *o.tau;
  if (o.select_mode) c.select.mode = parse_select_mode(*o.select_mode);
  if (o.logit_space) c.select.logit_space = true;
  if (o.maskgit_steps) c.maskgit_steps = *o.maskgit_steps;
}

void add_sampler_flags(CLI::App* cmd, SamplerOpts& o) {
  cmd->add_option("--steps", o.steps, "Reverse steps T'");
  cmd->add_option("--corrector-timesteps", o.corrector_timesteps, "Times that trigger the corrector")->delimiter(',');
  cmd->add_option("--threshold", o.threshold, "Re-mask threshold");
  cmd->add_option("--tau", o.tau, "Gumbel noise scale");
  cmd->add_option("--select-mode", o.select_mode, "threshold or lowest-k");
  cmd->add_flag("--logit-space", o.logit_space, "Add the noise to logits");
  cmd->add_option("--maskgit-steps", o.maskgit_steps, "MaskGIT decoding steps");
}

struct SampleOpts {
  SamplerOpts sampler;
  std::string denoiser;
  std::string corrector;
  std::optional<int> n;
  bool maskgit = false;
  std::string condition;
  std::string reference;
  bool trace = false;
  std::string name = "samples.jsonl";
};

int run_sample(const Global& g, const SampleOpts& o) {
  Context ctx = make_context(g);
  apply(ctx.rc.sampler, o.sampler);
  if (o.trace) ctx.rc.sampler.record_trace = true;
  ctx.rc.validate();
  ctx.hash = ctx.rc.hash();
  const SamplerConfig& sc = ctx.rc.sampler;
  const Denoiser denoiser = open_denoiser(ctx, or_default(o.denoiser, ctx, "denoiser.ckpt"));
  std::optional<Corrector> corrector;
  if (!o.corrector.empty()) corrector.emplace(open_corrector(ctx, o.corrector));
  const DiffusionSchedule s = ctx.rc.make_schedule();
  const int n = o.n.value_or(ctx.rc.eval.num_samples);
  if (n < 1) throw Error(Errc::kConfig, "--n must be positive");

  std::vector<Condition> conditions;
  if (!o.condition.empty()) {
    const ConditionTask task = parse_condition_task(o.condition);
    if (o.reference.empty()) throw Error(Errc::kConfig, "--condition needs --reference");
    const Dataset ref = load_data(ctx, o.reference);
    if (ref.layouts.empty()) throw Error(Errc::kInvalidArgument, "reference set is empty");
    for (int i = 0; i < n; ++i) {
      const Layout& l = ref.layouts[static_cast<std::size_t>(i) % ref.layouts.size()];
      conditions.push_back(make_condition(tokenize(l, ctx.vocab(), ctx.n_max()), task, ctx.vocab()));
    }
  }
  const Corrector* cp = corrector ? &*corrector : nullptr;
  const auto results = o.maskgit ? maskgit_batch(denoiser, cp, s, sc, n, conditions)
                                 : generate_batch(denoiser, cp, s, sc, n, conditions);
  long ops = 0;
  int dropped = 0;
  for (const auto& r : results) {
    ops += r.trace.forward_ops();
    dropped += r.dropped;
  }
  nlohmann::json meta = ctx.provenance(sc.seed);
  meta["sampler"] = sc.to_json();
  meta["decoder"] = o.maskgit ? "maskgit" : "diffusion";
  meta["corrector"] = cp != nullptr;
  if (!o.condition.empty()) meta["condition"] = o.condition;
  meta["forward_ops_per_sample"] = static_cast<double>(ops) / n;
  meta["dropped_elements"] = dropped;
  save_dataset(ctx, o.name, layouts_of(results), meta);
  if (o.trace) {
    const fs::path dir = ctx.out / "traces";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < results.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "trace_%05zu.jsonl", i);
      nlohmann::ordered_json head{{"meta", ctx.provenance(sc.seed)}};
      head["meta"]["sample"] = i;
      head["meta"]["forward_ops"] = results[i].trace.forward_ops();
      write_file((dir / name).string(), head.dump() + "\n" + trace_to_jsonl(results[i].trace));
    }
  }
  note("wrote " + std::to_string(n) + " layouts to " + ctx.path(o.name));
  return 0;
}

// ---- eval ----

struct EvalOpts {
  std::string generated;
  std::string real;
  bool features = false;
  std::string name = "report.json";
};

int run_eval(const Global& g, const EvalOpts& o) {
  Context ctx = make_context(g);
  const Dataset gen = load_data(ctx, or_default(o.generated, ctx, "samples.jsonl"));
  const Dataset real = load_data(ctx, or_default(o.real, ctx, "test.jsonl"));
  ReportOptions opt;
  opt.k = ctx.rc.eval.k;
  opt.with_max_iou = ctx.rc.eval.with_max_iou;
  MetricReport rep = evaluate_layouts(gen.layouts, real.layouts, ctx.vocab(), ctx.n_max(), opt);
  rep.config_hash = ctx.hash;
  nlohmann::ordered_json out = ctx.provenance(ctx.rc.sampler.seed);
  out["features"] = GeoFeatures::kName;
  out["report"] = rep.to_json();
  write_file(ctx.path(o.name), out.dump(2) + "\n");
  if (o.features) {
    const GeoFeatures f(ctx.vocab(), ctx.n_max());
    const std::string prov = ctx.provenance_line(ctx.rc.sampler.seed);
    write_file(ctx.path("features_generated.csv"), features_to_csv(f.batch(gen.layouts), prov));
    write_file(ctx.path("features_real.csv"), features_to_csv(f.batch(real.layouts), prov));
  }
  std::cout << rep.to_json().dump(2) << "\n";
  return 0;
}

// ---- experiments ----

struct ExperimentOpts {
  SamplerOpts sampler;
  std::string denoiser;
  std::string corrector;
  std::string data;
  std::string real;
  int trials = 500;
  int t_start = 10;
  int t_eval = 10;
  int n_replace = 3;
  int samples_per_t = 200;
  std::optional<int> n;
  std::vector<int> t_values;
  std::vector<int> caps = {0, 1, 2, 4, 8, 16};
  std::vector<int> steps_list = {20, 30, 50, 75, 100};
};

int write_table(const Context& ctx, const std::string& name, const Table& tb, std::uint64_t seed) {
  const std::string csv = tb.to_csv(ctx.provenance_line(seed));
  write_file(ctx.path(name), csv);
  std::cout << csv;
  return 0;
}

std::vector<TokenSeq> experiment_corpus(const Context& ctx, const ExperimentOpts& o) {
  const Dataset ds = load_data(ctx, or_default(o.data, ctx, "test.jsonl"));
  return tokenize_all(ds.layouts, ctx.vocab(), ctx.n_max());
}

int run_experiment(const Global& g, const std::string& which, const ExperimentOpts& o) {
  Context ctx = make_context(g);
  apply(ctx.rc.sampler, o.sampler);
  ctx.rc.validate();
  ctx.hash = ctx.rc.hash();
  const std::uint64_t seed = ctx.rc.sampler.seed;
  Rng rng(seed);
  const DiffusionSchedule s = ctx.rc.make_schedule();
  const auto denoiser_path = or_default(o.denoiser, ctx, "denoiser.ckpt");
  const auto corrector_path = or_default(o.corrector, ctx, "corrector.ckpt");

  if (which == "tsr") {
    const Denoiser d = open_denoiser(ctx, denoiser_path);
    std::vector<int> ts = o.t_values;
    if (ts.empty()) {
      for (int t = 0; t <= s.T(); t += std::max(1, s.T() / 20)) ts.push_back(t);
    }
    const auto pts = tsr_curve(d, experiment_corpus(ctx, o), s, ts, o.samples_per_t, rng);
    return write_table(ctx, "tsr.csv", tsr_table(pts, s.profile().name()), seed);
  }
  if (which == "recover") {
    const Denoiser d = open_denoiser(ctx, denoiser_path);
    const auto corpus = experiment_corpus(ctx, o);
    Table tb{"recover-v1", {"mode", "t_start", "n_replace", "trials", "successes", "rate"}, {}};
    for (ReplaceMode m : {ReplaceMode::kMask, ReplaceMode::kToken}) {
      const RecoveryResult r = token_correction_success(d, corpus, s, m, o.t_start, o.n_replace, o.trials, rng);
      tb.add({replace_mode_name(m), std::to_string(o.t_start), std::to_string(o.n_replace), std::to_string(r.trials),
              std::to_string(r.successes), fmt(r.rate())});
    }
    return write_table(ctx, "recover.csv", tb, seed);
  }
  if (which == "detect") {
    const Corrector c = open_corrector(ctx, corrector_path);
    const DetectionResult r = detection_accuracy(c, experiment_corpus(ctx, o), o.n_replace, o.t_eval, o.trials, rng);
    Table tb{"detect-v1", {"objective", "n_replace", "t_eval", "trials", "accuracy", "chance"}, {}};
    tb.add({objective_name(c.config().objective), std::to_string(o.n_replace), std::to_string(o.t_eval),
            std::to_string(r.trials), fmt(r.accuracy), fmt(r.chance)});
    return write_table(ctx, "detect.csv", tb, seed);
  }
  if (which == "score-vs-corruption") {
    const Corrector c = open_corrector(ctx, corrector_path);
    const auto pts = score_vs_corruption(c, experiment_corpus(ctx, o), o.caps, o.t_eval, o.trials, rng);
    return write_table(ctx, "score_vs_corruption.csv", corruption_table(pts), seed);
  }
  if (which == "schedule-sweep" || which == "speed-quality") {
    const Denoiser d = open_denoiser(ctx, denoiser_path);
    const Corrector c = open_corrector(ctx, corrector_path);
    const Dataset real = load_data(ctx, or_default(o.real, ctx, "test.jsonl"));
    const int n = o.n.value_or(ctx.rc.eval.num_samples);
    if (which == "schedule-sweep") {
      const auto rows = sweep_schedules(d, c, s, nested_schedules(), ctx.rc.sampler, n, real.layouts);
      return write_table(ctx, "schedule_sweep.csv", quality_table(rows, "schedule-sweep-v1"), seed);
    }
    const auto rows = speed_quality(d, c, s, o.steps_list, ctx.rc.sampler, n, real.layouts);
    return write_table(ctx, "speed_quality.csv", speed_quality_table(rows), seed);
  }
  throw Error(Errc::kConfig, "unknown experiment '" + which + "'");
}

// ---- render ----

struct RenderOpts {
  std::string input;
  std::string svg;
};

int run_render(const Global& g, const RenderOpts& o) {
  Context ctx = make_context(g);
  const Dataset ds = load_data(ctx, o.input);
  std::string prov = std::string("version=") + kVersion;
  if (ds.meta.is_object()) {
    if (ds.meta.contains("config_hash")) prov += " config_hash=" + ds.meta["config_hash"].get<std::string>();
    if (ds.meta.contains("seed")) prov += " seed=" + ds.meta["seed"].dump();
  }
  const std::string dir = o.svg.empty() ? ctx.path("svg") : o.svg;
  const auto paths = render_layouts(ds.layouts, ctx.vocab(), dir, "layout", prov);
  note("wrote " + std::to_string(paths.size()) + " SVG files to " + dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-diffusion layout generation with a learned corrector"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for data, training and sampling");
  app.add_option("--out", g.out, "Output directory (default $LAYOUTCORR_OUT or ./runs)");
  app.add_option("--threads", g.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and its splits");
  synth->add_option("--count", so.count, "Number of layouts");
  synth->add_option("--grammar", so.grammar, "doc-like or ui-like");
  synth->add_option("--jitter", so.jitter, "Position jitter in bins");

  TrainOpts to;
  auto* train_ddm = app.add_subcommand("train-ddm", "Train the denoiser");
  train_ddm->add_option("--data", to.data, "Training JSONL (default <out>/train.jsonl)");
  train_ddm->add_option("--steps", to.steps, "Optimizer steps");
  train_ddm->add_option("--log-every", to.log_every, "Progress interval");
  auto* train_corr = app.add_subcommand("train-corrector", "Train the corrector against a denoiser");
  train_corr->add_option("--data", to.data, "Training JSONL (default <out>/train.jsonl)");
  train_corr->add_option("--denoiser", to.denoiser, "Denoiser checkpoint (default <out>/denoiser.ckpt)");
  train_corr->add_option("--steps", to.steps, "Optimizer steps");
  train_corr->add_option("--objective", to.objective, "correctness or mask-estimation");
  train_corr->add_option("--log-every", to.log_every, "Progress interval");

  SampleOpts sa;
  auto* sample = app.add_subcommand("sample", "Generate layouts");
  sample->add_option("--denoiser", sa.denoiser, "Denoiser checkpoint (default <out>/denoiser.ckpt)");
  sample->add_option("--corrector", sa.corrector, "Corrector checkpoint; omit for plain sampling");
  sample->add_option("--n", sa.n, "Number of layouts");
  sample->add_flag("--maskgit", sa.maskgit, "Confidence-based parallel decoding");
  sample->add_option("--condition", sa.condition, "c2sp or cs2p");
  sample->add_option("--reference", sa.reference, "Layouts supplying the conditions");
  sample->add_flag("--trace", sa.trace, "Write per-sample step traces");
  sample->add_option("--name", sa.name, "Output file name inside --out");
  add_sampler_flags(sample, sa.sampler);

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Score generated layouts against real ones");
  eval->add_option("--generated", eo.generated, "Generated JSONL (default <out>/samples.jsonl)");
  eval->add_option("--real", eo.real, "Reference JSONL (default <out>/test.jsonl)");
  eval->add_flag("--features", eo.features, "Also export feature CSVs");
  eval->add_option("--name", eo.name, "Report file name inside --out");

  ExperimentOpts xo;
  auto* experiment = app.add_subcommand("experiment", "Diagnostic experiments");
  experiment->require_subcommand(1);
  const auto common = [&](CLI::App* c) {
    c->add_option("--denoiser", xo.denoiser, "Denoiser checkpoint (default <out>/denoiser.ckpt)");
    c->add_option("--corrector", xo.corrector, "Corrector checkpoint (default <out>/corrector.ckpt)");
    c->add_option("--data", xo.data, "Clean layouts (default <out>/test.jsonl)");
    c->add_option("--trials", xo.trials, "Trials");
    c->add_option("--n-replace", xo.n_replace, "Tokens replaced per trial");
    return c;
  };
  auto* x_tsr = common(experiment->add_subcommand("tsr", "Token-sticking rate over t"));
  x_tsr->add_option("--t-values", xo.t_values, "Start times")->delimiter(',');
  x_tsr->add_option("--samples-per-t", xo.samples_per_t, "Layouts per start time");
  auto* x_rec = common(experiment->add_subcommand("recover", "Mask- vs token-replace recovery"));
  x_rec->add_option("--t-start", xo.t_start, "Reverse start time");
  auto* x_det = common(experiment->add_subcommand("detect", "Corrector detection of replaced tokens"));
  x_det->add_option("--t-eval", xo.t_eval, "Time passed to the corrector");
  auto* x_svc = common(experiment->add_subcommand("score-vs-corruption", "Scores against replacement distance"));
  x_svc->add_option("--caps", xo.caps, "Maximum transition steps")->delimiter(',');
  x_svc->add_option("--t-eval", xo.t_eval, "Time passed to the corrector");
  auto* x_sweep = common(experiment->add_subcommand("schedule-sweep", "Nested corrector schedules"));
  auto* x_speed = common(experiment->add_subcommand("speed-quality", "Quality against reverse steps"));
  x_speed->add_option("--steps", xo.steps_list, "Values of T'")->delimiter(',');
  for (auto* c : {x_sweep, x_speed}) {
    c->add_option("--real", xo.real, "Reference JSONL (default <out>/test.jsonl)");
    c->add_option("--n", xo.n, "Samples per row");
  }
  for (auto* c : {x_tsr, x_rec, x_det, x_svc, x_sweep}) add_sampler_flags(c, xo.sampler);
  {
    // speed-quality owns --steps as a list, so it only takes the remaining sampler flags.
    x_speed->add_option("--corrector-timesteps", xo.sampler.corrector_timesteps, "Times that trigger the corrector")
        ->delimiter(',');
    x_speed->add_option("--threshold", xo.sampler.threshold, "Re-mask threshold");
    x_speed->add_option("--tau", xo.sampler.tau, "Gumbel noise scale");
  }

  RenderOpts ro;
  auto* render = app.add_subcommand("render", "Render layouts to SVG");
  render->add_option("input", ro.input, "Layouts JSONL")->required();
  render->add_option("--svg", ro.svg, "Output directory (default <out>/svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return run_synth(g, so);
    if (*train_ddm) return run_train_ddm(g, to);
    if (*train_corr) return run_train_corrector(g, to);
    if (*sample) return run_sample(g, sa);
    if (*eval) return run_eval(g, eo);
    if (*render) return run_render(g, ro);
    if (*experiment) {
      for (auto* c : experiment->get_subcommands()) return run_experiment(g, c->get_name(), xo);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
