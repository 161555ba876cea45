/*
 * Copyright 2026 The Syncwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "syncwatch/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "syncwatch/eval_metrics.hpp"
#include "syncwatch/io.hpp"
#include "syncwatch/scoring.hpp"
#include "syncwatch/synthdata.hpp"
#include "syncwatch/training.hpp"

namespace syncwatch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t video_seed(std::uint64_t seed, int label, int index) {
  return derive_seed(seed, (static_cast<std::uint64_t>(label) << 32) |
                               static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
  std::string out;
  int num_real = 0;
  int num_fake = 0;
  std::string mode = "drift";
  std::uint64_t seed = 0;
  int frames = 120;
  bool activations = false;
};

int run_gen(const GenOptions& opt, std::ostream& out) {
  GenConfig cfg;
  cfg.frames = opt.frames;
  const FakeMode mode = fake_mode_from_string(opt.mode);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (opt.num_real < 0 || opt.num_fake < 0) throw UsageError("video counts must be >= 0");

  const fs::path dir(opt.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory " + dir.string() +
                    (ec ? ": " + ec.message() : ""));
  }

  std::vector<ManifestRecord> records;
  char name[64];
  const auto emit = [&](int label, int index, const AffinitySequence& aff,
                        std::optional<FrameInterval> interval) {
    const char* prefix = label == 0 ? "real" : "fake";
    std::snprintf(name, sizeof(name), "%s_%04d.avsf", prefix, index);
    ManifestRecord rec;
    rec.path = name;
    rec.label = label;
    if (label == 1) rec.category = std::string(to_string(mode));
    rec.interval = interval;
    write_feature_file(dir / rec.path, make_feature_file(aff));
    if (opt.activations) {
      std::snprintf(name, sizeof(name), "%s_%04d.act.avsf", prefix, index);
      rec.activations = name;
      const auto acts = activations_from_distribution(cfg, video_seed(opt.seed, label, index),
                                                      normalize_affinities(aff));
      write_feature_file(dir / *rec.activations, make_feature_file(acts, cfg.window));
    }
    records.push_back(std::move(rec));
  };

  for (int i = 0; i < opt.num_real; ++i) {
    emit(0, i, gen_real(cfg, video_seed(opt.seed, 0, i)), std::nullopt);
  }
  for (int i = 0; i < opt.num_fake; ++i) {
    auto sample = gen_fake(cfg, video_seed(opt.seed, 1, i), mode);
    emit(1, i, sample.affinities, sample.interval);
  }
  write_manifest(dir / "manifest.json", records);
  out << json{{"manifest", (dir / "manifest.json").string()}, {"records", records.size()}}.dump()
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// shared feature loading
// ---------------------------------------------------------------------------

struct LoadedRecord {
  FeatureFile primary;
  std::optional<FeatureFile> activations;
};

LoadedRecord load_record(const DatasetManifest& manifest, const ManifestRecord& rec) {
  LoadedRecord loaded{read_feature_file(manifest.resolve(rec.path)), std::nullopt};
  if (rec.activations) loaded.activations = read_feature_file(manifest.resolve(*rec.activations));
  return loaded;
}

FeatureSequence features_for(const Checkpoint& ckpt, const LoadedRecord& rec,
                             const std::string& name) {
  try {
    return build_features(ckpt, rec.primary, rec.activations);
  } catch (const DataError& e) {
    throw DataError("checkpoint feature set '" + std::string(to_string(ckpt.feature_kind)) +
                    "' does not match input '" + name + "' of kind '" +
                    std::string(to_string(rec.primary.kind)) + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string manifest;
  std::string feature_set;
  std::string loss;
  int steps = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool ignore_fakes = false;
  std::optional<int> warmup;
  int batch_size = 16;
  double lr = 1e-3;
  int window = kDefaultWindow;
  int stride = kDefaultStride;
  int pca_dim = 31;
  int raster_k = 8;
  int n_blocks = 2;
  int n_heads = 16;
  int d_model = 256;
  std::string trace;
};

int run_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  FeatureKind kind;
  LossKind loss;
  try {
    kind = feature_kind_from_string(opt.feature_set);
    loss = loss_kind_from_string(opt.loss);
    require_pairing(loss, kind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (opt.steps < 0) throw UsageError("--steps must be >= 0");
  if (opt.steps == 1 && !opt.warmup) throw UsageError("--steps 1 leaves no room for warm-up");

  const DatasetManifest manifest = read_manifest(opt.manifest);
  std::vector<const ManifestRecord*> reals;
  for (const auto& rec : manifest.records) {
    if (rec.label == 0) reals.push_back(&rec);
  }
  if (reals.empty()) throw DataError("no real training data in " + opt.manifest);
  const std::size_t skipped = manifest.records.size() - reals.size();
  if (skipped > 0 && !opt.ignore_fakes) {
    err << "note: skipping " << skipped << " fake record(s); training uses real videos only\n";
  }

  std::vector<LoadedRecord> loaded;
  loaded.reserve(reals.size());
  for (const auto* rec : reals) loaded.push_back(load_record(manifest, *rec));

  Checkpoint ckpt;
  ckpt.feature_kind = kind;
  ckpt.window = loaded.front().primary.window;
  ckpt.window_frames = opt.window;
  ckpt.window_stride = opt.stride;

  if (kind == FeatureKind::kActivationPca || kind == FeatureKind::kConcatAv) {
    std::vector<ActivationSequence> acts;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      const auto& rec = loaded[i];
      if (rec.primary.kind == FileKind::kActivation) {
        acts.push_back(activations_of(rec.primary));
      } else if (rec.activations) {
        acts.push_back(activations_of(*rec.activations));
      } else {
        throw DataError("record " + reals[i]->path + " has no activations");
      }
    }
    PcaModel pca = pca_fit(acts, opt.pca_dim);
    // Round through single precision now so training and scoring agree.
    pca.mean = pca.mean.cast<float>().cast<double>();
    pca.components = pca.components.cast<float>().cast<double>();
    pca.eigenvalues = pca.eigenvalues.cast<float>().cast<double>();
    ckpt.pca = std::move(pca);
  }
  if (kind == FeatureKind::kRasterCodes) {
    std::vector<double> entries;
    for (const auto& rec : loaded) {
      const auto dist = distribution_of(rec.primary);
      entries.insert(entries.end(), dist.rows().data(), dist.rows().data() + dist.rows().size());
    }
    ckpt.codebook = kmeans_fit(entries, opt.raster_k, opt.seed);
  }

  std::vector<FeatureSequence> data;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const FeatureSequence full = features_for(ckpt, loaded[i], reals[i]->path);
    for (int start : window_starts(full.frames(), opt.window, opt.stride)) {
      data.push_back(full.slice(start, std::min(opt.window, full.frames() - start)));
    }
  }

  ArConfig model_cfg =
      model_config_for(loss, kind, data.front().dim(), ckpt.window, opt.raster_k);
  model_cfg.n_max = opt.window;
  model_cfg.n_blocks = opt.n_blocks;
  model_cfg.n_heads = opt.n_heads;
  model_cfg.d_model = opt.d_model;

  TrainConfig train_cfg;
  train_cfg.loss = loss;
  train_cfg.total_steps = opt.steps;
  train_cfg.seed = opt.seed;
  train_cfg.batch_size = opt.batch_size;
  train_cfg.lr_max = opt.lr;
  train_cfg.warmup_steps =
      opt.warmup.value_or(std::clamp(std::min(500, opt.steps / 4), 1, std::max(1, opt.steps - 1)));
  try {
    model_cfg.validate();
    train_cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  TrainResult result = train(model_cfg, train_cfg, data);
  ckpt.params = std::move(result.params);
  ckpt.train_cfg = train_cfg;
  save_checkpoint(opt.out, ckpt);
  const std::string trace = opt.trace.empty() ? opt.out + ".trace.csv" : opt.trace;
  write_loss_trace(trace, result.lr_trace, result.loss_trace);

  json summary = {{"checkpoint", opt.out},
                  {"trace", trace},
                  {"steps", opt.steps},
                  {"train_windows", data.size()}};
  if (!result.loss_trace.empty()) summary["final_loss"] = result.loss_trace.back();
  out << summary.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score / eval / baseline-nb
// ---------------------------------------------------------------------------

struct ScoreOptions {
  std::string model;
  std::string input;
  std::string activations;
  std::string per_frame;
};

ScoreReport score_loaded(const Checkpoint& ckpt, const LoadedRecord& rec, const std::string& name) {
  const FeatureSequence x = features_for(ckpt, rec, name);
  return score_video(ckpt.params, x, ckpt.train_cfg.loss, ckpt.window_frames, ckpt.window_stride);
}

int run_score(const ScoreOptions& opt, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opt.model);
  LoadedRecord rec{read_feature_file(opt.input), std::nullopt};
  if (!opt.activations.empty()) rec.activations = read_feature_file(opt.activations);
  const ScoreReport report = score_loaded(ckpt, rec, opt.input);
  if (!opt.per_frame.empty()) write_frame_csv(opt.per_frame, report);
  out << json{{"path", opt.input},
              {"video_score", report.video_score},
              {"n_windows", report.windows.size()}}
             .dump()
      << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string model;
  std::string manifest;
  std::string train_manifest;  // baseline-nb only
  std::string out;
  std::string scores;
  int localize = 0;
};

struct ScoredRecord {
  const ManifestRecord* record;
  ScoreReport report;
};

json metrics_json(const std::vector<ScoredRecord>& scored, int localize_k) {
  std::vector<LabeledScore> all;
  std::map<std::string, std::vector<LabeledScore>> fakes_by_category;
  std::vector<LabeledScore> reals;
  std::vector<LocalizationCase> cases;
  for (const auto& s : scored) {
    const LabeledScore item{s.report.video_score, s.record->label};
    all.push_back(item);
    if (item.label == 0) {
      reals.push_back(item);
    } else if (s.record->category) {
      fakes_by_category[*s.record->category].push_back(item);
    }
    if (localize_k > 0 && s.record->interval) {
      if (s.record->interval->second > static_cast<int>(s.report.frame_scores.size())) {
        throw DataError("interval of " + s.record->path + " runs past the last frame");
      }
      cases.push_back({s.report.frame_scores, *s.record->interval});
    }
  }
  const auto n_fake = std::count_if(all.begin(), all.end(), [](auto& x) { return x.label == 1; });
  json metrics = {{"ap", average_precision(all)},
                  {"auc", roc_auc(all)},
                  {"n_real", reals.size()},
                  {"n_fake", n_fake}};
  json per_category = json::object();
  for (const auto& [category, fakes] : fakes_by_category) {
    std::vector<LabeledScore> subset = reals;
    subset.insert(subset.end(), fakes.begin(), fakes.end());
    per_category[category] = {{"ap", average_precision(subset)},
                              {"auc", roc_auc(subset)},
                              {"n_fake", fakes.size()}};
  }
  metrics["per_category"] = per_category;
  if (localize_k > 0 && !cases.empty()) {
    metrics["localization_top" + std::to_string(localize_k)] =
        localization_accuracy(cases, localize_k);
    metrics["n_localized"] = cases.size();
  }
  return metrics;
}

void write_scores(const std::string& path, const std::vector<ScoredRecord>& scored) {
  if (path.empty()) return;
  std::string lines;
  for (const auto& s : scored) {
    lines += json{{"path", s.record->path},
                  {"label", s.record->label},
                  {"video_score", s.report.video_score},
                  {"n_windows", s.report.windows.size()}}
                 .dump() +
             "\n";
  }
  write_text(path, lines);
}

int run_eval(const EvalOptions& opt, std::ostream& out) {
  if (opt.localize < 0) throw UsageError("--localize must be >= 0");
  const Checkpoint ckpt = load_checkpoint(opt.model);
  const DatasetManifest manifest = read_manifest(opt.manifest);
  std::vector<ScoredRecord> scored;
  for (const auto& rec : manifest.records) {
    scored.push_back({&rec, score_loaded(ckpt, load_record(manifest, rec), rec.path)});
  }
  const json metrics = metrics_json(scored, opt.localize);
  write_text(opt.out, metrics.dump(2) + "\n");
  write_scores(opt.scores, scored);
  out << metrics.dump() << "\n";
  return kExitOk;
}

int run_baseline_nb(const EvalOptions& opt, std::ostream& out) {
  if (opt.localize < 0) throw UsageError("--localize must be >= 0");
  const DatasetManifest manifest = read_manifest(opt.manifest);
  const DatasetManifest train_manifest =
      opt.train_manifest.empty() ? manifest : read_manifest(opt.train_manifest);
  std::vector<DiscreteDelaySequence> train_delays;
  for (const auto& rec : train_manifest.records) {
    if (rec.label != 0) continue;
    train_delays.push_back(discrete_delays_of(read_feature_file(train_manifest.resolve(rec.path))));
  }
  if (train_delays.empty()) throw DataError("no real training data for the naive Bayes baseline");
  const NaiveBayesModel model = naive_bayes_fit(train_delays);

  std::vector<ScoredRecord> scored;
  for (const auto& rec : manifest.records) {
    const auto delays = discrete_delays_of(read_feature_file(manifest.resolve(rec.path)));
    scored.push_back({&rec, naive_bayes_score(model, delays)});
  }
  const json metrics = metrics_json(scored, opt.localize);
  write_text(opt.out, metrics.dump(2) + "\n");
  write_scores(opt.scores, scored);
  out << metrics.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual synchronization anomaly detector"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic feature corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--num-real", gen.num_real, "Number of real videos")->required();
  gen_cmd->add_option("--num-fake", gen.num_fake, "Number of fake videos")->required();
  gen_cmd->add_option("--mode", gen.mode, "Fake mode: drift, flat or interval")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
  gen_cmd->add_option("--frames", gen.frames, "Frames per video");
  gen_cmd->add_flag("--activations", gen.activations, "Also write activation files");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the sequence model on real videos");
  train_cmd->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--feature-set", tr.feature_set,
                        "discrete_delay, distribution, activation_pca, concat_av or raster_codes")
      ->required();
  train_cmd->add_option("--loss", tr.loss, "ce_discrete, soft_ce, bce, mse or raster_ce")
      ->required();
  train_cmd->add_option("--steps", tr.steps, "Optimizer steps")->required();
  train_cmd->add_option("--seed", tr.seed, "Seed")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_flag("--ignore-fakes", tr.ignore_fakes, "Skip fake records silently");
  train_cmd->add_option("--warmup", tr.warmup, "Warm-up steps");
  train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  train_cmd->add_option("--lr", tr.lr, "Peak learning rate");
  train_cmd->add_option("--window", tr.window, "Frames per training/scoring window");
  train_cmd->add_option("--stride", tr.stride, "Window stride");
  train_cmd->add_option("--pca-dim", tr.pca_dim, "Principal components kept");
  train_cmd->add_option("--raster-k", tr.raster_k, "Codebook size for raster_codes");
  train_cmd->add_option("--blocks", tr.n_blocks, "Decoder blocks");
  train_cmd->add_option("--heads", tr.n_heads, "Attention heads");
  train_cmd->add_option("--d-model", tr.d_model, "Model width");
  train_cmd->add_option("--trace", tr.trace, "Loss-trace CSV (default: <out>.trace.csv)");

  ScoreOptions sc;
  auto* score_cmd = app.add_subcommand("score", "Score one feature file");
  score_cmd->add_option("--model", sc.model, "Checkpoint")->required();
  score_cmd->add_option("--input", sc.input, "Feature file")->required();
  score_cmd->add_option("--activations", sc.activations, "Companion activation file");
  score_cmd->add_option("--per-frame", sc.per_frame, "Per-frame CSV output");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a manifest and report AP/AUC");
  eval_cmd->add_option("--model", ev.model, "Checkpoint")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--out", ev.out, "metrics.json path")->required();
  eval_cmd->add_option("--localize", ev.localize, "Top-k temporal localization");
  eval_cmd->add_option("--scores", ev.scores, "Per-video JSON lines output");

  EvalOptions nb;
  auto* nb_cmd = app.add_subcommand("baseline-nb", "Naive Bayes baseline on argmax delays");
  nb_cmd->add_option("--manifest", nb.manifest, "Dataset manifest")->required();
  nb_cmd->add_option("--out", nb.out, "metrics.json path")->required();
  nb_cmd->add_option("--train-manifest", nb.train_manifest,
                     "Manifest whose real records fit the model (default: --manifest)");
  nb_cmd->add_option("--localize", nb.localize, "Top-k temporal localization");
  nb_cmd->add_option("--scores", nb.scores, "Per-video JSON lines output");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, out);
    if (train_cmd->parsed()) return run_train(tr, out, err);
    if (score_cmd->parsed()) return run_score(sc, out);
    if (eval_cmd->parsed()) return run_eval(ev, out);
    if (nb_cmd->parsed()) return run_baseline_nb(nb, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace syncwatch
