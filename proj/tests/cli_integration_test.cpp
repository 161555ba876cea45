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

// End-to-end runs of the command-line surface against temporary directories.
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "syncwatch/cli.hpp"
#include "syncwatch/eval_metrics.hpp"
#include "syncwatch/io.hpp"
#include "syncwatch/synthdata.hpp"

namespace syncwatch {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("syncwatch_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) { return read_text(p); }

std::vector<std::string> tree(const fs::path& dir) {
  std::vector<std::string> listing;
  for (const auto& e : fs::directory_iterator(dir)) {
    listing.push_back(e.path().filename().string() + "\n" + slurp(e.path()));
  }
  std::sort(listing.begin(), listing.end());
  return listing;
}

const std::vector<std::string> kSmallModel{"--blocks", "1", "--heads", "2", "--d-model", "16",
                                           "--batch-size", "4"};

Run train(const std::string& manifest, const std::string& out, const std::string& features,
          const std::string& loss, int steps = 4, const std::string& seed = "1") {
  std::vector<std::string> args{"train", "--manifest", manifest, "--feature-set", features,
                                "--loss", loss, "--steps", std::to_string(steps), "--seed",
                                seed, "--out", out, "--ignore-fakes"};
  args.insert(args.end(), kSmallModel.begin(), kSmallModel.end());
  return cli(args);
}

TEST_CASE("gen writes feature files and a manifest") {
  TempDir dir;
  const Run r = cli({"gen", "--out", dir / "d", "--num-real", "2", "--num-fake", "2", "--mode",
                     "drift", "--seed", "3"});
  REQUIRE(r.code == kExitOk);
  const DatasetManifest m = read_manifest(dir / "d/manifest.json");
  CHECK(m.records.size() == 4);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "d")) files += e.path().extension() == ".avsf";
  CHECK(files == 4);
  CHECK(m.records[2].category == std::optional<std::string>("drift"));
  CHECK(!m.records[0].category.has_value());
}

TEST_CASE("gen is deterministic") {
  TempDir dir;
  const std::vector<std::string> flags{"--num-real", "3", "--num-fake", "3", "--mode", "flat",
                                       "--seed", "9", "--activations"};
  auto a = std::vector<std::string>{"gen", "--out", dir / "a"};
  auto b = std::vector<std::string>{"gen", "--out", dir / "b"};
  a.insert(a.end(), flags.begin(), flags.end());
  b.insert(b.end(), flags.begin(), flags.end());
  REQUIRE(cli(a).code == kExitOk);
  REQUIRE(cli(b).code == kExitOk);
  CHECK(tree(dir.path / "a") == tree(dir.path / "b"));
}

TEST_CASE("interval mode annotates every fake") {
  TempDir dir;
  REQUIRE(cli({"gen", "--out", dir / "d", "--num-real", "1", "--num-fake", "5", "--mode",
               "interval", "--seed", "4", "--frames", "60"})
              .code == kExitOk);
  for (const auto& rec : read_manifest(dir / "d/manifest.json").records) {
    CHECK(rec.interval.has_value() == (rec.label == 1));
    if (rec.interval) CHECK(rec.interval->second - rec.interval->first == 9);
  }
}

TEST_CASE("usage and data errors map to exit codes") {
  TempDir dir;
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"gen", "--out", dir / "d"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"gen", "--out", dir / "d", "--num-real", "1", "--num-fake", "0", "--mode", "swap",
             "--seed", "1"})
            .code != kExitOk);
  CHECK(cli({"gen", "--out", "/proc/syncwatch/forbidden", "--num-real", "1", "--num-fake", "0",
             "--mode", "drift", "--seed", "1"})
            .code == kExitData);
}

TEST_CASE("train uses real records only") {
  TempDir dir;
  REQUIRE(cli({"gen", "--out", dir / "fakes", "--num-real", "0", "--num-fake", "2", "--mode",
               "drift", "--seed", "1"})
              .code == kExitOk);
  const Run none = train(dir / "fakes/manifest.json", dir / "m.ckpt", "distribution", "soft_ce");
  CHECK(none.code == kExitData);
  CHECK(none.err.find("no real training data") != std::string::npos);

  REQUIRE(cli({"gen", "--out", dir / "d", "--num-real", "3", "--num-fake", "1", "--mode",
               "drift", "--seed", "2"})
              .code == kExitOk);
  const Run bad = train(dir / "d/manifest.json", dir / "m.ckpt", "activation_pca", "soft_ce");
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("soft_ce") != std::string::npos);

  const Run ok = train(dir / "d/manifest.json", dir / "m.ckpt", "distribution", "soft_ce");
  REQUIRE(ok.code == kExitOk);
  const std::string bytes = slurp(dir / "m.ckpt");
  const json header = json::parse(bytes.substr(0, bytes.find('\n')));
  CHECK(header["model_cfg"]["head"] == "softmax");
  CHECK(header["model_cfg"]["d_in"] == 31);
  CHECK(header["model_cfg"]["d_out"] == 31);
  CHECK(header["feature_kind"] == "distribution");
  const std::string trace = slurp(dir / "m.ckpt.trace.csv");
  CHECK(trace.rfind("step,lr,loss\n", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 5);

  REQUIRE(train(dir / "d/manifest.json", dir / "again.ckpt", "distribution", "soft_ce").code ==
          kExitOk);
  CHECK(slurp(dir / "again.ckpt") == bytes);
  REQUIRE(train(dir / "d/manifest.json", dir / "other.ckpt", "distribution", "soft_ce", 4, "2")
              .code == kExitOk);
  CHECK(slurp(dir / "other.ckpt") != bytes);
}

TEST_CASE("every feature set trains and scores through the CLI") {
  TempDir dir;
  REQUIRE(cli({"gen", "--out", dir / "d", "--num-real", "3", "--num-fake", "2", "--mode",
               "drift", "--seed", "5", "--activations", "--frames", "60"})
              .code == kExitOk);
  const std::vector<std::pair<std::string, std::string>> combos{
      {"discrete_delay", "ce_discrete"}, {"distribution", "soft_ce"}, {"distribution", "bce"},
      {"activation_pca", "mse"},         {"concat_av", "mse"},        {"raster_codes", "raster_ce"}};
  for (const auto& [features, loss] : combos) {
    CAPTURE(features);
    const std::string ckpt = dir / (features + "_" + loss + ".ckpt");
    std::vector<std::string> args{"train", "--manifest", dir / "d/manifest.json",
                                  "--feature-set", features, "--loss", loss, "--steps", "3",
                                  "--seed", "1", "--out", ckpt, "--ignore-fakes"};
    args.insert(args.end(), kSmallModel.begin(), kSmallModel.end());
    if (features == "raster_codes") {
      args.insert(args.end(), {"--window", "4", "--stride", "4"});
    }
    const Run t = cli(args);
    REQUIRE_MESSAGE(t.code == kExitOk, t.err);
    const Run e = cli({"eval", "--model", ckpt, "--manifest", dir / "d/manifest.json", "--out",
                       dir / (features + "_metrics.json")});
    REQUIRE_MESSAGE(e.code == kExitOk, e.err);
    const json metrics = json::parse(slurp(dir / (features + "_metrics.json")));
    CHECK(metrics["n_real"] == 3);
    CHECK(metrics["n_fake"] == 2);
  }
}

TEST_CASE("score output, determinism and kind mismatch") {
  TempDir dir;
  REQUIRE(cli({"gen", "--out", dir / "d", "--num-real", "2", "--num-fake", "1", "--mode",
               "interval", "--seed", "6", "--activations"})
              .code == kExitOk);
  REQUIRE(train(dir / "d/manifest.json", dir / "m.ckpt", "distribution", "soft_ce").code ==
          kExitOk);
  const Run a = cli({"score", "--model", dir / "m.ckpt", "--input", dir / "d/fake_0000.avsf",
                     "--per-frame", dir / "frames.csv"});
  const Run b = cli({"score", "--model", dir / "m.ckpt", "--input", dir / "d/fake_0000.avsf"});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  const json j = json::parse(a.out);
  CHECK(j["n_windows"] == 4);
  CHECK(j["path"] == dir / "d/fake_0000.avsf");
  const std::string csv = slurp(dir / "frames.csv");
  CHECK(csv.rfind("frame,score,cumulative\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 121);

  const Run mismatch =
      cli({"score", "--model", dir / "m.ckpt", "--input", dir / "d/fake_0000.act.avsf"});
  CHECK(mismatch.code == kExitData);
  CHECK(mismatch.err.find("distribution") != std::string::npos);
  CHECK(mismatch.err.find("activation") != std::string::npos);
}

TEST_CASE("eval agrees with per-file scores and reports localization") {
  TempDir dir;
  REQUIRE(cli({"gen", "--out", dir / "d", "--num-real", "4", "--num-fake", "4", "--mode",
               "interval", "--seed", "8"})
              .code == kExitOk);
  REQUIRE(train(dir / "d/manifest.json", dir / "m.ckpt", "distribution", "soft_ce").code ==
          kExitOk);
  const Run e = cli({"eval", "--model", dir / "m.ckpt", "--manifest", dir / "d/manifest.json",
                     "--out", dir / "metrics.json", "--localize", "5"});
  REQUIRE(e.code == kExitOk);
  const json metrics = json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics.contains("localization_top5"));
  CHECK(metrics["per_category"].contains("interval"));

  std::vector<LabeledScore> items;
  for (const auto& rec : read_manifest(dir / "d/manifest.json").records) {
    const Run s = cli({"score", "--model", dir / "m.ckpt", "--input", dir / ("d/" + rec.path)});
    items.push_back({json::parse(s.out)["video_score"].get<double>(), rec.label});
  }
  CHECK(metrics["ap"].get<double>() == average_precision(items));
  CHECK(metrics["auc"].get<double>() == roc_auc(items));
}

void write_discrete(const fs::path& dir, const std::string& name, const std::vector<int>& d) {
  write_feature_file(dir / name, make_feature_file(DiscreteDelaySequence(d, DelayWindowConfig{})));
}

TEST_CASE("baseline-nb separates obvious fakes and is deterministic") {
  TempDir dir;
  std::vector<ManifestRecord> recs;
  for (int i = 0; i < 3; ++i) {
    write_discrete(dir.path, "r" + std::to_string(i), std::vector<int>(20, i - 1));
    recs.push_back({"r" + std::to_string(i), 0, std::nullopt, std::nullopt, std::nullopt});
    write_discrete(dir.path, "f" + std::to_string(i), std::vector<int>(20, 12 + i));
    recs.push_back({"f" + std::to_string(i), 1, "far", std::nullopt, std::nullopt});
  }
  write_manifest(dir.path / "m.json", recs);
  const Run a = cli({"baseline-nb", "--manifest", dir / "m.json", "--out", dir / "a.json"});
  const Run b = cli({"baseline-nb", "--manifest", dir / "m.json", "--out", dir / "b.json"});
  REQUIRE(a.code == kExitOk);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  const json metrics = json::parse(slurp(dir / "a.json"));
  CHECK(metrics["ap"] == 1.0);
  CHECK(metrics["auc"] == 1.0);
  for (const char* key : {"ap", "auc", "n_real", "n_fake", "per_category"}) {
    CHECK(metrics.contains(key));
  }

  std::vector<ManifestRecord> fakes_only(recs.begin() + 1, recs.begin() + 2);
  write_manifest(dir.path / "f.json", fakes_only);
  CHECK(cli({"baseline-nb", "--manifest", dir / "f.json", "--out", dir / "c.json"}).code ==
        kExitData);
}

TEST_CASE("baseline-nb cannot see flat fakes with matched delay histograms") {
  TempDir dir;
  const GenConfig cfg;
  std::vector<ManifestRecord> recs;
  for (int i = 0; i < 20; ++i) {
    const std::string real = "real_" + std::to_string(i) + ".avsf";
    const std::string fake = "fake_" + std::to_string(i) + ".avsf";
    write_feature_file(dir.path / real, make_feature_file(gen_real(cfg, 100 + i)));
    write_feature_file(dir.path / fake,
                       make_feature_file(gen_fake(cfg, 100 + i, FakeMode::kFlat).affinities));
    recs.push_back({real, 0, std::nullopt, std::nullopt, std::nullopt});
    recs.push_back({fake, 1, "flat", std::nullopt, std::nullopt});
  }
  write_manifest(dir.path / "m.json", recs);
  REQUIRE(cli({"baseline-nb", "--manifest", dir / "m.json", "--out", dir / "nb.json"}).code ==
          kExitOk);
  CHECK(json::parse(slurp(dir / "nb.json"))["auc"] == 0.5);
}

}  // namespace
}  // namespace syncwatch
