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

#ifndef SYNCWATCH_IO_HPP_
#define SYNCWATCH_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "syncwatch/ar_model.hpp"
#include "syncwatch/scoring.hpp"
#include "syncwatch/sync_features.hpp"
#include "syncwatch/training.hpp"

namespace syncwatch {

// ---------------------------------------------------------------------------
// Feature files: a small text container.
//
//   # avsf v1
//   # kind=<affinity|distribution|discrete|activation|raster>
//   # tau=<int>
//   # fps=<int>
//   # dim=<int>
//   v,v,v,...        (T rows of dim comma-separated values)
//
// Reals are printed with 9 significant digits. Activation files may carry an
// extra "# source=<audio_visual|visual_only>" line.
// ---------------------------------------------------------------------------

enum class FileKind { kAffinity, kDistribution, kDiscrete, kActivation, kRaster };

std::string_view to_string(FileKind kind);
FileKind file_kind_from_string(std::string_view name);

struct FeatureFile {
  FileKind kind = FileKind::kAffinity;
  DelayWindowConfig window;
  RowMatrix data;
  ActivationSource source = ActivationSource::kAudioVisual;
};

// Distribution rows off by less than 1e-6 are renormalised; larger
// deviations are rejected.
FeatureFile parse_feature_file(std::istream& in, const std::string& name = "<stream>");
FeatureFile read_feature_file(const std::filesystem::path& path);
std::string format_feature_file(const FeatureFile& file);
void write_feature_file(const std::filesystem::path& path, const FeatureFile& file);

FeatureFile make_feature_file(const AffinitySequence& aff);
FeatureFile make_feature_file(const DelayDistributionSequence& dist);
FeatureFile make_feature_file(const DiscreteDelaySequence& delays);
FeatureFile make_feature_file(const ActivationSequence& acts, const DelayWindowConfig& window);
FeatureFile make_raster_file(const FeatureSequence& codes);

// Conversions from whatever a file holds to the requested representation.
DelayDistributionSequence distribution_of(const FeatureFile& file);
DiscreteDelaySequence discrete_delays_of(const FeatureFile& file);
ActivationSequence activations_of(const FeatureFile& file);

// ---------------------------------------------------------------------------
// Dataset manifests: a JSON array of records. Paths are relative to the
// manifest's directory.
// ---------------------------------------------------------------------------

struct ManifestRecord {
  std::string path;
  int label = 0;  // 0 = real, 1 = fake
  std::optional<std::string> category;
  std::optional<FrameInterval> interval;
  std::optional<std::string> activations;  // companion activation file
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& relative) const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ManifestRecord>& records);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line followed by a little-endian float32
// payload holding every tensor in index order.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCheckpointFormat = "syncwatch-ckpt-1";

struct Checkpoint {
  ArParams params;
  TrainConfig train_cfg;
  FeatureKind feature_kind = FeatureKind::kDistribution;
  DelayWindowConfig window;
  int window_frames = kDefaultWindow;  // scoring window N
  int window_stride = kDefaultStride;
  std::optional<PcaModel> pca;          // activation_pca / concat_av
  std::optional<Codebook> codebook;     // raster_codes
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Feature construction shared by training and scoring: builds the
// checkpoint's feature kind from a primary file and optional activations.
FeatureSequence build_features(const Checkpoint& ckpt, const FeatureFile& primary,
                               const std::optional<FeatureFile>& activations);

// step,lr,loss
void write_loss_trace(const std::filesystem::path& path, const std::vector<double>& lr,
                      const std::vector<double>& loss);

// frame,score,cumulative
void write_frame_csv(const std::filesystem::path& path, const ScoreReport& report);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& contents);

}  // namespace syncwatch

#endif  // SYNCWATCH_IO_HPP_
