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

#ifndef SYNCWATCH_SYNC_FEATURES_HPP_
#define SYNCWATCH_SYNC_FEATURES_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "syncwatch/common.hpp"

namespace syncwatch {

// Raw frame-by-delay affinities. Column j holds the offset j - tau.
class AffinitySequence {
 public:
  AffinitySequence(RowMatrix values, DelayWindowConfig config);

  const RowMatrix& values() const { return values_; }
  const DelayWindowConfig& config() const { return config_; }
  int frames() const { return static_cast<int>(values_.rows()); }

 private:
  RowMatrix values_;
  DelayWindowConfig config_;
};

// Per-frame probability distribution over the 2*tau+1 candidate delays.
// Rows are nonnegative and sum to one within 1e-9.
class DelayDistributionSequence {
 public:
  DelayDistributionSequence(RowMatrix rows, DelayWindowConfig config);

  const RowMatrix& rows() const { return rows_; }
  const DelayWindowConfig& config() const { return config_; }
  int frames() const { return static_cast<int>(rows_.rows()); }

  static constexpr double kRowSumTolerance = 1e-9;

 private:
  RowMatrix rows_;
  DelayWindowConfig config_;
};

class DiscreteDelaySequence {
 public:
  DiscreteDelaySequence(std::vector<int> delays, DelayWindowConfig config);

  const std::vector<int>& delays() const { return delays_; }
  const DelayWindowConfig& config() const { return config_; }
  int frames() const { return static_cast<int>(delays_.size()); }

 private:
  std::vector<int> delays_;
  DelayWindowConfig config_;
};

enum class ActivationSource { kAudioVisual, kVisualOnly };

class ActivationSequence {
 public:
  explicit ActivationSequence(RowMatrix values,
                              ActivationSource source = ActivationSource::kAudioVisual);

  const RowMatrix& values() const { return values_; }
  ActivationSource source() const { return source_; }
  int frames() const { return static_cast<int>(values_.rows()); }
  int dim() const { return static_cast<int>(values_.cols()); }

 private:
  RowMatrix values_;
  ActivationSource source_;
};

struct PcaModel {
  Vector mean;
  RowMatrix components;  // D x d_act, orthonormal rows
  Vector eigenvalues;    // descending, length D

  int output_dim() const { return static_cast<int>(components.rows()); }
  int input_dim() const { return static_cast<int>(mean.size()); }
};

// Sorted scalar quantizer.
struct Codebook {
  std::vector<double> centers;

  int size() const { return static_cast<int>(centers.size()); }
  int nearest(double value) const;
};

enum class FeatureKind {
  kDiscreteDelay,
  kDistribution,
  kActivationPca,
  kConcatAv,
  kRasterCodes,
};

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

// The per-frame matrix handed to the sequence model. Raster code grids keep
// their integer codes in a double matrix.
class FeatureSequence {
 public:
  FeatureSequence(FeatureKind kind, RowMatrix data, DelayWindowConfig config);

  FeatureKind kind() const { return kind_; }
  const RowMatrix& data() const { return data_; }
  const DelayWindowConfig& config() const { return config_; }
  int frames() const { return static_cast<int>(data_.rows()); }
  int dim() const { return static_cast<int>(data_.cols()); }

  // Frames [start, start + length).
  FeatureSequence slice(int start, int length) const;

 private:
  FeatureKind kind_;
  RowMatrix data_;
  DelayWindowConfig config_;
};

DelayDistributionSequence normalize_affinities(const AffinitySequence& aff);

struct InfoNceResult {
  double loss = 0.0;
  int clamped_frames = 0;  // frames whose zero-offset probability hit the floor
};

// Mean negative log probability of the zero-offset column. Diagnostic only.
InfoNceResult sync_infonce_loss(const DelayDistributionSequence& dist);

// Ties go to the smallest column, i.e. the most negative offset.
DiscreteDelaySequence argmax_delays(const DelayDistributionSequence& dist);

PcaModel pca_fit(std::span<const ActivationSequence> acts, int dim);
FeatureSequence pca_project(const PcaModel& model, const ActivationSequence& acts,
                            const DelayWindowConfig& config = {});

Codebook kmeans_fit(std::span<const double> values, int k, std::uint64_t seed);
FeatureSequence quantize_grid(const DelayDistributionSequence& dist, const Codebook& cb);

FeatureSequence concat_features(const DelayDistributionSequence& dist,
                                const FeatureSequence& pca);

FeatureSequence to_feature(const DelayDistributionSequence& dist);
FeatureSequence to_feature(const DiscreteDelaySequence& delays);

}  // namespace syncwatch

#endif  // SYNCWATCH_SYNC_FEATURES_HPP_
