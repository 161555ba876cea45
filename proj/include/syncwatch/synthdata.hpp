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

#ifndef SYNCWATCH_SYNTHDATA_HPP_
#define SYNCWATCH_SYNTHDATA_HPP_

#include <cstdint>
#include <optional>
#include <string_view>

#include "syncwatch/scoring.hpp"
#include "syncwatch/sync_features.hpp"

namespace syncwatch {

enum class FakeMode { kDrift, kFlat, kInterval };

std::string_view to_string(FakeMode mode);
FakeMode fake_mode_from_string(std::string_view name);

// Generator knobs. These are calibration parameters of the synthetic corpus.
struct GenConfig {
  DelayWindowConfig window;
  int frames = 120;

  // Real videos: one constant offset per video, a peak of random height at
  // that offset, AR(1) background noise with stationary sd noise_sd.
  int offset_min = -2;
  int offset_max = 2;
  double peak_mean = 4.0;
  double peak_sd = 0.5;
  double noise_sd = 0.3;
  double ar_rho = 0.9;

  // Fakes.
  double drift_step_sd = 1.0;     // random-walk step of the peak, in frames
  double flat_probability = 0.3;  // chance that a span is flattened
  int flat_span = 10;
  double flat_noise_sd = 0.05;
  double flat_peak_margin = 0.1;  // keeps each flattened row's argmax in place
  int interval_length = 9;

  // Activation stand-ins.
  int activation_dim = 128;
  double activation_noise_sd = 0.1;
  std::uint64_t projection_seed = 7;

  void validate() const;
};

// Independent stream seed derived from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

AffinitySequence gen_real(const GenConfig& cfg, std::uint64_t seed);

struct FakeSample {
  AffinitySequence affinities;
  std::optional<FrameInterval> interval;  // interval mode only
};

// drift: the peak column follows a clipped random walk.
// flat: random spans become near-uniform rows with each row's argmax kept,
//       so the per-frame delay histogram matches a real video.
// interval: gen_real with one interval_length span replaced by drift rows.
FakeSample gen_fake(const GenConfig& cfg, std::uint64_t seed, FakeMode mode);

// Fixed random linear map of each distribution row plus Gaussian noise.
ActivationSequence activations_from_distribution(const GenConfig& cfg, std::uint64_t noise_seed,
                                                 const DelayDistributionSequence& dist);

// Activations of the video gen_real / gen_fake would produce for this seed.
ActivationSequence gen_activations(const GenConfig& cfg, std::uint64_t seed, int label,
                                   FakeMode mode = FakeMode::kDrift);

}  // namespace syncwatch

#endif  // SYNCWATCH_SYNTHDATA_HPP_
