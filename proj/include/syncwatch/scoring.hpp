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

#ifndef SYNCWATCH_SCORING_HPP_
#define SYNCWATCH_SCORING_HPP_

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "syncwatch/ar_model.hpp"
#include "syncwatch/sync_features.hpp"
#include "syncwatch/training.hpp"

namespace syncwatch {

struct WindowScore {
  int start = 0;
  int length = 0;
  double score = 0.0;  // mean frame score inside the window
};

// Higher scores mean "more likely fake" everywhere.
struct ScoreReport {
  std::vector<double> frame_scores;
  std::vector<double> cumulative;
  std::vector<WindowScore> windows;
  double video_score = 0.0;
  bool short_input = false;  // fewer frames than one full window
};

// Half-open frame interval [start, end).
using FrameInterval = std::pair<int, int>;

inline constexpr int kDefaultWindow = 50;
inline constexpr int kDefaultStride = 25;

// Teacher-forced per-frame losses of one window, inference mode.
template <typename Scalar>
ScoreReport score_sequence(const ArParamsT<Scalar>& params, const FeatureSequence& x,
                           LossKind loss);

// Window starts at multiples of stride, plus one final window ending at the
// last frame when the stride grid does not reach it.
std::vector<int> window_starts(int frames, int window, int stride);

// Sliding-window scoring of a whole video. A frame covered by several windows
// keeps the score from the earliest one, where it has the longest history.
template <typename Scalar>
ScoreReport score_video(const ArParamsT<Scalar>& params, const FeatureSequence& x, LossKind loss,
                        int window = kDefaultWindow, int stride = kDefaultStride);

ScoreReport naive_bayes_score(const NaiveBayesModel& model, const DiscreteDelaySequence& x);

// Indices of the k largest scores, ties to earlier frames.
std::vector<int> localize(std::span<const double> frame_scores, int k);

bool localization_hit(std::span<const int> frames, const FrameInterval& interval);

}  // namespace syncwatch

#endif  // SYNCWATCH_SCORING_HPP_
