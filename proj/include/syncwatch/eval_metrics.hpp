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

#ifndef SYNCWATCH_EVAL_METRICS_HPP_
#define SYNCWATCH_EVAL_METRICS_HPP_

#include <span>
#include <vector>

#include "syncwatch/scoring.hpp"

namespace syncwatch {

struct LabeledScore {
  double score = 0.0;
  int label = 0;  // 0 = real, 1 = fake
};

// Mean over fakes of the precision at each fake's rank. Scores are ranked
// descending and tied fakes are placed after tied reals.
double average_precision(std::span<const LabeledScore> items);

// Mann-Whitney statistic: fraction of (fake, real) pairs in which the fake
// scores higher, ties counting one half.
double roc_auc(std::span<const LabeledScore> items);

struct LocalizationCase {
  std::vector<double> frame_scores;
  FrameInterval interval;
};

// Fraction of videos whose top-k frames touch the annotated interval.
double localization_accuracy(std::span<const LocalizationCase> cases, int k = 5);

}  // namespace syncwatch

#endif  // SYNCWATCH_EVAL_METRICS_HPP_
