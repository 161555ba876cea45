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

#include "syncwatch/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syncwatch {

namespace {

void require_both_classes(std::span<const LabeledScore> items, long long& positives,
                          long long& negatives) {
  positives = 0;
  negatives = 0;
  for (const auto& item : items) {
    if (!std::isfinite(item.score)) throw DataError("metrics: non-finite score");
    if (item.label == 1) {
      ++positives;
    } else if (item.label == 0) {
      ++negatives;
    } else {
      throw DataError("metrics: label must be 0 or 1");
    }
  }
  if (positives == 0 || negatives == 0) {
    throw DataError("metrics: need at least one real and one fake item");
  }
}

}  // namespace

double average_precision(std::span<const LabeledScore> items) {
  long long positives = 0;
  long long negatives = 0;
  require_both_classes(items, positives, negatives);
  std::vector<LabeledScore> ranked(items.begin(), items.end());
  std::sort(ranked.begin(), ranked.end(), [](const LabeledScore& a, const LabeledScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });
  double sum = 0.0;
  long long hits = 0;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    if (ranked[rank].label == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

double roc_auc(std::span<const LabeledScore> items) {
  long long positives = 0;
  long long negatives = 0;
  require_both_classes(items, positives, negatives);
  std::vector<LabeledScore> ranked(items.begin(), items.end());
  std::sort(ranked.begin(), ranked.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });
  // Twice the number of winning pairs, so ties stay integral.
  long long twice_wins = 0;
  long long reals_below = 0;
  for (std::size_t i = 0; i < ranked.size();) {
    std::size_t j = i;
    long long pos = 0;
    long long neg = 0;
    while (j < ranked.size() && ranked[j].score == ranked[i].score) {
      (ranked[j].label == 1 ? pos : neg)++;
      ++j;
    }
    twice_wins += 2 * pos * reals_below + pos * neg;
    reals_below += neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives) *
                                            static_cast<double>(negatives));
}

double localization_accuracy(std::span<const LocalizationCase> cases, int k) {
  if (cases.empty()) throw std::invalid_argument("localization_accuracy: no videos");
  int hits = 0;
  for (const auto& c : cases) {
    const int n = static_cast<int>(c.frame_scores.size());
    if (c.interval.first < 0 || c.interval.second > n || c.interval.first >= c.interval.second) {
      throw DataError("localization_accuracy: interval outside the video");
    }
    const auto top = localize(c.frame_scores, std::min(k, n));
    if (localization_hit(top, c.interval)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

}  // namespace syncwatch
