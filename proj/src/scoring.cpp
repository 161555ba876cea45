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

#include "syncwatch/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace syncwatch {

namespace {

void fill_cumulative(ScoreReport& report) {
  report.cumulative.resize(report.frame_scores.size());
  std::partial_sum(report.frame_scores.begin(), report.frame_scores.end(),
                   report.cumulative.begin());
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

template <typename Scalar>
ScoreReport score_sequence(const ArParamsT<Scalar>& params, const FeatureSequence& x,
                           LossKind loss) {
  require_pairing(loss, x.kind());
  if (head_for(loss) != params.config.head) {
    throw std::invalid_argument("score: loss " + std::string(to_string(loss)) +
                                " does not match model head " +
                                std::string(to_string(params.config.head)));
  }
  const Mat<Scalar> input = model_input<Scalar>(params.config, x);
  const auto fwd = forward_batch<Scalar>(params, std::span(&input, 1), false, 0);
  const Mat<Scalar> target = x.data().template cast<Scalar>();
  const Vec<double> per_frame = frame_losses<Scalar>(loss, fwd.logits, target);

  ScoreReport report;
  report.frame_scores.assign(per_frame.data(), per_frame.data() + per_frame.size());
  fill_cumulative(report);
  report.video_score = mean_of(report.frame_scores);
  report.windows.push_back({0, x.frames(), report.video_score});
  return report;
}

std::vector<int> window_starts(int frames, int window, int stride) {
  if (window < 1 || stride < 1) throw std::invalid_argument("window and stride must be >= 1");
  if (frames <= window) return {0};
  std::vector<int> starts;
  for (int s = 0; s + window <= frames; s += stride) starts.push_back(s);
  if (starts.back() + window < frames) starts.push_back(frames - window);
  return starts;
}

template <typename Scalar>
ScoreReport score_video(const ArParamsT<Scalar>& params, const FeatureSequence& x, LossKind loss,
                        int window, int stride) {
  if (window > params.config.n_max) {
    throw std::invalid_argument("score_video: window " + std::to_string(window) +
                                " exceeds model n_max " + std::to_string(params.config.n_max));
  }
  ScoreReport report;
  report.short_input = x.frames() < window;
  report.frame_scores.assign(x.frames(), 0.0);
  std::vector<bool> covered(x.frames(), false);
  for (int start : window_starts(x.frames(), window, stride)) {
    const int len = std::min(window, x.frames() - start);
    const ScoreReport part = score_sequence(params, x.slice(start, len), loss);
    for (int i = 0; i < len; ++i) {
      if (!covered[start + i]) {
        report.frame_scores[start + i] = part.frame_scores[i];
        covered[start + i] = true;
      }
    }
    report.windows.push_back({start, len, part.video_score});
  }
  fill_cumulative(report);
  double total = 0.0;
  for (const auto& w : report.windows) total += w.score;
  report.video_score = total / static_cast<double>(report.windows.size());
  return report;
}

ScoreReport naive_bayes_score(const NaiveBayesModel& model, const DiscreteDelaySequence& x) {
  if (!(x.config() == model.config)) {
    throw std::invalid_argument("naive_bayes_score: window configuration mismatch");
  }
  ScoreReport report;
  report.frame_scores.reserve(x.frames());
  for (int d : x.delays()) report.frame_scores.push_back(-std::log(model.probability(d)));
  fill_cumulative(report);
  report.video_score = mean_of(report.frame_scores);
  report.windows.push_back({0, x.frames(), report.video_score});
  return report;
}

std::vector<int> localize(std::span<const double> frame_scores, int k) {
  const int n = static_cast<int>(frame_scores.size());
  if (k < 0 || k > n) {
    throw std::invalid_argument("localize: k=" + std::to_string(k) + " outside [0, " +
                                std::to_string(n) + "]");
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return frame_scores[a] > frame_scores[b]; });
  idx.resize(k);
  return idx;
}

bool localization_hit(std::span<const int> frames, const FrameInterval& interval) {
  return std::any_of(frames.begin(), frames.end(),
                     [&](int f) { return f >= interval.first && f < interval.second; });
}

template ScoreReport score_sequence<float>(const ArParamsT<float>&, const FeatureSequence&,
                                           LossKind);
template ScoreReport score_sequence<double>(const ArParamsT<double>&, const FeatureSequence&,
                                            LossKind);
template ScoreReport score_video<float>(const ArParamsT<float>&, const FeatureSequence&,
                                        LossKind, int, int);
template ScoreReport score_video<double>(const ArParamsT<double>&, const FeatureSequence&,
                                         LossKind, int, int);

}  // namespace syncwatch
