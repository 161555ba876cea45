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
#include <random>

#include "doctest.h"
#include "oracles.hpp"

namespace syncwatch {
namespace {

ArConfig tiny_softmax(int n_max = 50) {
  ArConfig cfg;
  cfg.n_blocks = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_max = n_max;
  return cfg;
}

FeatureSequence random_distribution(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  RowMatrix rows(frames, 31);
  for (int r = 0; r < frames; ++r) {
    for (int c = 0; c < 31; ++c) rows(r, c) = gamma(rng) + 1e-6;
    rows.row(r) /= rows.row(r).sum();
  }
  return FeatureSequence(FeatureKind::kDistribution, rows, DelayWindowConfig{});
}

TEST_CASE("window starts") {
  CHECK(window_starts(50, 50, 25) == std::vector<int>{0});
  CHECK(window_starts(100, 50, 25) == std::vector<int>{0, 25, 50});
  CHECK(window_starts(120, 50, 25) == std::vector<int>{0, 25, 50, 70});
  CHECK(window_starts(30, 50, 25) == std::vector<int>{0});
  CHECK_THROWS_AS(window_starts(30, 0, 25), std::invalid_argument);
}

TEST_CASE("zero-weight softmax model scores every frame at ln 31") {
  const auto p = zero_params<double>(tiny_softmax());
  const auto x = random_distribution(50, 1);
  const ScoreReport r = score_sequence(p, x, LossKind::kSoftCe);
  REQUIRE(r.frame_scores.size() == 50);
  for (double s : r.frame_scores) CHECK(s == doctest::Approx(std::log(31.0)).epsilon(1e-12));
  CHECK(std::abs(r.cumulative.back() -
                 std::accumulate(r.frame_scores.begin(), r.frame_scores.end(), 0.0)) < 1e-9);
  CHECK(std::is_sorted(r.cumulative.begin(), r.cumulative.end()));
}

TEST_CASE("constructed perfect predictor scores zero") {
  // Output bias at +inf-like logit for the target column with a constant
  // one-hot target sequence.
  auto p = zero_params<double>(tiny_softmax());
  p.output_bias(0, 7) = 1e3;
  RowMatrix rows = RowMatrix::Zero(10, 31);
  rows.col(7).setOnes();
  const ScoreReport r =
      score_sequence(p, FeatureSequence(FeatureKind::kDistribution, rows, DelayWindowConfig{}),
                     LossKind::kSoftCe);
  for (double s : r.frame_scores) CHECK(s == 0.0);
}

TEST_CASE("score_video windows and aggregation") {
  const auto p = zero_params<double>(tiny_softmax());
  const ScoreReport one = score_video(p, random_distribution(50, 2), LossKind::kSoftCe);
  CHECK(one.windows.size() == 1);
  CHECK(!one.short_input);
  CHECK(one.video_score == doctest::Approx(std::log(31.0)).epsilon(1e-12));

  const ScoreReport three = score_video(p, random_distribution(100, 3), LossKind::kSoftCe);
  REQUIRE(three.windows.size() == 3);
  CHECK(three.windows[0].start == 0);
  CHECK(three.windows[1].start == 25);
  CHECK(three.windows[2].start == 50);
  CHECK(three.video_score == doctest::Approx(std::log(31.0)).epsilon(1e-12));

  const ScoreReport short_input = score_video(p, random_distribution(20, 4), LossKind::kSoftCe);
  CHECK(short_input.short_input);
  CHECK(short_input.windows.size() == 1);
  CHECK(short_input.windows[0].length == 20);
}

TEST_CASE("constant frame scores are stride invariant") {
  const auto p = zero_params<double>(tiny_softmax());
  const auto x = random_distribution(120, 5);
  for (int stride : {5, 10, 25, 50}) {
    CHECK(score_video(p, x, LossKind::kSoftCe, 50, stride).video_score ==
          doctest::Approx(std::log(31.0)).epsilon(1e-12));
  }
}

TEST_CASE("video score is the mean of window means") {
  const auto p = oracle::random_params(tiny_softmax(), 6);
  const auto x = random_distribution(120, 7);
  const ScoreReport r = score_video(p, x, LossKind::kSoftCe);
  double total = 0.0;
  for (const auto& w : r.windows) {
    const ScoreReport part = score_sequence(p, x.slice(w.start, w.length), LossKind::kSoftCe);
    CHECK(part.video_score == w.score);
    total += w.score;
  }
  CHECK(r.video_score == doctest::Approx(total / r.windows.size()).epsilon(1e-15));
  // Frames 50..69 are first covered by the window at 25.
  const ScoreReport second = score_sequence(p, x.slice(25, 50), LossKind::kSoftCe);
  CHECK(r.frame_scores[60] == second.frame_scores[35]);
}

TEST_CASE("scoring rejects mismatched inputs") {
  const auto p = zero_params<double>(tiny_softmax());
  const FeatureSequence acts(FeatureKind::kActivationPca, RowMatrix::Zero(10, 31), DelayWindowConfig{});
  CHECK_THROWS_AS(score_sequence(p, acts, LossKind::kMse), std::invalid_argument);
  CHECK_THROWS_AS(score_sequence(p, acts, LossKind::kSoftCe), std::invalid_argument);
  CHECK_THROWS_AS(score_video(p, random_distribution(80, 1), LossKind::kSoftCe, 60, 25),
                  std::invalid_argument);
}

TEST_CASE("naive Bayes scoring") {
  const DelayWindowConfig tau1{1, 25};
  const NaiveBayesModel m = naive_bayes_fit(std::vector{DiscreteDelaySequence({-1, 0, 0, 0}, tau1)});
  const ScoreReport r = naive_bayes_score(m, DiscreteDelaySequence({0, 0}, tau1));
  CHECK(r.frame_scores[0] == doctest::Approx(std::log(7.0 / 4)).epsilon(1e-15));
  CHECK(r.video_score == doctest::Approx(std::log(7.0 / 4)).epsilon(1e-15));

  const ScoreReport worst = naive_bayes_score(m, DiscreteDelaySequence({1, -1}, tau1));
  CHECK(worst.video_score > r.video_score);

  const DelayWindowConfig cfg;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> offset(-15, 15);
  std::vector<int> d(40);
  for (int& x : d) x = offset(rng);
  const NaiveBayesModel wide = naive_bayes_fit(std::vector{DiscreteDelaySequence(d, cfg)});
  std::vector<int> shuffled = d;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(naive_bayes_score(wide, DiscreteDelaySequence(d, cfg)).video_score ==
        doctest::Approx(naive_bayes_score(wide, DiscreteDelaySequence(shuffled, cfg)).video_score)
            .epsilon(1e-15));
}

TEST_CASE("localize") {
  const std::vector<double> peak{0, 0, 9, 0};
  CHECK(localize(peak, 1) == std::vector<int>{2});
  const std::vector<double> flat{1, 1, 1, 1};
  CHECK(localize(flat, 2) == std::vector<int>{0, 1});
  auto all = localize(peak, 4);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(localize(peak, 5), std::invalid_argument);
  const std::vector<int> frames{3, 10};
  CHECK(localization_hit(frames, {10, 19}));
  CHECK(!localization_hit(frames, {4, 10}));
}

}  // namespace
}  // namespace syncwatch
