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

#include "syncwatch/training.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "syncwatch/synthdata.hpp"

namespace syncwatch {
namespace {

constexpr double kLn2 = std::numbers::ln2;
const DelayWindowConfig kTau1{1, 25};

RowMatrix row(std::initializer_list<double> values) {
  RowMatrix m(1, values.size());
  Eigen::Index c = 0;
  for (double v : values) m(0, c++) = v;
  return m;
}

TEST_CASE("loss_ce_discrete") {
  const DelayWindowConfig cfg;
  RowMatrix onehot = RowMatrix::Zero(2, 31);
  onehot(0, 3) = onehot(1, 20) = 1.0;
  const DiscreteDelaySequence targets({3 - 15, 20 - 15}, cfg);
  CHECK(loss_ce_discrete(onehot, targets) == 0.0);
  const RowMatrix uniform = RowMatrix::Constant(2, 31, 1.0 / 31);
  CHECK(loss_ce_discrete(uniform, targets) == doctest::Approx(std::log(31.0)).epsilon(1e-14));

  RowMatrix pred(2, 3);
  pred << 0.25, 0.5, 0.25, 0.125, 0.5, 0.375;
  CHECK(loss_ce_discrete(pred, DiscreteDelaySequence({0, -1}, kTau1)) ==
        doctest::Approx(2 * kLn2).epsilon(1e-14));
  CHECK_THROWS(loss_ce_discrete(pred, DiscreteDelaySequence({0}, kTau1)));
}

TEST_CASE("loss_soft_ce") {
  const RowMatrix uniform = RowMatrix::Constant(1, 31, 1.0 / 31);
  CHECK(loss_soft_ce(uniform, uniform) == doctest::Approx(std::log(31.0)).epsilon(1e-14));
  CHECK(loss_soft_ce(row({0, 1, 0}), row({0, 1, 0})) == 0.0);
  CHECK(loss_soft_ce(row({0.25, 0.5, 0.25}), row({0.5, 0.5, 0})) ==
        doctest::Approx(1.5 * kLn2).epsilon(1e-14));
  CHECK_THROWS_AS(loss_soft_ce(row({0.5, 0.5}), row({0.5, 0.5, 0})), std::invalid_argument);
}

TEST_CASE("soft CE is bounded below by the target entropy (Gibbs)") {
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> gamma(0.7, 1.0);
  const auto simplex = [&](int w) {
    RowMatrix r(1, w);
    for (int c = 0; c < w; ++c) r(0, c) = gamma(rng) + 1e-9;
    return RowMatrix(r / r.sum());
  };
  for (int trial = 0; trial < 300; ++trial) {
    const RowMatrix target = simplex(7);
    const RowMatrix pred = simplex(7);
    const double entropy = -(target.array() * target.array().log()).sum();
    CHECK(loss_soft_ce(pred, target) >= entropy - 1e-12);
    CHECK(loss_soft_ce(target, target) == doctest::Approx(entropy).epsilon(1e-12));
  }
}

TEST_CASE("loss_bce") {
  CHECK(loss_bce(row({1, 0, 1}), row({1, 0, 1})) < 1e-11);
  CHECK(loss_bce(row({0.5}), row({1})) == doctest::Approx(kLn2).epsilon(1e-14));
  CHECK(loss_bce(row({0.5, 0.5}), row({1, 0})) == doctest::Approx(2 * kLn2).epsilon(1e-14));
}

TEST_CASE("loss_mse") {
  CHECK(loss_mse(row({1, 2}), row({1, 2})) == 0.0);
  CHECK(loss_mse(row({3, 4}), row({0, 0})) == 25.0);
  RowMatrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 2;
  b.setZero();
  CHECK(loss_mse(a, b) == 2.5);
}

TEST_CASE("loss_raster") {
  RowMatrix codes(1, 2);
  codes << 1, 0;
  RowMatrix sure(2, 2);
  sure << -1e3, 1e3, 1e3, -1e3;
  CHECK(loss_raster(sure, codes) == 0.0);
  CHECK(loss_raster(RowMatrix::Zero(2, 8), codes) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  RowMatrix one(1, 2);
  one << std::log(3.0), 0.0;  // probabilities 3/4, 1/4
  RowMatrix code(1, 1);
  code << 1;
  CHECK(loss_raster(one, code) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  code << 2;
  CHECK_THROWS(loss_raster(one, code));
}

TEST_CASE("losses are nonnegative") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 100; ++trial) {
    RowMatrix p(2, 5), t(2, 5);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = u(rng);
      t.data()[i] = u(rng);
    }
    CHECK(loss_bce(p, t) >= 0.0);
    CHECK(loss_mse(p, t) >= 0.0);
    p.row(0) /= p.row(0).sum();
    p.row(1) /= p.row(1).sum();
    t.row(0) /= t.row(0).sum();
    t.row(1) /= t.row(1).sum();
    CHECK(loss_soft_ce(p, t) >= 0.0);
  }
}

TEST_CASE("lr schedule") {
  TrainConfig cfg;
  cfg.total_steps = 2000;
  cfg.warmup_steps = 500;
  CHECK(lr_at(0, cfg) == doctest::Approx(1e-3 / 500));
  CHECK(lr_at(500, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(1250, cfg) == doctest::Approx(5e-4));
  CHECK(std::abs(lr_at(2000, cfg)) < 1e-18);
  CHECK(std::abs(lr_at(499, cfg) - lr_at(500, cfg)) <= cfg.lr_max / cfg.warmup_steps);
  CHECK_THROWS_AS(lr_at(2001, cfg), std::out_of_range);
  CHECK_THROWS_AS(lr_at(-1, cfg), std::out_of_range);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.total_steps = 100;
  cfg.warmup_steps = 100;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.warmup_steps = 10;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_max = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("pairing table") {
  CHECK(loss_accepts(LossKind::kCeDiscrete, FeatureKind::kDiscreteDelay));
  CHECK(loss_accepts(LossKind::kSoftCe, FeatureKind::kDistribution));
  CHECK(loss_accepts(LossKind::kBce, FeatureKind::kDistribution));
  CHECK(loss_accepts(LossKind::kMse, FeatureKind::kActivationPca));
  CHECK(loss_accepts(LossKind::kMse, FeatureKind::kConcatAv));
  CHECK(loss_accepts(LossKind::kRasterCe, FeatureKind::kRasterCodes));
  CHECK_FALSE(loss_accepts(LossKind::kSoftCe, FeatureKind::kActivationPca));
  CHECK_FALSE(loss_accepts(LossKind::kMse, FeatureKind::kDistribution));
  CHECK_THROWS_AS(require_pairing(LossKind::kSoftCe, FeatureKind::kActivationPca),
                  std::invalid_argument);
  const ArConfig cfg =
      model_config_for(LossKind::kSoftCe, FeatureKind::kDistribution, 31, DelayWindowConfig{});
  CHECK(cfg.head == OutputHead::kSoftmax);
  CHECK(cfg.d_in == 31);
  CHECK(cfg.d_out == 31);
  const ArConfig raster =
      model_config_for(LossKind::kRasterCe, FeatureKind::kRasterCodes, 31, DelayWindowConfig{}, 8);
  CHECK(raster.head == OutputHead::kRasterCodebook);
  CHECK(raster.max_positions() == 50 * 31);
  CHECK(raster.d_out == 8);
}

TEST_CASE("grad_check on tiny models") {
  ArConfig tiny;
  tiny.n_blocks = 1;
  tiny.d_model = 8;
  tiny.n_heads = 2;
  tiny.n_max = 4;
  tiny.d_in = 5;
  tiny.d_out = 5;
  tiny.raster_k = 3;
  tiny.dropout_rate = 0.1;
  for (auto loss : {LossKind::kCeDiscrete, LossKind::kSoftCe, LossKind::kBce, LossKind::kMse,
                    LossKind::kRasterCe}) {
    const GradCheckResult r = grad_check(tiny, loss, 7);
    CHECK_MESSAGE(r.max_rel_error < 1e-4, to_string(loss), " worst ", r.worst_tensor);
  }
}

TEST_CASE("naive Bayes matches smoothed counts") {
  const NaiveBayesModel m = naive_bayes_fit(std::vector{DiscreteDelaySequence({-1, 0, 0, 0}, kTau1)});
  CHECK(m.probability(-1) == 2.0 / 7);
  CHECK(m.probability(0) == 4.0 / 7);
  CHECK(m.probability(1) == 1.0 / 7);
  const NaiveBayesModel single = naive_bayes_fit(std::vector{DiscreteDelaySequence({0}, kTau1)});
  CHECK(single.probability(-1) == 0.25);
  CHECK(single.probability(0) == 0.5);
  CHECK(single.probability(1) == 0.25);
  CHECK_THROWS_AS(naive_bayes_fit(std::vector<DiscreteDelaySequence>{}), std::invalid_argument);
}

TEST_CASE("naive Bayes probabilities sum to one in rational arithmetic") {
  std::mt19937_64 rng(5);
  const DelayWindowConfig cfg{3, 25};
  std::uniform_int_distribution<int> offset(-3, 3);
  std::vector<DiscreteDelaySequence> train;
  for (int s = 0; s < 4; ++s) {
    std::vector<int> d(9);
    for (int& x : d) x = offset(rng);
    train.emplace_back(d, cfg);
  }
  const NaiveBayesModel m = naive_bayes_fit(train);
  oracle::Rational total(0);
  for (int o = -3; o <= 3; ++o) total += oracle::Rational(m.counts[o + 3] + 1, m.total + 7);
  CHECK(total == oracle::Rational(1));
}

std::vector<FeatureSequence> synthetic_windows(int videos, std::uint64_t seed) {
  GenConfig gen;
  gen.frames = 50;
  std::vector<FeatureSequence> data;
  for (int v = 0; v < videos; ++v) {
    data.push_back(to_feature(normalize_affinities(gen_real(gen, derive_seed(seed, v)))));
  }
  return data;
}

ArConfig small_model() {
  ArConfig cfg;
  cfg.n_blocks = 1;
  cfg.d_model = 32;
  cfg.n_heads = 4;
  return cfg;
}

TEST_CASE("training is deterministic and zero steps keep the init") {
  const auto data = synthetic_windows(8, 1);
  TrainConfig tc;
  tc.loss = LossKind::kSoftCe;
  tc.total_steps = 6;
  tc.warmup_steps = 2;
  tc.batch_size = 4;
  tc.seed = 11;
  const auto a = train(small_model(), tc, data);
  const auto b = train(small_model(), tc, data);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.loss_trace.size() == 6);
  CHECK(a.lr_trace.size() == 6);
  std::vector<Mat<float>> ta;
  a.params.visit([&](const std::string&, const Mat<float>& t, TensorRole) { ta.push_back(t); });
  std::size_t i = 0;
  b.params.visit([&](const std::string&, const Mat<float>& t, TensorRole) { CHECK(t == ta[i++]); });

  tc.total_steps = 0;
  const auto none = train(small_model(), tc, data);
  const auto init = init_params<float>(small_model(), tc.seed);
  std::vector<Mat<float>> ti;
  init.visit([&](const std::string&, const Mat<float>& t, TensorRole) { ti.push_back(t); });
  i = 0;
  none.params.visit([&](const std::string&, const Mat<float>& t, TensorRole) { CHECK(t == ti[i++]); });
  CHECK(none.loss_trace.empty());
}

TEST_CASE("training rejects unusable data") {
  TrainConfig tc;
  tc.loss = LossKind::kSoftCe;
  tc.total_steps = 4;
  tc.warmup_steps = 1;
  CHECK_THROWS_AS(train(small_model(), tc, std::vector<FeatureSequence>{}), std::invalid_argument);
  const FeatureSequence acts(FeatureKind::kActivationPca, RowMatrix::Zero(10, 31), DelayWindowConfig{});
  CHECK_THROWS_AS(train(small_model(), tc, std::vector{acts}), std::invalid_argument);
}

TEST_CASE("training lowers the loss on synthetic real sequences") {
  const auto data = synthetic_windows(64, 2);
  TrainConfig tc;
  tc.loss = LossKind::kSoftCe;
  tc.total_steps = 200;
  tc.warmup_steps = 50;
  tc.seed = 3;
  const auto r = train(small_model(), tc, data);
  double head = 0.0, tail = 0.0;
  for (int s = 0; s < 20; ++s) {
    head += r.loss_trace[s];
    tail += r.loss_trace[180 + s];
  }
  CHECK(tail < head);
}

}  // namespace
}  // namespace syncwatch
