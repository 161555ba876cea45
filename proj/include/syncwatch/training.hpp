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

#ifndef SYNCWATCH_TRAINING_HPP_
#define SYNCWATCH_TRAINING_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "syncwatch/ar_model.hpp"
#include "syncwatch/common.hpp"
#include "syncwatch/sync_features.hpp"

namespace syncwatch {

enum class LossKind { kCeDiscrete, kSoftCe, kBce, kMse, kRasterCe };

std::string_view to_string(LossKind loss);
LossKind loss_kind_from_string(std::string_view name);

// The fixed loss / feature / head pairing table.
bool loss_accepts(LossKind loss, FeatureKind kind);
OutputHead head_for(LossKind loss);
void require_pairing(LossKind loss, FeatureKind kind);

struct TrainConfig {
  double lr_max = 1e-3;
  double weight_decay = 1e-6;
  int batch_size = 16;
  int warmup_steps = 500;
  int total_steps = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kSoftCe;

  void validate() const;
};

// Reference per-loss evaluators over predictions (rows = frames). All return
// the mean over frames; probabilities are floored at kProbEps before log.
double loss_ce_discrete(const RowMatrix& pred, const DiscreteDelaySequence& target);
double loss_soft_ce(const RowMatrix& pred, const RowMatrix& target);
double loss_bce(const RowMatrix& pred, const RowMatrix& target);
double loss_mse(const RowMatrix& pred, const RowMatrix& target);
// logits is (T*W) x K in raster order, codes is T x W.
double loss_raster(const RowMatrix& logits, const RowMatrix& codes);

// Per-frame loss computed from raw logits, with the gradient of
// grad_scale * sum(frame losses) written to dlogits when non-null. For the
// raster loss a frame's value is the mean over its cells.
template <typename Scalar>
Vec<double> frame_losses(LossKind loss, const Mat<Scalar>& logits, const Mat<Scalar>& target,
                         Mat<Scalar>* dlogits = nullptr, Scalar grad_scale = Scalar(1));

double lr_at(int step, const TrainConfig& cfg);

template <typename Scalar>
struct TrainResultT {
  ArParamsT<Scalar> params;
  std::vector<double> loss_trace;  // per step
  std::vector<double> lr_trace;
};
using TrainResult = TrainResultT<float>;

// Mini-batch AdamW with teacher forcing and global-norm clipping. Parameters
// are initialised from train_cfg.seed; deterministic given the seed.
template <typename Scalar>
TrainResultT<Scalar> train_model(const ArConfig& model_cfg, const TrainConfig& train_cfg,
                                 std::span<const FeatureSequence> data);

// Single-precision training, the bulk path.
TrainResult train(const ArConfig& model_cfg, const TrainConfig& train_cfg,
                  std::span<const FeatureSequence> data);

// Mean per-sequence loss of a batch and, optionally, its parameter gradient.
template <typename Scalar>
double batch_loss(const ArParamsT<Scalar>& params, LossKind loss,
                  std::span<const FeatureSequence> batch, bool train_mode, std::uint64_t seed,
                  ArParamsT<Scalar>* grads);

// Largest relative error between the analytic gradient and central finite
// differences (h = 1e-5) over every parameter entry.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};
GradCheckResult grad_check(const ArConfig& tiny_cfg, LossKind loss, std::uint64_t seed);

// Position-independent categorical over offsets with add-one smoothing.
struct NaiveBayesModel {
  DelayWindowConfig config;
  std::vector<long long> counts;  // per offset, index = offset + tau
  long long total = 0;

  double probability(int offset) const;
};

NaiveBayesModel naive_bayes_fit(std::span<const DiscreteDelaySequence> train);

ArConfig model_config_for(LossKind loss, FeatureKind kind, int feature_dim,
                          const DelayWindowConfig& window, int raster_k = 8);

}  // namespace syncwatch

#endif  // SYNCWATCH_TRAINING_HPP_
