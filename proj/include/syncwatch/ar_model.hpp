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

#ifndef SYNCWATCH_AR_MODEL_HPP_
#define SYNCWATCH_AR_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncwatch/common.hpp"
#include "syncwatch/sync_features.hpp"

namespace syncwatch {

enum class OutputHead { kSoftmax, kSigmoid, kLinear, kRasterCodebook };

std::string_view to_string(OutputHead head);
OutputHead output_head_from_string(std::string_view name);

// Decoder hyperparameters. For the raster head, d_in is the number of cells
// per frame (the delay window width) and d_out equals raster_k; inputs are
// one-hot codes and the positional table covers n_max * d_in cells.
struct ArConfig {
  int n_blocks = 2;
  int n_heads = 16;
  int d_model = 256;
  int d_in = 31;
  int d_out = 31;
  int n_max = 50;
  double dropout_rate = 0.1;
  OutputHead head = OutputHead::kSoftmax;
  int raster_k = 8;

  void validate() const;
  int head_width() const { return d_model / n_heads; }
  int ffn_width() const { return 4 * d_model; }
  int input_width() const { return head == OutputHead::kRasterCodebook ? raster_k : d_in; }
  int max_positions() const { return head == OutputHead::kRasterCodebook ? n_max * d_in : n_max; }

  bool operator==(const ArConfig&) const = default;
};

enum class TensorRole { kWeight, kBias, kNormGain };

template <typename Scalar>
struct LayerNormParams {
  Mat<Scalar> gain;  // 1 x d
  Mat<Scalar> bias;  // 1 x d
};

template <typename Scalar>
struct DecoderBlockParams {
  LayerNormParams<Scalar> ln1;
  Mat<Scalar> qkv_weight;  // d x 3d, columns [q | k | v], heads contiguous
  Mat<Scalar> qkv_bias;
  Mat<Scalar> attn_out_weight;  // d x d
  Mat<Scalar> attn_out_bias;
  LayerNormParams<Scalar> ln2;
  Mat<Scalar> fc1_weight;  // d x 4d
  Mat<Scalar> fc1_bias;
  Mat<Scalar> fc2_weight;  // 4d x d
  Mat<Scalar> fc2_bias;
};

// All learnable tensors of the decoder. Also used as the gradient container.
template <typename Scalar>
struct ArParamsT {
  ArConfig config;
  Mat<Scalar> input_weight;  // input_width x d
  Mat<Scalar> input_bias;
  Mat<Scalar> start_token;   // 1 x d
  Mat<Scalar> pos_enc;       // max_positions x d
  std::vector<DecoderBlockParams<Scalar>> blocks;
  LayerNormParams<Scalar> final_ln;
  Mat<Scalar> output_weight;  // d x d_out
  Mat<Scalar> output_bias;

  // Calls fn(name, tensor, role) for every tensor in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  ArParamsT zeros_like() const;

  template <typename Other>
  ArParamsT<Other> cast() const;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn);
};

using ArParams = ArParamsT<float>;

template <typename Scalar>
template <typename Self, typename Fn>
void ArParamsT<Scalar>::visit_impl(Self& self, Fn& fn) {
  fn(std::string("input_proj.weight"), self.input_weight, TensorRole::kWeight);
  fn(std::string("input_proj.bias"), self.input_bias, TensorRole::kBias);
  fn(std::string("start_token"), self.start_token, TensorRole::kWeight);
  fn(std::string("pos_enc"), self.pos_enc, TensorRole::kWeight);
  for (std::size_t b = 0; b < self.blocks.size(); ++b) {
    auto& blk = self.blocks[b];
    const std::string p = "blocks." + std::to_string(b) + ".";
    fn(p + "ln1.gain", blk.ln1.gain, TensorRole::kNormGain);
    fn(p + "ln1.bias", blk.ln1.bias, TensorRole::kBias);
    fn(p + "attn.qkv.weight", blk.qkv_weight, TensorRole::kWeight);
    fn(p + "attn.qkv.bias", blk.qkv_bias, TensorRole::kBias);
    fn(p + "attn.out.weight", blk.attn_out_weight, TensorRole::kWeight);
    fn(p + "attn.out.bias", blk.attn_out_bias, TensorRole::kBias);
    fn(p + "ln2.gain", blk.ln2.gain, TensorRole::kNormGain);
    fn(p + "ln2.bias", blk.ln2.bias, TensorRole::kBias);
    fn(p + "ffn.fc1.weight", blk.fc1_weight, TensorRole::kWeight);
    fn(p + "ffn.fc1.bias", blk.fc1_bias, TensorRole::kBias);
    fn(p + "ffn.fc2.weight", blk.fc2_weight, TensorRole::kWeight);
    fn(p + "ffn.fc2.bias", blk.fc2_bias, TensorRole::kBias);
  }
  fn(std::string("final_ln.gain"), self.final_ln.gain, TensorRole::kNormGain);
  fn(std::string("final_ln.bias"), self.final_ln.bias, TensorRole::kBias);
  fn(std::string("output_proj.weight"), self.output_weight, TensorRole::kWeight);
  fn(std::string("output_proj.bias"), self.output_bias, TensorRole::kBias);
}

template <typename Scalar>
template <typename Other>
ArParamsT<Other> ArParamsT<Scalar>::cast() const {
  ArParamsT<Other> out;
  out.config = config;
  out.blocks.resize(blocks.size());
  std::vector<const Mat<Scalar>*> src;
  visit([&](const std::string&, const Mat<Scalar>& t, TensorRole) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Mat<Other>& t, TensorRole) {
    t = src[i++]->template cast<Other>();
  });
  return out;
}

// Tensors shaped for cfg with every entry zero.
template <typename Scalar>
ArParamsT<Scalar> zero_params(const ArConfig& cfg);

// Weights i.i.d. N(0, 0.02), biases zero, norm gains one.
template <typename Scalar>
ArParamsT<Scalar> init_params(const ArConfig& cfg, std::uint64_t seed);

// Rows fed to the decoder for one sequence: the feature rows themselves, or
// the raster-ordered one-hot code cells for the raster head.
template <typename Scalar>
Mat<Scalar> model_input(const ArConfig& cfg, const FeatureSequence& x);

// Activations retained for the backward pass of one batch.
template <typename Scalar>
struct BlockCache {
  Mat<Scalar> x_in;
  Mat<Scalar> ln1_hat;
  Vec<Scalar> ln1_rstd;
  Mat<Scalar> ln1_out;
  Mat<Scalar> qkv;
  std::vector<Mat<Scalar>> probs;  // per (sequence, head), row-stochastic, lower triangular
  Mat<Scalar> attn_cat;
  Mat<Scalar> drop1;
  Mat<Scalar> x_mid;
  Mat<Scalar> ln2_hat;
  Vec<Scalar> ln2_rstd;
  Mat<Scalar> ln2_out;
  Mat<Scalar> ffn_pre;
  Mat<Scalar> ffn_act;
  Mat<Scalar> drop2;
};

template <typename Scalar>
struct BatchForward {
  Mat<Scalar> logits;                  // stacked rows of every sequence
  std::vector<Eigen::Index> offsets;   // sequence b owns rows [offsets[b], offsets[b+1])
  Mat<Scalar> inputs;                  // stacked model inputs
  std::vector<BlockCache<Scalar>> blocks;
  Mat<Scalar> final_hat;
  Vec<Scalar> final_rstd;
  Mat<Scalar> final_out;
};

// Teacher-forced decoder pass over a batch. Row p of a sequence's logits is
// computed from the start token and input rows 0..p-1 only.
template <typename Scalar>
BatchForward<Scalar> forward_batch(const ArParamsT<Scalar>& params,
                                   std::span<const Mat<Scalar>> inputs, bool train_mode,
                                   std::uint64_t seed);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(logits).
template <typename Scalar>
void backward_batch(const ArParamsT<Scalar>& params, const BatchForward<Scalar>& fwd,
                    const Mat<Scalar>& dlogits, ArParamsT<Scalar>& grads);

template <typename Scalar>
Mat<Scalar> apply_head(OutputHead head, const Mat<Scalar>& logits);

// Predictions (after the output activation), one row per frame.
template <typename Scalar>
Mat<Scalar> forward(const ArParamsT<Scalar>& params, const FeatureSequence& x, bool train_mode,
                    std::uint64_t seed);

// Raw K-way logits per cell, (T*W) x K in raster order.
template <typename Scalar>
Mat<Scalar> forward_raster(const ArParamsT<Scalar>& params, const FeatureSequence& codes);

}  // namespace syncwatch

#endif  // SYNCWATCH_AR_MODEL_HPP_
