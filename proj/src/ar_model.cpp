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

#include "syncwatch/ar_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace syncwatch {

std::string_view to_string(OutputHead head) {
  switch (head) {
    case OutputHead::kSoftmax: return "softmax";
    case OutputHead::kSigmoid: return "sigmoid";
    case OutputHead::kLinear: return "linear";
    case OutputHead::kRasterCodebook: return "raster_codebook";
  }
  return "unknown";
}

OutputHead output_head_from_string(std::string_view name) {
  for (auto head : {OutputHead::kSoftmax, OutputHead::kSigmoid, OutputHead::kLinear,
                    OutputHead::kRasterCodebook}) {
    if (to_string(head) == name) return head;
  }
  throw std::invalid_argument("unknown output head '" + std::string(name) + "'");
}

void ArConfig::validate() const {
  if (n_blocks < 1) throw std::invalid_argument("ArConfig: n_blocks must be >= 1");
  if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0) {
    throw std::invalid_argument("ArConfig: d_model must be a positive multiple of n_heads");
  }
  if (n_max < 2) throw std::invalid_argument("ArConfig: n_max must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("ArConfig: dropout_rate must be in [0, 1)");
  }
  if (d_in < 1 || d_out < 1) throw std::invalid_argument("ArConfig: d_in and d_out must be >= 1");
  if (head == OutputHead::kRasterCodebook && (raster_k < 2 || d_out != raster_k)) {
    throw std::invalid_argument("ArConfig: raster head needs raster_k >= 2 and d_out == raster_k");
  }
}

template <typename Scalar>
ArParamsT<Scalar> zero_params(const ArConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  ArParamsT<Scalar> p;
  p.config = cfg;
  p.input_weight = Mat<Scalar>::Zero(cfg.input_width(), d);
  p.input_bias = Mat<Scalar>::Zero(1, d);
  p.start_token = Mat<Scalar>::Zero(1, d);
  p.pos_enc = Mat<Scalar>::Zero(cfg.max_positions(), d);
  p.blocks.resize(cfg.n_blocks);
  for (auto& blk : p.blocks) {
    blk.ln1 = {Mat<Scalar>::Zero(1, d), Mat<Scalar>::Zero(1, d)};
    blk.qkv_weight = Mat<Scalar>::Zero(d, 3 * d);
    blk.qkv_bias = Mat<Scalar>::Zero(1, 3 * d);
    blk.attn_out_weight = Mat<Scalar>::Zero(d, d);
    blk.attn_out_bias = Mat<Scalar>::Zero(1, d);
    blk.ln2 = {Mat<Scalar>::Zero(1, d), Mat<Scalar>::Zero(1, d)};
    blk.fc1_weight = Mat<Scalar>::Zero(d, cfg.ffn_width());
    blk.fc1_bias = Mat<Scalar>::Zero(1, cfg.ffn_width());
    blk.fc2_weight = Mat<Scalar>::Zero(cfg.ffn_width(), d);
    blk.fc2_bias = Mat<Scalar>::Zero(1, d);
  }
  p.final_ln = {Mat<Scalar>::Zero(1, d), Mat<Scalar>::Zero(1, d)};
  p.output_weight = Mat<Scalar>::Zero(d, cfg.d_out);
  p.output_bias = Mat<Scalar>::Zero(1, cfg.d_out);
  return p;
}

template <typename Scalar>
ArParamsT<Scalar> ArParamsT<Scalar>::zeros_like() const {
  return zero_params<Scalar>(config);
}

template <typename Scalar>
ArParamsT<Scalar> init_params(const ArConfig& cfg, std::uint64_t seed) {
  ArParamsT<Scalar> p = zero_params<Scalar>(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  p.visit([&](const std::string&, Mat<Scalar>& t, TensorRole role) {
    switch (role) {
      case TensorRole::kWeight:
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(normal(rng));
        break;
      case TensorRole::kBias: t.setZero(); break;
      case TensorRole::kNormGain: t.setOnes(); break;
    }
  });
  return p;
}

template <typename Scalar>
Mat<Scalar> model_input(const ArConfig& cfg, const FeatureSequence& x) {
  if (cfg.head == OutputHead::kRasterCodebook) {
    if (x.kind() != FeatureKind::kRasterCodes) {
      throw std::invalid_argument("raster head needs raster_codes input, got " +
                                  std::string(to_string(x.kind())));
    }
    if (x.dim() != cfg.d_in) {
      throw std::invalid_argument("raster grid width " + std::to_string(x.dim()) +
                                  " does not match model d_in " + std::to_string(cfg.d_in));
    }
    if (x.frames() > cfg.n_max) {
      throw std::invalid_argument("sequence of " + std::to_string(x.frames()) +
                                  " frames exceeds n_max=" + std::to_string(cfg.n_max));
    }
    const Eigen::Index cells = x.data().size();
    Mat<Scalar> onehot = Mat<Scalar>::Zero(cells, cfg.raster_k);
    for (Eigen::Index c = 0; c < cells; ++c) {
      const double code = x.data().data()[c];  // row-major: frame-major raster order
      if (code < 0 || code >= cfg.raster_k || code != std::floor(code)) {
        throw std::invalid_argument("raster code out of range at cell " + std::to_string(c));
      }
      onehot(c, static_cast<Eigen::Index>(code)) = Scalar(1);
    }
    return onehot;
  }
  if (x.kind() == FeatureKind::kRasterCodes) {
    throw std::invalid_argument("raster_codes input needs the raster_codebook head");
  }
  if (x.dim() != cfg.d_in) {
    throw std::invalid_argument("feature width " + std::to_string(x.dim()) +
                                " does not match model d_in " + std::to_string(cfg.d_in));
  }
  if (x.frames() > cfg.n_max) {
    throw std::invalid_argument("sequence of " + std::to_string(x.frames()) +
                                " frames exceeds n_max=" + std::to_string(cfg.n_max));
  }
  return x.data().template cast<Scalar>();
}

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
void layer_norm_forward(const Mat<Scalar>& x, const LayerNormParams<Scalar>& ln, Mat<Scalar>& hat,
                        Vec<Scalar>& rstd, Mat<Scalar>& out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  hat.resize(n, d);
  rstd.resize(n);
  out.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    rstd(r) = inv;
    hat.row(r) = (x.row(r).array() - mean) * inv;
    out.row(r) = hat.row(r).array() * ln.gain.row(0).array() + ln.bias.row(0).array();
  }
}

// Returns d(loss)/dx and accumulates the gain/bias gradients.
template <typename Scalar>
Mat<Scalar> layer_norm_backward(const Mat<Scalar>& dout, const Mat<Scalar>& hat,
                                const Vec<Scalar>& rstd, const LayerNormParams<Scalar>& ln,
                                LayerNormParams<Scalar>& grad) {
  grad.gain += (dout.array() * hat.array()).colwise().sum().matrix();
  grad.bias += dout.colwise().sum();
  Mat<Scalar> dx(dout.rows(), dout.cols());
  for (Eigen::Index r = 0; r < dout.rows(); ++r) {
    const auto dhat = (dout.row(r).array() * ln.gain.row(0).array()).eval();
    const Scalar m1 = dhat.mean();
    const Scalar m2 = (dhat * hat.row(r).array()).mean();
    dx.row(r) = rstd(r) * (dhat - m1 - hat.row(r).array() * m2);
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar u) {
  return Scalar(0.5) * u * (Scalar(1) + std::erf(u * Scalar(0.5 * std::numbers::sqrt2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar u) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(u * Scalar(0.5 * std::numbers::sqrt2)));
  const Scalar pdf =
      std::exp(Scalar(-0.5) * u * u) * Scalar(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + u * pdf;
}

// Inverted-dropout mask; empty when dropout is inactive.
template <typename Scalar>
Mat<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Mat<Scalar> mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar scale = Scalar(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : Scalar(0);
  return mask;
}

}  // namespace

template <typename Scalar>
BatchForward<Scalar> forward_batch(const ArParamsT<Scalar>& params,
                                   std::span<const Mat<Scalar>> inputs, bool train_mode,
                                   std::uint64_t seed) {
  const ArConfig& cfg = params.config;
  const int d = cfg.d_model;
  const int n_heads = cfg.n_heads;
  const int dh = cfg.head_width();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  const bool use_dropout = train_mode && cfg.dropout_rate > 0.0;
  std::mt19937_64 rng(seed);

  BatchForward<Scalar> fwd;
  fwd.offsets.assign(1, 0);
  for (const auto& x : inputs) {
    if (x.cols() != cfg.input_width()) {
      throw std::invalid_argument("forward: input width mismatch");
    }
    if (x.rows() < 1 || x.rows() > cfg.max_positions()) {
      throw std::invalid_argument("forward: sequence length " + std::to_string(x.rows()) +
                                  " outside [1, " + std::to_string(cfg.max_positions()) + "]");
    }
    fwd.offsets.push_back(fwd.offsets.back() + x.rows());
  }
  const Eigen::Index total = fwd.offsets.back();
  const std::size_t n_seq = inputs.size();

  fwd.inputs.resize(total, cfg.input_width());
  for (std::size_t b = 0; b < n_seq; ++b) {
    fwd.inputs.middleRows(fwd.offsets[b], inputs[b].rows()) = inputs[b];
  }

  // Position 0 holds the start token; position p > 0 holds input row p - 1.
  Mat<Scalar> embedded = fwd.inputs * params.input_weight;
  embedded.rowwise() += params.input_bias.row(0);
  Mat<Scalar> h(total, d);
  for (std::size_t b = 0; b < n_seq; ++b) {
    const Eigen::Index o = fwd.offsets[b];
    const Eigen::Index len = fwd.offsets[b + 1] - o;
    h.row(o) = params.start_token.row(0);
    if (len > 1) h.middleRows(o + 1, len - 1) = embedded.middleRows(o, len - 1);
    h.middleRows(o, len) += params.pos_enc.topRows(len);
  }

  fwd.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const auto& blk = params.blocks[l];
    auto& c = fwd.blocks[l];
    c.x_in = h;
    layer_norm_forward(c.x_in, blk.ln1, c.ln1_hat, c.ln1_rstd, c.ln1_out);
    c.qkv = c.ln1_out * blk.qkv_weight;
    c.qkv.rowwise() += blk.qkv_bias.row(0);

    c.attn_cat.resize(total, d);
    c.probs.resize(n_seq * n_heads);
    for (std::size_t b = 0; b < n_seq; ++b) {
      const Eigen::Index o = fwd.offsets[b];
      const Eigen::Index len = fwd.offsets[b + 1] - o;
      for (int hd = 0; hd < n_heads; ++hd) {
        const auto q = c.qkv.block(o, hd * dh, len, dh);
        const auto k = c.qkv.block(o, d + hd * dh, len, dh);
        const auto v = c.qkv.block(o, 2 * d + hd * dh, len, dh);
        Mat<Scalar>& p = c.probs[b * n_heads + hd];
        p.noalias() = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < len; ++i) {
          const Scalar peak = p.row(i).head(i + 1).maxCoeff();
          p.row(i).head(i + 1) = (p.row(i).head(i + 1).array() - peak).exp();
          p.row(i).head(i + 1) /= p.row(i).head(i + 1).sum();
          p.row(i).tail(len - i - 1).setZero();
        }
        c.attn_cat.block(o, hd * dh, len, dh).noalias() =
            p.template triangularView<Eigen::Lower>() * v;
      }
    }
    Mat<Scalar> attn_out = c.attn_cat * blk.attn_out_weight;
    attn_out.rowwise() += blk.attn_out_bias.row(0);
    if (use_dropout) {
      c.drop1 = dropout_mask<Scalar>(total, d, cfg.dropout_rate, rng);
      attn_out.array() *= c.drop1.array();
    }
    c.x_mid = c.x_in + attn_out;

    layer_norm_forward(c.x_mid, blk.ln2, c.ln2_hat, c.ln2_rstd, c.ln2_out);
    c.ffn_pre = c.ln2_out * blk.fc1_weight;
    c.ffn_pre.rowwise() += blk.fc1_bias.row(0);
    c.ffn_act = c.ffn_pre.unaryExpr([](Scalar u) { return gelu(u); });
    Mat<Scalar> ffn_out = c.ffn_act * blk.fc2_weight;
    ffn_out.rowwise() += blk.fc2_bias.row(0);
    if (use_dropout) {
      c.drop2 = dropout_mask<Scalar>(total, d, cfg.dropout_rate, rng);
      ffn_out.array() *= c.drop2.array();
    }
    h = c.x_mid + ffn_out;
  }

  layer_norm_forward(h, params.final_ln, fwd.final_hat, fwd.final_rstd, fwd.final_out);
  fwd.logits = fwd.final_out * params.output_weight;
  fwd.logits.rowwise() += params.output_bias.row(0);
  return fwd;
}

template <typename Scalar>
void backward_batch(const ArParamsT<Scalar>& params, const BatchForward<Scalar>& fwd,
                    const Mat<Scalar>& dlogits, ArParamsT<Scalar>& grads) {
  const ArConfig& cfg = params.config;
  const int d = cfg.d_model;
  const int n_heads = cfg.n_heads;
  const int dh = cfg.head_width();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  const std::size_t n_seq = fwd.offsets.size() - 1;
  const Eigen::Index total = fwd.offsets.back();

  grads.output_weight.noalias() += fwd.final_out.transpose() * dlogits;
  grads.output_bias += dlogits.colwise().sum();
  Mat<Scalar> dfinal = dlogits * params.output_weight.transpose();
  Mat<Scalar> dh_res =
      layer_norm_backward(dfinal, fwd.final_hat, fwd.final_rstd, params.final_ln, grads.final_ln);

  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const auto& blk = params.blocks[l];
    auto& g = grads.blocks[l];
    const auto& c = fwd.blocks[l];

    // Feed-forward sublayer.
    Mat<Scalar> dffn = dh_res;
    if (c.drop2.size() > 0) dffn.array() *= c.drop2.array();
    g.fc2_weight.noalias() += c.ffn_act.transpose() * dffn;
    g.fc2_bias += dffn.colwise().sum();
    Mat<Scalar> dact = dffn * blk.fc2_weight.transpose();
    dact.array() *= c.ffn_pre.unaryExpr([](Scalar u) { return gelu_grad(u); }).array();
    g.fc1_weight.noalias() += c.ln2_out.transpose() * dact;
    g.fc1_bias += dact.colwise().sum();
    Mat<Scalar> dln2 = dact * blk.fc1_weight.transpose();
    Mat<Scalar> dx_mid = dh_res + layer_norm_backward(dln2, c.ln2_hat, c.ln2_rstd, blk.ln2, g.ln2);

    // Attention sublayer.
    Mat<Scalar> dattn = dx_mid;
    if (c.drop1.size() > 0) dattn.array() *= c.drop1.array();
    g.attn_out_weight.noalias() += c.attn_cat.transpose() * dattn;
    g.attn_out_bias += dattn.colwise().sum();
    const Mat<Scalar> dcat = dattn * blk.attn_out_weight.transpose();

    Mat<Scalar> dqkv(total, 3 * d);
    for (std::size_t b = 0; b < n_seq; ++b) {
      const Eigen::Index o = fwd.offsets[b];
      const Eigen::Index len = fwd.offsets[b + 1] - o;
      for (int hd = 0; hd < n_heads; ++hd) {
        const auto q = c.qkv.block(o, hd * dh, len, dh);
        const auto k = c.qkv.block(o, d + hd * dh, len, dh);
        const auto v = c.qkv.block(o, 2 * d + hd * dh, len, dh);
        const Mat<Scalar>& p = c.probs[b * n_heads + hd];
        const auto dout = dcat.block(o, hd * dh, len, dh);
        Mat<Scalar> dp = dout * v.transpose();
        Mat<Scalar> ds = p.array() * (dp.colwise() - (dp.array() * p.array()).rowwise().sum().matrix()).array();
        dqkv.block(o, hd * dh, len, dh).noalias() = (ds * k) * scale;
        dqkv.block(o, d + hd * dh, len, dh).noalias() = (ds.transpose() * q) * scale;
        dqkv.block(o, 2 * d + hd * dh, len, dh).noalias() = p.transpose() * dout;
      }
    }
    g.qkv_weight.noalias() += c.ln1_out.transpose() * dqkv;
    g.qkv_bias += dqkv.colwise().sum();
    Mat<Scalar> dln1 = dqkv * blk.qkv_weight.transpose();
    dh_res = dx_mid + layer_norm_backward(dln1, c.ln1_hat, c.ln1_rstd, blk.ln1, g.ln1);
  }

  // Embedding: undo the one-position shift.
  Mat<Scalar> dembedded = Mat<Scalar>::Zero(total, d);
  for (std::size_t b = 0; b < n_seq; ++b) {
    const Eigen::Index o = fwd.offsets[b];
    const Eigen::Index len = fwd.offsets[b + 1] - o;
    grads.start_token.row(0) += dh_res.row(o);
    grads.pos_enc.topRows(len) += dh_res.middleRows(o, len);
    if (len > 1) dembedded.middleRows(o, len - 1) = dh_res.middleRows(o + 1, len - 1);
  }
  grads.input_weight.noalias() += fwd.inputs.transpose() * dembedded;
  grads.input_bias += dembedded.colwise().sum();
}

template <typename Scalar>
Mat<Scalar> apply_head(OutputHead head, const Mat<Scalar>& logits) {
  switch (head) {
    case OutputHead::kSoftmax:
    case OutputHead::kRasterCodebook: {
      Mat<Scalar> out(logits.rows(), logits.cols());
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const Scalar peak = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - peak).exp();
        out.row(r) /= out.row(r).sum();
      }
      return out;
    }
    case OutputHead::kSigmoid:
      return logits.unaryExpr([](Scalar z) { return Scalar(1) / (Scalar(1) + std::exp(-z)); });
    case OutputHead::kLinear: return logits;
  }
  return logits;
}

template <typename Scalar>
Mat<Scalar> forward(const ArParamsT<Scalar>& params, const FeatureSequence& x, bool train_mode,
                    std::uint64_t seed) {
  const Mat<Scalar> input = model_input<Scalar>(params.config, x);
  const auto fwd = forward_batch<Scalar>(params, std::span(&input, 1), train_mode, seed);
  return apply_head(params.config.head, fwd.logits);
}

template <typename Scalar>
Mat<Scalar> forward_raster(const ArParamsT<Scalar>& params, const FeatureSequence& codes) {
  if (params.config.head != OutputHead::kRasterCodebook) {
    throw std::invalid_argument("forward_raster: model head is " +
                                std::string(to_string(params.config.head)));
  }
  const Mat<Scalar> input = model_input<Scalar>(params.config, codes);
  return forward_batch<Scalar>(params, std::span(&input, 1), false, 0).logits;
}

#define SYNCWATCH_INSTANTIATE(S)                                                               \
  template ArParamsT<S> zero_params<S>(const ArConfig&);                                       \
  template ArParamsT<S> ArParamsT<S>::zeros_like() const;                                      \
  template ArParamsT<S> init_params<S>(const ArConfig&, std::uint64_t);                        \
  template Mat<S> model_input<S>(const ArConfig&, const FeatureSequence&);                     \
  template BatchForward<S> forward_batch<S>(const ArParamsT<S>&, std::span<const Mat<S>>, bool, \
                                            std::uint64_t);                                    \
  template void backward_batch<S>(const ArParamsT<S>&, const BatchForward<S>&, const Mat<S>&,  \
                                  ArParamsT<S>&);                                              \
  template Mat<S> apply_head<S>(OutputHead, const Mat<S>&);                                    \
  template Mat<S> forward<S>(const ArParamsT<S>&, const FeatureSequence&, bool, std::uint64_t); \
  template Mat<S> forward_raster<S>(const ArParamsT<S>&, const FeatureSequence&);

SYNCWATCH_INSTANTIATE(float)
SYNCWATCH_INSTANTIATE(double)

#undef SYNCWATCH_INSTANTIATE

}  // namespace syncwatch
