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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace syncwatch {

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::kCeDiscrete: return "ce_discrete";
    case LossKind::kSoftCe: return "soft_ce";
    case LossKind::kBce: return "bce";
    case LossKind::kMse: return "mse";
    case LossKind::kRasterCe: return "raster_ce";
  }
  return "unknown";
}

LossKind loss_kind_from_string(std::string_view name) {
  for (auto loss : {LossKind::kCeDiscrete, LossKind::kSoftCe, LossKind::kBce, LossKind::kMse,
                    LossKind::kRasterCe}) {
    if (to_string(loss) == name) return loss;
  }
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

bool loss_accepts(LossKind loss, FeatureKind kind) {
  switch (loss) {
    case LossKind::kCeDiscrete: return kind == FeatureKind::kDiscreteDelay;
    case LossKind::kSoftCe:
    case LossKind::kBce: return kind == FeatureKind::kDistribution;
    case LossKind::kMse:
      return kind == FeatureKind::kActivationPca || kind == FeatureKind::kConcatAv;
    case LossKind::kRasterCe: return kind == FeatureKind::kRasterCodes;
  }
  return false;
}

OutputHead head_for(LossKind loss) {
  switch (loss) {
    case LossKind::kCeDiscrete:
    case LossKind::kSoftCe: return OutputHead::kSoftmax;
    case LossKind::kBce: return OutputHead::kSigmoid;
    case LossKind::kMse: return OutputHead::kLinear;
    case LossKind::kRasterCe: return OutputHead::kRasterCodebook;
  }
  return OutputHead::kLinear;
}

void require_pairing(LossKind loss, FeatureKind kind) {
  if (!loss_accepts(loss, kind)) {
    throw std::invalid_argument("loss " + std::string(to_string(loss)) +
                                " cannot be used with feature set " +
                                std::string(to_string(kind)));
  }
}

void TrainConfig::validate() const {
  if (!(lr_max > 0.0)) throw std::invalid_argument("TrainConfig: lr_max must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (total_steps < 0) throw std::invalid_argument("TrainConfig: total_steps must be >= 0");
  if (total_steps > 0 && (warmup_steps <= 0 || warmup_steps >= total_steps)) {
    throw std::invalid_argument("TrainConfig: need 0 < warmup_steps < total_steps");
  }
  if (weight_decay < 0.0 || grad_clip <= 0.0) {
    throw std::invalid_argument("TrainConfig: weight_decay >= 0 and grad_clip > 0 required");
  }
}

namespace {

const double kLogEps = std::log(kProbEps);

void require_same_shape(const RowMatrix& a, const RowMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
  if (a.rows() < 1) throw std::invalid_argument(std::string(what) + ": empty input");
}

double clamped_log(double p) { return std::log(std::max(p, kProbEps)); }

template <typename Scalar>
Scalar softplus(Scalar a) {
  return std::max(a, Scalar(0)) + std::log1p(std::exp(-std::abs(a)));
}

}  // namespace

double loss_ce_discrete(const RowMatrix& pred, const DiscreteDelaySequence& target) {
  if (pred.rows() != target.frames() || pred.cols() != target.config().width()) {
    throw std::invalid_argument("loss_ce_discrete: shape mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < target.frames(); ++i) {
    total -= clamped_log(pred(i, target.delays()[i] + target.config().tau));
  }
  return total / target.frames();
}

double loss_soft_ce(const RowMatrix& pred, const RowMatrix& target) {
  require_same_shape(pred, target, "loss_soft_ce");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      total -= target(i, j) * clamped_log(pred(i, j));
    }
  }
  return total / static_cast<double>(pred.rows());
}

double loss_bce(const RowMatrix& pred, const RowMatrix& target) {
  require_same_shape(pred, target, "loss_bce");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const double x = target(i, j);
      const double p = pred(i, j);
      total -= x * clamped_log(p) + (1.0 - x) * clamped_log(1.0 - p);
    }
  }
  return total / static_cast<double>(pred.rows());
}

double loss_mse(const RowMatrix& pred, const RowMatrix& target) {
  require_same_shape(pred, target, "loss_mse");
  return (pred - target).squaredNorm() / static_cast<double>(pred.rows());
}

double loss_raster(const RowMatrix& logits, const RowMatrix& codes) {
  if (codes.rows() < 1 || logits.rows() != codes.size()) {
    throw std::invalid_argument("loss_raster: expected one logit row per grid cell");
  }
  const Eigen::Index k = logits.cols();
  double total = 0.0;
  for (Eigen::Index c = 0; c < codes.size(); ++c) {
    const double code = codes.data()[c];
    if (code < 0 || code >= static_cast<double>(k) || code != std::floor(code)) {
      throw std::invalid_argument("loss_raster: code out of range at cell " + std::to_string(c));
    }
    const double peak = logits.row(c).maxCoeff();
    const double lse = peak + std::log((logits.row(c).array() - peak).exp().sum());
    total -= std::max(logits(c, static_cast<Eigen::Index>(code)) - lse, std::log(kProbEps));
  }
  return total / static_cast<double>(codes.size());
}

template <typename Scalar>
Vec<double> frame_losses(LossKind loss, const Mat<Scalar>& logits, const Mat<Scalar>& target,
                         Mat<Scalar>* dlogits, Scalar grad_scale) {
  const Scalar log_eps = Scalar(kLogEps);
  if (dlogits != nullptr) dlogits->setZero(logits.rows(), logits.cols());

  if (loss == LossKind::kRasterCe) {
    const Eigen::Index cells_per_frame = target.cols();
    if (logits.rows() != target.size()) {
      throw std::invalid_argument("raster loss: expected one logit row per grid cell");
    }
    Vec<double> out = Vec<double>::Zero(target.rows());
    const Eigen::Index k = logits.cols();
    const Scalar cell_scale = grad_scale / Scalar(cells_per_frame);
    for (Eigen::Index c = 0; c < logits.rows(); ++c) {
      const Scalar code_value = target.data()[c];
      if (code_value < 0 || code_value >= Scalar(k)) {
        throw std::invalid_argument("raster loss: code out of range");
      }
      const auto code = static_cast<Eigen::Index>(code_value);
      const Scalar peak = logits.row(c).maxCoeff();
      const Scalar lse = peak + std::log((logits.row(c).array() - peak).exp().sum());
      const Scalar logp = logits(c, code) - lse;
      const bool open = logp > log_eps;
      out(c / cells_per_frame) -= static_cast<double>(open ? logp : log_eps);
      if (dlogits != nullptr && open) {
        dlogits->row(c) = (logits.row(c).array() - lse).exp() * cell_scale;
        (*dlogits)(c, code) -= cell_scale;
      }
    }
    return out / static_cast<double>(cells_per_frame);
  }

  if (logits.rows() != target.rows() || logits.cols() != target.cols()) {
    throw std::invalid_argument("loss: prediction/target shape mismatch");
  }
  Vec<double> out = Vec<double>::Zero(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const auto x = target.row(i);
    switch (loss) {
      case LossKind::kCeDiscrete:
      case LossKind::kSoftCe: {
        const Scalar peak = z.maxCoeff();
        const Scalar lse = peak + std::log((z.array() - peak).exp().sum());
        double value = 0.0;
        Scalar open_mass = 0;
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const Scalar logp = z(j) - lse;
          const bool open = logp > log_eps;
          value -= static_cast<double>(x(j) * (open ? logp : log_eps));
          if (open) open_mass += x(j);
        }
        out(i) = value;
        if (dlogits != nullptr) {
          for (Eigen::Index j = 0; j < z.size(); ++j) {
            const Scalar logp = z(j) - lse;
            const Scalar p = std::exp(logp);
            const Scalar own = logp > log_eps ? x(j) : Scalar(0);
            (*dlogits)(i, j) = grad_scale * (p * open_mass - own);
          }
        }
        break;
      }
      case LossKind::kBce: {
        double value = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const Scalar log_pos = -softplus(-z(j));
          const Scalar log_neg = -softplus(z(j));
          const bool open_pos = log_pos > log_eps;
          const bool open_neg = log_neg > log_eps;
          value -= static_cast<double>(x(j) * (open_pos ? log_pos : log_eps) +
                                       (Scalar(1) - x(j)) * (open_neg ? log_neg : log_eps));
          if (dlogits != nullptr) {
            const Scalar sig = std::exp(log_pos);
            const Scalar one_minus = std::exp(log_neg);
            Scalar g = 0;
            if (open_pos) g -= x(j) * one_minus;
            if (open_neg) g += (Scalar(1) - x(j)) * sig;
            (*dlogits)(i, j) = grad_scale * g;
          }
        }
        out(i) = value;
        break;
      }
      case LossKind::kMse: {
        const auto diff = (z - x).eval();
        out(i) = static_cast<double>(diff.squaredNorm());
        if (dlogits != nullptr) dlogits->row(i) = Scalar(2) * grad_scale * diff;
        break;
      }
      case LossKind::kRasterCe: break;
    }
  }
  return out;
}

double lr_at(int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(cfg.total_steps) + "]");
  }
  if (step < cfg.warmup_steps) {
    return cfg.lr_max * static_cast<double>(step + 1) / cfg.warmup_steps;
  }
  const double phase = static_cast<double>(step - cfg.warmup_steps) /
                       static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

namespace {

template <typename Scalar>
Mat<Scalar> loss_target(const FeatureSequence& x) {
  return x.data().template cast<Scalar>();
}

}  // namespace

template <typename Scalar>
double batch_loss(const ArParamsT<Scalar>& params, LossKind loss,
                  std::span<const FeatureSequence> batch, bool train_mode, std::uint64_t seed,
                  ArParamsT<Scalar>* grads) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (head_for(loss) != params.config.head) {
    throw std::invalid_argument("loss " + std::string(to_string(loss)) +
                                " does not match model head " +
                                std::string(to_string(params.config.head)));
  }
  std::vector<Mat<Scalar>> inputs;
  inputs.reserve(batch.size());
  for (const auto& x : batch) {
    require_pairing(loss, x.kind());
    inputs.push_back(model_input<Scalar>(params.config, x));
  }
  const auto fwd = forward_batch<Scalar>(params, inputs, train_mode, seed);

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  Mat<Scalar> dlogits;
  if (grads != nullptr) dlogits.resize(fwd.logits.rows(), fwd.logits.cols());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Eigen::Index o = fwd.offsets[b];
    const Eigen::Index len = fwd.offsets[b + 1] - o;
    const Mat<Scalar> logits = fwd.logits.middleRows(o, len);
    const Mat<Scalar> target = loss_target<Scalar>(batch[b]);
    const int frames = batch[b].frames();
    Mat<Scalar> dl;
    const Vec<double> per_frame = frame_losses<Scalar>(
        loss, logits, target, grads != nullptr ? &dl : nullptr,
        static_cast<Scalar>(inv_batch / frames));
    total += per_frame.sum() / frames * inv_batch;
    if (grads != nullptr) dlogits.middleRows(o, len) = dl;
  }
  if (grads != nullptr) backward_batch<Scalar>(params, fwd, dlogits, *grads);
  return total;
}

template <typename Scalar>
TrainResultT<Scalar> train_model(const ArConfig& model_cfg, const TrainConfig& train_cfg,
                                 std::span<const FeatureSequence> data) {
  model_cfg.validate();
  train_cfg.validate();
  if (head_for(train_cfg.loss) != model_cfg.head) {
    throw std::invalid_argument("train: loss " + std::string(to_string(train_cfg.loss)) +
                                " needs head " + std::string(to_string(head_for(train_cfg.loss))));
  }
  TrainResultT<Scalar> result{init_params<Scalar>(model_cfg, train_cfg.seed), {}, {}};
  if (train_cfg.total_steps == 0) return result;
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& x : data) require_pairing(train_cfg.loss, x.kind());

  ArParamsT<Scalar>& params = result.params;
  ArParamsT<Scalar> m = params.zeros_like();
  ArParamsT<Scalar> v = params.zeros_like();

  std::mt19937_64 shuffle_rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t cursor = 0;

  std::vector<FeatureSequence> batch;
  const double b1 = train_cfg.adam_beta1;
  const double b2 = train_cfg.adam_beta2;
  for (int step = 0; step < train_cfg.total_steps; ++step) {
    batch.clear();
    for (int i = 0; i < train_cfg.batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }

    ArParamsT<Scalar> grads = params.zeros_like();
    const std::uint64_t dropout_seed = train_cfg.seed * 1000003ULL + static_cast<std::uint64_t>(step);
    const double loss = batch_loss<Scalar>(params, train_cfg.loss, batch, true, dropout_seed, &grads);

    double sq = 0.0;
    grads.visit([&](const std::string&, const Mat<Scalar>& g, TensorRole) {
      sq += g.template cast<double>().squaredNorm();
    });
    const double norm = std::sqrt(sq);
    const Scalar clip = norm > train_cfg.grad_clip ? Scalar(train_cfg.grad_clip / norm) : Scalar(1);

    const double lr = lr_at(step, train_cfg);
    const double correction1 = 1.0 - std::pow(b1, step + 1);
    const double correction2 = 1.0 - std::pow(b2, step + 1);
    const Scalar step_size = Scalar(lr / correction1);
    const Scalar inv_sqrt_c2 = Scalar(1.0 / std::sqrt(correction2));
    const Scalar decay = Scalar(lr * train_cfg.weight_decay);

    std::vector<Mat<Scalar>*> gs, ms, vs;
    grads.visit([&](const std::string&, Mat<Scalar>& t, TensorRole) { gs.push_back(&t); });
    m.visit([&](const std::string&, Mat<Scalar>& t, TensorRole) { ms.push_back(&t); });
    v.visit([&](const std::string&, Mat<Scalar>& t, TensorRole) { vs.push_back(&t); });
    std::size_t idx = 0;
    params.visit([&](const std::string&, Mat<Scalar>& p, TensorRole role) {
      auto g = (gs[idx]->array() * clip).eval();
      auto& mt = *ms[idx];
      auto& vt = *vs[idx];
      mt.array() = Scalar(b1) * mt.array() + Scalar(1 - b1) * g;
      vt.array() = Scalar(b2) * vt.array() + Scalar(1 - b2) * g.square();
      if (role == TensorRole::kWeight && decay > Scalar(0)) p.array() -= decay * p.array();
      p.array() -= step_size * mt.array() /
                   (vt.array().sqrt() * inv_sqrt_c2 + Scalar(train_cfg.adam_eps));
      ++idx;
    });

    result.loss_trace.push_back(loss);
    result.lr_trace.push_back(lr);
  }
  return result;
}

TrainResult train(const ArConfig& model_cfg, const TrainConfig& train_cfg,
                  std::span<const FeatureSequence> data) {
  return train_model<float>(model_cfg, train_cfg, data);
}

namespace {

// Random feature sequences appropriate for a loss on a tiny model.
std::vector<FeatureSequence> grad_check_data(const ArConfig& cfg, LossKind loss,
                                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int width = cfg.d_in;
  DelayWindowConfig window;
  if (loss != LossKind::kMse) {
    if (width % 2 == 0 || width < 3) {
      throw std::invalid_argument("grad_check: delay features need an odd width >= 3");
    }
    window.tau = (width - 1) / 2;
  }
  std::vector<FeatureSequence> out;
  for (int len : {cfg.n_max, std::max(1, cfg.n_max - 1)}) {
    RowMatrix data(len, width);
    switch (loss) {
      case LossKind::kSoftCe:
      case LossKind::kBce: {
        for (int i = 0; i < len; ++i) {
          for (int j = 0; j < width; ++j) data(i, j) = std::exp(normal(rng));
          data.row(i) /= data.row(i).sum();
        }
        out.emplace_back(FeatureKind::kDistribution, data, window);
        break;
      }
      case LossKind::kCeDiscrete: {
        data.setZero();
        std::uniform_int_distribution<int> pick(0, width - 1);
        for (int i = 0; i < len; ++i) data(i, pick(rng)) = 1.0;
        out.emplace_back(FeatureKind::kDiscreteDelay, data, window);
        break;
      }
      case LossKind::kMse: {
        for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = normal(rng);
        out.emplace_back(FeatureKind::kActivationPca, data, window);
        break;
      }
      case LossKind::kRasterCe: {
        std::uniform_int_distribution<int> pick(0, cfg.raster_k - 1);
        for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = pick(rng);
        out.emplace_back(FeatureKind::kRasterCodes, data, window);
        break;
      }
    }
  }
  return out;
}

}  // namespace

GradCheckResult grad_check(const ArConfig& tiny_cfg, LossKind loss, std::uint64_t seed) {
  ArConfig cfg = tiny_cfg;
  cfg.head = head_for(loss);
  cfg.d_out = loss == LossKind::kRasterCe ? cfg.raster_k : cfg.d_in;
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Larger-than-init magnitudes so every path carries signal.
  ArParamsT<double> params = zero_params<double>(cfg);
  params.visit([&](const std::string&, Mat<double>& t, TensorRole role) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      switch (role) {
        case TensorRole::kWeight: t.data()[i] = 0.3 * normal(rng); break;
        case TensorRole::kBias: t.data()[i] = 0.1 * normal(rng); break;
        case TensorRole::kNormGain: t.data()[i] = 1.0 + 0.1 * normal(rng); break;
      }
    }
  });
  const auto data = grad_check_data(cfg, loss, rng);

  ArParamsT<double> grads = params.zeros_like();
  batch_loss<double>(params, loss, data, false, 0, &grads);

  std::vector<Mat<double>*> analytic;
  grads.visit([&](const std::string&, Mat<double>& t, TensorRole) { analytic.push_back(&t); });

  constexpr double kStep = 1e-5;
  GradCheckResult result;
  std::size_t idx = 0;
  params.visit([&](const std::string& name, Mat<double>& t, TensorRole) {
    Mat<double> numeric(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + kStep;
      const double up = batch_loss<double>(params, loss, data, false, 0, nullptr);
      t.data()[i] = saved - kStep;
      const double down = batch_loss<double>(params, loss, data, false, 0, nullptr);
      t.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2.0 * kStep);
    }
    const Mat<double>& a = *analytic[idx++];
    const double denom = std::max({a.norm(), numeric.norm(), 1e-12});
    const double rel = (a - numeric).norm() / denom;
    if (result.worst_tensor.empty() || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_tensor = name;
    }
  });
  return result;
}

double NaiveBayesModel::probability(int offset) const {
  if (offset < -config.tau || offset > config.tau) {
    throw std::out_of_range("naive bayes: offset outside the window");
  }
  return static_cast<double>(counts[offset + config.tau] + 1) /
         static_cast<double>(total + config.width());
}

NaiveBayesModel naive_bayes_fit(std::span<const DiscreteDelaySequence> train) {
  if (train.empty()) throw std::invalid_argument("naive_bayes_fit: empty training set");
  NaiveBayesModel model;
  model.config = train.front().config();
  model.counts.assign(model.config.width(), 0);
  for (const auto& seq : train) {
    if (!(seq.config() == model.config)) {
      throw std::invalid_argument("naive_bayes_fit: mixed window configurations");
    }
    for (int d : seq.delays()) ++model.counts[d + model.config.tau];
    model.total += seq.frames();
  }
  return model;
}

ArConfig model_config_for(LossKind loss, FeatureKind kind, int feature_dim,
                          const DelayWindowConfig& window, int raster_k) {
  require_pairing(loss, kind);
  ArConfig cfg;
  cfg.head = head_for(loss);
  if (loss == LossKind::kRasterCe) {
    cfg.d_in = window.width();
    cfg.d_out = raster_k;
    cfg.raster_k = raster_k;
  } else {
    cfg.d_in = feature_dim;
    cfg.d_out = feature_dim;
  }
  cfg.validate();
  return cfg;
}

#define SYNCWATCH_INSTANTIATE(S)                                                             \
  template Vec<double> frame_losses<S>(LossKind, const Mat<S>&, const Mat<S>&, Mat<S>*, S);  \
  template double batch_loss<S>(const ArParamsT<S>&, LossKind, std::span<const FeatureSequence>, \
                                bool, std::uint64_t, ArParamsT<S>*);                         \
  template TrainResultT<S> train_model<S>(const ArConfig&, const TrainConfig&,               \
                                          std::span<const FeatureSequence>);

SYNCWATCH_INSTANTIATE(float)
SYNCWATCH_INSTANTIATE(double)

#undef SYNCWATCH_INSTANTIATE

}  // namespace syncwatch
