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

#include "syncwatch/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace syncwatch {

std::string_view to_string(FakeMode mode) {
  switch (mode) {
    case FakeMode::kDrift: return "drift";
    case FakeMode::kFlat: return "flat";
    case FakeMode::kInterval: return "interval";
  }
  return "unknown";
}

FakeMode fake_mode_from_string(std::string_view name) {
  for (auto mode : {FakeMode::kDrift, FakeMode::kFlat, FakeMode::kInterval}) {
    if (to_string(mode) == name) return mode;
  }
  throw std::invalid_argument("unknown fake mode '" + std::string(name) + "'");
}

void GenConfig::validate() const {
  window.validate();
  if (frames <= 2 * window.tau) throw std::invalid_argument("GenConfig: frames must exceed 2*tau");
  if (offset_min > offset_max || offset_min < -window.tau || offset_max > window.tau) {
    throw std::invalid_argument("GenConfig: offset range must lie inside [-tau, tau]");
  }
  if (peak_sd < 0 || noise_sd < 0 || drift_step_sd < 0 || flat_noise_sd < 0 ||
      activation_noise_sd < 0) {
    throw std::invalid_argument("GenConfig: standard deviations must be >= 0");
  }
  if (!(ar_rho >= 0.0 && ar_rho < 1.0)) throw std::invalid_argument("GenConfig: ar_rho in [0, 1)");
  if (!(flat_probability >= 0.0 && flat_probability <= 1.0) || flat_span < 1) {
    throw std::invalid_argument("GenConfig: invalid flat-span parameters");
  }
  if (interval_length < 1 || interval_length > frames) {
    throw std::invalid_argument("GenConfig: interval_length must be in [1, frames]");
  }
  if (activation_dim < 1) throw std::invalid_argument("GenConfig: activation_dim must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

struct RealDraw {
  RowMatrix noise;              // T x W, AR(1) in time
  std::vector<double> heights;  // per-frame peak height
  int offset = 0;
};

RealDraw draw_real(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int width = cfg.window.width();
  RealDraw draw;
  draw.offset = std::uniform_int_distribution<int>(cfg.offset_min, cfg.offset_max)(rng);
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  std::normal_distribution<double> height(cfg.peak_mean, cfg.peak_sd);
  const double innovation = std::sqrt(1.0 - cfg.ar_rho * cfg.ar_rho);
  draw.noise.resize(cfg.frames, width);
  draw.heights.resize(cfg.frames);
  for (int t = 0; t < cfg.frames; ++t) {
    for (int j = 0; j < width; ++j) {
      const double e = noise(rng);
      draw.noise(t, j) = t == 0 ? e : cfg.ar_rho * draw.noise(t - 1, j) + innovation * e;
    }
    draw.heights[t] = height(rng);
  }
  return draw;
}

RowMatrix assemble(const RealDraw& draw, const std::vector<int>& offsets, int tau) {
  RowMatrix rows = draw.noise;
  for (int t = 0; t < rows.rows(); ++t) rows(t, offsets[t] + tau) += draw.heights[t];
  return rows;
}

// Clipped random walk of the peak starting from `from`, one step per frame.
std::vector<int> drift_walk(const GenConfig& cfg, std::mt19937_64& rng, int from, int length) {
  std::normal_distribution<double> step(0.0, cfg.drift_step_sd);
  const double tau = cfg.window.tau;
  std::vector<int> out(length);
  double pos = from;
  for (int i = 0; i < length; ++i) {
    pos = std::clamp(pos + step(rng), -tau, tau);
    out[i] = static_cast<int>(std::lround(pos));
  }
  return out;
}

}  // namespace

AffinitySequence gen_real(const GenConfig& cfg, std::uint64_t seed) {
  const RealDraw draw = draw_real(cfg, seed);
  const std::vector<int> offsets(cfg.frames, draw.offset);
  return AffinitySequence(assemble(draw, offsets, cfg.window.tau), cfg.window);
}

FakeSample gen_fake(const GenConfig& cfg, std::uint64_t seed, FakeMode mode) {
  const RealDraw draw = draw_real(cfg, seed);
  std::mt19937_64 rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(mode)));
  const int tau = cfg.window.tau;
  std::vector<int> offsets(cfg.frames, draw.offset);

  switch (mode) {
    case FakeMode::kDrift: {
      offsets = drift_walk(cfg, rng, draw.offset, cfg.frames);
      return {AffinitySequence(assemble(draw, offsets, tau), cfg.window), std::nullopt};
    }
    case FakeMode::kInterval: {
      const int start =
          std::uniform_int_distribution<int>(0, cfg.frames - cfg.interval_length)(rng);
      const auto walk = drift_walk(cfg, rng, draw.offset, cfg.interval_length);
      std::copy(walk.begin(), walk.end(), offsets.begin() + start);
      return {AffinitySequence(assemble(draw, offsets, tau), cfg.window),
              FrameInterval{start, start + cfg.interval_length}};
    }
    case FakeMode::kFlat: {
      RowMatrix rows = assemble(draw, offsets, tau);
      const int n_spans = (cfg.frames + cfg.flat_span - 1) / cfg.flat_span;
      std::bernoulli_distribution flatten(cfg.flat_probability);
      std::vector<bool> flat(n_spans);
      bool any = false;
      for (int s = 0; s < n_spans; ++s) any |= (flat[s] = flatten(rng));
      if (!any) flat[std::uniform_int_distribution<int>(0, n_spans - 1)(rng)] = true;
      std::normal_distribution<double> small(0.0, cfg.flat_noise_sd);
      for (int s = 0; s < n_spans; ++s) {
        if (!flat[s]) continue;
        const int end = std::min(cfg.frames, (s + 1) * cfg.flat_span);
        for (int t = s * cfg.flat_span; t < end; ++t) {
          Eigen::Index keep = 0;
          rows.row(t).maxCoeff(&keep);
          for (Eigen::Index j = 0; j < rows.cols(); ++j) rows(t, j) = small(rng);
          rows(t, keep) = rows.row(t).maxCoeff() + cfg.flat_peak_margin;
        }
      }
      return {AffinitySequence(std::move(rows), cfg.window), std::nullopt};
    }
  }
  throw std::invalid_argument("gen_fake: unknown mode");
}

ActivationSequence activations_from_distribution(const GenConfig& cfg, std::uint64_t noise_seed,
                                                 const DelayDistributionSequence& dist) {
  cfg.validate();
  const int width = dist.config().width();
  std::mt19937_64 map_rng(cfg.projection_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  RowMatrix map(width, cfg.activation_dim);
  for (Eigen::Index i = 0; i < map.size(); ++i) map.data()[i] = unit(map_rng);

  RowMatrix acts = dist.rows() * map;
  if (cfg.activation_noise_sd > 0.0) {
    std::mt19937_64 rng(derive_seed(noise_seed, 17));
    std::normal_distribution<double> noise(0.0, cfg.activation_noise_sd);
    for (Eigen::Index i = 0; i < acts.size(); ++i) acts.data()[i] += noise(rng);
  }
  return ActivationSequence(std::move(acts), ActivationSource::kAudioVisual);
}

ActivationSequence gen_activations(const GenConfig& cfg, std::uint64_t seed, int label,
                                   FakeMode mode) {
  const AffinitySequence aff = label == 0 ? gen_real(cfg, seed) : gen_fake(cfg, seed, mode).affinities;
  return activations_from_distribution(cfg, seed, normalize_affinities(aff));
}

}  // namespace syncwatch
