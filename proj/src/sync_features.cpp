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

#include "syncwatch/sync_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace syncwatch {

void DelayWindowConfig::validate() const {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (fps <= 0) throw std::invalid_argument("fps must be > 0");
}

namespace {

void require_finite(const RowMatrix& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        std::ostringstream msg;
        msg << what << ": non-finite value at row " << r << ", column " << c;
        throw DataError(msg.str());
      }
    }
  }
}

void require_window_width(const RowMatrix& m, const DelayWindowConfig& config,
                          const char* what) {
  config.validate();
  if (m.rows() < 1) throw std::invalid_argument(std::string(what) + ": empty sequence");
  if (m.cols() != config.width()) {
    std::ostringstream msg;
    msg << what << ": expected " << config.width() << " columns for tau=" << config.tau
        << ", got " << m.cols();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

AffinitySequence::AffinitySequence(RowMatrix values, DelayWindowConfig config)
    : values_(std::move(values)), config_(config) {
  require_window_width(values_, config_, "affinity sequence");
  require_finite(values_, "affinity sequence");
}

DelayDistributionSequence::DelayDistributionSequence(RowMatrix rows, DelayWindowConfig config)
    : rows_(std::move(rows)), config_(config) {
  require_window_width(rows_, config_, "delay distribution");
  require_finite(rows_, "delay distribution");
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    if (rows_.row(r).minCoeff() < 0.0 || rows_.row(r).maxCoeff() > 1.0) {
      throw DataError("delay distribution: row " + std::to_string(r) +
                      " has entries outside [0, 1]");
    }
    const double sum = rows_.row(r).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "delay distribution: row " << r << " sums to " << sum;
      throw DataError(msg.str());
    }
  }
}

DiscreteDelaySequence::DiscreteDelaySequence(std::vector<int> delays, DelayWindowConfig config)
    : delays_(std::move(delays)), config_(config) {
  config_.validate();
  if (delays_.empty()) throw std::invalid_argument("discrete delays: empty sequence");
  for (std::size_t i = 0; i < delays_.size(); ++i) {
    if (delays_[i] < -config_.tau || delays_[i] > config_.tau) {
      throw DataError("discrete delays: frame " + std::to_string(i) + " has offset " +
                      std::to_string(delays_[i]) + " outside [-tau, tau]");
    }
  }
}

ActivationSequence::ActivationSequence(RowMatrix values, ActivationSource source)
    : values_(std::move(values)), source_(source) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw std::invalid_argument("activation sequence must be non-empty");
  }
  require_finite(values_, "activation sequence");
}

int Codebook::nearest(double value) const {
  const auto it = std::lower_bound(centers.begin(), centers.end(), value);
  if (it == centers.begin()) return 0;
  if (it == centers.end()) return size() - 1;
  const int hi = static_cast<int>(it - centers.begin());
  const int lo = hi - 1;
  return std::abs(value - centers[lo]) <= std::abs(centers[hi] - value) ? lo : hi;
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kDiscreteDelay: return "discrete_delay";
    case FeatureKind::kDistribution: return "distribution";
    case FeatureKind::kActivationPca: return "activation_pca";
    case FeatureKind::kConcatAv: return "concat_av";
    case FeatureKind::kRasterCodes: return "raster_codes";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  for (auto kind : {FeatureKind::kDiscreteDelay, FeatureKind::kDistribution,
                    FeatureKind::kActivationPca, FeatureKind::kConcatAv,
                    FeatureKind::kRasterCodes}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown feature set '" + std::string(name) + "'");
}

FeatureSequence::FeatureSequence(FeatureKind kind, RowMatrix data, DelayWindowConfig config)
    : kind_(kind), data_(std::move(data)), config_(config) {
  config_.validate();
  if (data_.rows() < 1) throw std::invalid_argument("feature sequence: empty");
  const int width = config_.width();
  switch (kind_) {
    case FeatureKind::kDistribution:
    case FeatureKind::kDiscreteDelay:
    case FeatureKind::kRasterCodes:
      if (data_.cols() != width) {
        throw std::invalid_argument("feature sequence: " + std::string(to_string(kind_)) +
                                    " needs width " + std::to_string(width));
      }
      break;
    case FeatureKind::kConcatAv:
      if (data_.cols() <= width) {
        throw std::invalid_argument("feature sequence: concat_av narrower than the window");
      }
      break;
    case FeatureKind::kActivationPca:
      break;
  }
  require_finite(data_, "feature sequence");
}

FeatureSequence FeatureSequence::slice(int start, int length) const {
  if (start < 0 || length < 1 || start + length > frames()) {
    throw std::out_of_range("feature slice out of range");
  }
  return FeatureSequence(kind_, data_.middleRows(start, length), config_);
}

DelayDistributionSequence normalize_affinities(const AffinitySequence& aff) {
  const RowMatrix& a = aff.values();
  RowMatrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double peak = a.row(r).maxCoeff();
    out.row(r) = (a.row(r).array() - peak).exp();
    out.row(r) /= out.row(r).sum();
  }
  return DelayDistributionSequence(std::move(out), aff.config());
}

InfoNceResult sync_infonce_loss(const DelayDistributionSequence& dist) {
  InfoNceResult result;
  const int center = dist.config().center();
  double total = 0.0;
  for (int i = 0; i < dist.frames(); ++i) {
    double p = dist.rows()(i, center);
    if (p < kProbEps) {
      p = kProbEps;
      ++result.clamped_frames;
    }
    total -= std::log(p);
  }
  result.loss = total / dist.frames();
  return result;
}

DiscreteDelaySequence argmax_delays(const DelayDistributionSequence& dist) {
  std::vector<int> delays(dist.frames());
  for (int i = 0; i < dist.frames(); ++i) {
    Eigen::Index col = 0;
    dist.rows().row(i).maxCoeff(&col);  // first maximal index
    delays[i] = static_cast<int>(col) - dist.config().tau;
  }
  return DiscreteDelaySequence(std::move(delays), dist.config());
}

PcaModel pca_fit(std::span<const ActivationSequence> acts, int dim) {
  if (acts.empty()) throw std::invalid_argument("pca_fit: no activation sequences");
  const int d_act = acts.front().dim();
  Eigen::Index n = 0;
  for (const auto& a : acts) {
    if (a.dim() != d_act) throw std::invalid_argument("pca_fit: inconsistent activation width");
    n += a.frames();
  }
  if (dim < 1 || dim > d_act) {
    throw std::invalid_argument("pca_fit: D must be in [1, " + std::to_string(d_act) + "]");
  }
  if (n < dim) {
    throw std::invalid_argument("pca_fit: need at least D frames, got " + std::to_string(n));
  }

  Vector mean = Vector::Zero(d_act);
  for (const auto& a : acts) mean += a.values().colwise().sum().transpose();
  mean /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d_act, d_act);
  for (const auto& a : acts) {
    const RowMatrix centered = a.values().rowwise() - mean.transpose();
    cov.noalias() += centered.transpose() * centered;
  }
  cov /= static_cast<double>(std::max<Eigen::Index>(n - 1, 1));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("pca_fit: eigen-decomposition failed");
  // Eigen returns ascending order.
  const Vector& evals = solver.eigenvalues();
  const double largest = std::max(evals(d_act - 1), 0.0);
  int positive = 0;
  for (int i = 0; i < d_act; ++i) {
    if (evals(i) > 1e-10 * largest && evals(i) > 0.0) ++positive;
  }
  if (positive < dim) {
    throw DataError("pca_fit: covariance has only " + std::to_string(positive) +
                    " positive eigenvalues; at most D=" + std::to_string(positive) +
                    " is achievable");
  }

  PcaModel model;
  model.mean = std::move(mean);
  model.components.resize(dim, d_act);
  model.eigenvalues.resize(dim);
  for (int k = 0; k < dim; ++k) {
    const int src = d_act - 1 - k;
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(k) = v.transpose();
    model.eigenvalues(k) = evals(src);
  }
  return model;
}

FeatureSequence pca_project(const PcaModel& model, const ActivationSequence& acts,
                            const DelayWindowConfig& config) {
  if (acts.dim() != model.input_dim()) {
    throw std::invalid_argument("pca_project: activation width " + std::to_string(acts.dim()) +
                                " does not match model width " +
                                std::to_string(model.input_dim()));
  }
  RowMatrix centered = acts.values().rowwise() - model.mean.transpose();
  RowMatrix projected = centered * model.components.transpose();
  return FeatureSequence(FeatureKind::kActivationPca, std::move(projected), config);
}

namespace {

struct Segments {
  std::vector<std::size_t> ends;  // exclusive end index per center
};

// Sorted data and sorted centers: each center owns a contiguous run.
Segments assign_sorted(const std::vector<double>& xs, const std::vector<double>& centers) {
  Segments seg;
  seg.ends.resize(centers.size());
  std::size_t begin = 0;
  for (std::size_t k = 0; k + 1 < centers.size(); ++k) {
    const double lo = centers[k];
    const double hi = centers[k + 1];
    auto it = std::partition_point(xs.begin() + static_cast<std::ptrdiff_t>(begin), xs.end(),
                                   [&](double x) { return std::abs(x - lo) <= std::abs(hi - x); });
    begin = static_cast<std::size_t>(it - xs.begin());
    seg.ends[k] = begin;
  }
  seg.ends.back() = xs.size();
  return seg;
}

}  // namespace

Codebook kmeans_fit(std::span<const double> values, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kmeans_fit: K must be >= 2");
  std::vector<double> xs(values.begin(), values.end());
  for (double x : xs) {
    if (!std::isfinite(x)) throw DataError("kmeans_fit: non-finite value");
  }
  std::sort(xs.begin(), xs.end());
  std::size_t n_distinct = xs.empty() ? 0 : 1;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] != xs[i - 1]) ++n_distinct;
  }
  if (n_distinct < static_cast<std::size_t>(k)) {
    throw DataError("kmeans_fit: need at least " + std::to_string(k) +
                    " distinct values, got " + std::to_string(n_distinct));
  }

  const std::size_t n = xs.size();
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + xs[i];
    prefix_sq[i + 1] = prefix_sq[i] + xs[i] * xs[i];
  }

  constexpr int kRestarts = 50;
  constexpr int kMaxIterations = 500;
  std::mt19937_64 rng(seed);
  std::vector<double> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<double> dist2(n);

  for (int restart = 0; restart < kRestarts; ++restart) {
    // k-means++ seeding.
    std::vector<double> centers;
    centers.push_back(xs[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    for (std::size_t i = 0; i < n; ++i) dist2[i] = (xs[i] - centers[0]) * (xs[i] - centers[0]);
    while (static_cast<int>(centers.size()) < k) {
      std::discrete_distribution<std::size_t> pick(dist2.begin(), dist2.end());
      const double c = xs[pick(rng)];
      centers.push_back(c);
      for (std::size_t i = 0; i < n; ++i) {
        dist2[i] = std::min(dist2[i], (xs[i] - c) * (xs[i] - c));
      }
    }
    std::sort(centers.begin(), centers.end());

    // Lloyd iterations until the assignment stops changing.
    Segments seg = assign_sorted(xs, centers);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      std::size_t begin = 0;
      for (int c = 0; c < k; ++c) {
        const std::size_t end = seg.ends[c];
        if (end > begin) {
          centers[c] = (prefix[end] - prefix[begin]) / static_cast<double>(end - begin);
        }
        begin = end;
      }
      std::sort(centers.begin(), centers.end());
      Segments next = assign_sorted(xs, centers);
      const bool stable = next.ends == seg.ends;
      seg = std::move(next);
      if (stable) break;
    }

    bool strictly_increasing = true;
    for (int c = 1; c < k; ++c) strictly_increasing &= centers[c] > centers[c - 1];
    if (!strictly_increasing) continue;

    double inertia = 0.0;
    std::size_t begin = 0;
    for (int c = 0; c < k; ++c) {
      const std::size_t end = seg.ends[c];
      const double cnt = static_cast<double>(end - begin);
      const double s1 = prefix[end] - prefix[begin];
      const double s2 = prefix_sq[end] - prefix_sq[begin];
      inertia += std::max(s2 - 2.0 * centers[c] * s1 + cnt * centers[c] * centers[c], 0.0);
      begin = end;
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = centers;
    }
  }
  if (best.empty()) throw DataError("kmeans_fit: every restart collapsed two centers");
  return Codebook{std::move(best)};
}

FeatureSequence quantize_grid(const DelayDistributionSequence& dist, const Codebook& cb) {
  if (cb.size() < 2) throw std::invalid_argument("quantize_grid: codebook needs K >= 2");
  RowMatrix codes(dist.frames(), dist.config().width());
  for (Eigen::Index r = 0; r < codes.rows(); ++r) {
    for (Eigen::Index c = 0; c < codes.cols(); ++c) {
      codes(r, c) = cb.nearest(dist.rows()(r, c));
    }
  }
  return FeatureSequence(FeatureKind::kRasterCodes, std::move(codes), dist.config());
}

FeatureSequence concat_features(const DelayDistributionSequence& dist,
                                const FeatureSequence& pca) {
  if (pca.kind() != FeatureKind::kActivationPca) {
    throw std::invalid_argument("concat_features: second operand must be activation_pca");
  }
  if (pca.frames() != dist.frames()) {
    throw std::invalid_argument("concat_features: length mismatch (" +
                                std::to_string(dist.frames()) + " vs " +
                                std::to_string(pca.frames()) + ")");
  }
  RowMatrix out(dist.frames(), dist.rows().cols() + pca.dim());
  out << dist.rows(), pca.data();
  return FeatureSequence(FeatureKind::kConcatAv, std::move(out), dist.config());
}

FeatureSequence to_feature(const DelayDistributionSequence& dist) {
  return FeatureSequence(FeatureKind::kDistribution, dist.rows(), dist.config());
}

FeatureSequence to_feature(const DiscreteDelaySequence& delays) {
  RowMatrix onehot = RowMatrix::Zero(delays.frames(), delays.config().width());
  for (int i = 0; i < delays.frames(); ++i) {
    onehot(i, delays.delays()[i] + delays.config().tau) = 1.0;
  }
  return FeatureSequence(FeatureKind::kDiscreteDelay, std::move(onehot), delays.config());
}

}  // namespace syncwatch
