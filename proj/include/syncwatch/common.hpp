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

#ifndef SYNCWATCH_COMMON_HPP_
#define SYNCWATCH_COMMON_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace syncwatch {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrix = Mat<double>;
using Vector = Vec<double>;

// Floor applied to every probability before it enters a logarithm.
inline constexpr double kProbEps = 1e-12;

// Raised for malformed or numerically invalid data (as opposed to caller
// contract violations, which throw std::invalid_argument).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DelayWindowConfig {
  int tau = 15;
  int fps = 25;

  int width() const { return 2 * tau + 1; }
  int center() const { return tau; }
  void validate() const;

  bool operator==(const DelayWindowConfig&) const = default;
};

}  // namespace syncwatch

#endif  // SYNCWATCH_COMMON_HPP_
