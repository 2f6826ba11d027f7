// Copyright 2026 The Cleanstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLEANSTREAM_MASK_HPP_
#define CLEANSTREAM_MASK_HPP_

#include <cmath>
#include <utility>

#include "cleanstream/error.hpp"
#include "cleanstream/features.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

// Time-frequency mask indexed (frame, mel bin), every value in [0, 1].
template <typename Scalar>
class Mask {
 public:
  explicit Mask(Matrix<Scalar> values) : values_(std::move(values)) {
    if (!values_.allFinite() || (values_.array() < Scalar(0)).any() ||
        (values_.array() > Scalar(1)).any()) {
      throw Error(Errc::kOutOfRange, "mask values must lie in [0, 1]");
    }
  }

  const Matrix<Scalar>& values() const { return values_; }
  int num_frames() const { return static_cast<int>(values_.rows()); }
  int num_mel() const { return static_cast<int>(values_.cols()); }

 private:
  Matrix<Scalar> values_;
};

// Inference-time mask shaping: multiplier = max(mask, beta)^alpha.
struct MaskPostConfig {
  double alpha = 0.5;
  double beta = 0.01;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::kInvalidConfig, "alpha must lie in (0, 1]");
    if (!(beta >= 0.0 && beta < 1.0)) throw Error(Errc::kInvalidConfig, "beta must lie in [0, 1)");
  }
};

template <typename Scalar>
Scalar mask_multiplier(Scalar mask, const MaskPostConfig& cfg) {
  return std::pow(std::max(mask, Scalar(cfg.beta)), Scalar(cfg.alpha));
}

namespace detail {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::kShapeMismatch, std::string(what) + ": shape mismatch");
  }
}

}  // namespace detail

inline constexpr double kIrmEpsilon = 1e-12;

// M = X / (X + N) on linear mel magnitudes; 0 where X + N < 1e-12.
template <typename Scalar>
Mask<Scalar> ideal_ratio_mask(const MelSpectrogram<Scalar>& speech,
                              const MelSpectrogram<Scalar>& noise) {
  if (speech.is_log() || noise.is_log()) {
    throw Error(Errc::kInvalidConfig, "ideal ratio mask needs linear mel energies");
  }
  detail::require_same_shape(speech.values(), noise.values(), "ideal_ratio_mask");
  const auto& x = speech.values().array();
  const auto total = (x + noise.values().array()).eval();
  Matrix<Scalar> m =
      (total < Scalar(kIrmEpsilon)).select(Scalar(0), x / total.max(Scalar(kIrmEpsilon))).matrix();
  // X / (X + N) can round a hair above 1 when N is denormal.
  m = m.cwiseMin(Scalar(1));
  return Mask<Scalar>(std::move(m));
}

// X_hat = Y * max(M, beta)^alpha, elementwise on linear mel.
template <typename Scalar>
MelSpectrogram<Scalar> apply_mask(const MelSpectrogram<Scalar>& noisy, const Mask<Scalar>& mask,
                                  const MaskPostConfig& cfg = {}) {
  cfg.validate();
  if (noisy.is_log()) throw Error(Errc::kInvalidConfig, "masking applies to linear mel energies");
  detail::require_same_shape(noisy.values(), mask.values(), "apply_mask");
  Matrix<Scalar> gain =
      mask.values().array().max(Scalar(cfg.beta)).pow(Scalar(cfg.alpha)).matrix();
  return MelSpectrogram<Scalar>(noisy.values().cwiseProduct(gain), false);
}

// L = sum_{n,f} |M - M_hat| + (M - M_hat)^2
template <typename Scalar>
Scalar spectral_loss(const Mask<Scalar>& target, const Mask<Scalar>& estimate) {
  detail::require_same_shape(target.values(), estimate.values(), "spectral_loss");
  const auto d = (target.values() - estimate.values()).array();
  return d.abs().sum() + d.square().sum();
}

// dL/dM_hat = -sign(M - M_hat) - 2 (M - M_hat). Elements with M == M_hat
// sit on the l1 kink; sign(0) = 0 is returned there.
template <typename Scalar>
Matrix<Scalar> loss_gradient(const Mask<Scalar>& target, const Mask<Scalar>& estimate) {
  detail::require_same_shape(target.values(), estimate.values(), "loss_gradient");
  const auto d = (target.values() - estimate.values()).array();
  return (-d.sign() - Scalar(2) * d).matrix();
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_MASK_HPP_
