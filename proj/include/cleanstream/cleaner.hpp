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

#ifndef CLEANSTREAM_CLEANER_HPP_
#define CLEANSTREAM_CLEANER_HPP_

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cleanstream/binary_io.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/stft.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

struct CleanerConfig {
  int num_mics = 1;
  int taps_per_mic = 3;
  double forgetting_factor = 0.9995;
  double init_diag = 0.01;
  int reference_mic = 0;

  int regressor_len() const { return (num_mics - 1) * taps_per_mic; }

  void validate() const {
    if (num_mics < 1) throw Error(Errc::kInvalidConfig, "num_mics must be >= 1");
    if (taps_per_mic < 1) throw Error(Errc::kInvalidConfig, "taps_per_mic must be >= 1");
    if (!(forgetting_factor > 0.0 && forgetting_factor <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "forgetting factor must lie in (0, 1]");
    }
    if (!(init_diag > 0.0)) throw Error(Errc::kInvalidConfig, "init_diag must be positive");
    if (reference_mic < 0 || reference_mic >= num_mics) {
      throw Error(Errc::kInvalidConfig, "reference_mic out of range");
    }
  }
};

// Per-frequency multichannel noise canceller.
//
// For each bin k the non-reference microphones feed a joint regressor
// y(k,n) of length (M-1)*L: one block of L taps per microphone, each block
// ordered newest frame first. The output is
//
//   Z(k,n) = Y_ref(k,n) - u(k)^H y(k,n)
//
// and adapt_frame() performs one exponentially weighted RLS step toward the
// minimum-power u(k). After freeze() the coefficients are fixed.
template <typename Scalar>
class CleanerState {
 public:
  using CMat = ComplexMatrix<Scalar>;
  using CVec = ComplexVector<Scalar>;

  CleanerState(const CleanerConfig& config, int num_bins)
      : config_(config), num_bins_(num_bins) {
    config_.validate();
    if (num_bins < 1) throw Error(Errc::kInvalidConfig, "num_bins must be >= 1");
    for (int m = 0; m < config_.num_mics; ++m) {
      if (m != config_.reference_mic) others_.push_back(m);
    }
    const int d = config_.regressor_len();
    coeffs_ = CMat::Zero(d, num_bins);
    regressors_ = CMat::Zero(d, num_bins);
    inv_corr_.assign(num_bins,
                     CMat::Identity(d, d) * Complex<Scalar>(Scalar(1.0 / config_.init_diag)));
  }

  const CleanerConfig& config() const { return config_; }
  int num_bins() const { return num_bins_; }
  int regressor_len() const { return config_.regressor_len(); }
  bool frozen() const { return frozen_; }

  // Stacked coefficients, one column per bin.
  const CMat& coefficients() const { return coeffs_; }
  const CMat& inverse_correlation(int k) const { return inv_corr_.at(k); }
  const CMat& regressors() const { return regressors_; }

  // Replaces the taps, e.g. with externally estimated ones.
  void set_coefficients(const CMat& coeffs) {
    if (frozen_) throw Error(Errc::kCleanerFrozen, "cleaner frozen");
    if (coeffs.rows() != coeffs_.rows() || coeffs.cols() != coeffs_.cols()) {
      throw Error(Errc::kShapeMismatch, "coefficient shape mismatch");
    }
    coeffs_ = coeffs;
  }

  // Shifts a frame into the delay lines without producing output.
  void prime(const Eigen::Ref<const CMat>& frame) {
    check_frame(frame);
    push(frame);
  }

  void reset_delay_lines() { regressors_.setZero(); }

  CVec residual(const Eigen::Ref<const CMat>& frame) {
    check_frame(frame);
    push(frame);
    return filter(frame);
  }

  CVec adapt_frame(const Eigen::Ref<const CMat>& frame) {
    if (frozen_) throw Error(Errc::kCleanerFrozen, "cleaner frozen");
    check_frame(frame);
    push(frame);
    CVec prior = filter(frame);
    const int d = regressor_len();
    if (d == 0) return prior;
    const Scalar lambda = Scalar(config_.forgetting_factor);
    CVec pi(d), gain(d);
    for (int k = 0; k < num_bins_; ++k) {
      const auto y = regressors_.col(k);
      CMat& p = inv_corr_[k];
      pi.noalias() = p * y;
      const Scalar denom = lambda + std::real(y.dot(pi));
      gain = pi / denom;
      coeffs_.col(k) += gain * std::conj(prior[k]);
      p.noalias() -= gain * pi.adjoint();
      p /= lambda;
      // Re-symmetrise so rounding cannot drift P away from Hermitian.
      p = (Scalar(0.5) * (p + p.adjoint())).eval();
    }
    return prior;
  }

  void freeze() { frozen_ = true; }

  // P(k) Hermitian and positive definite for every bin.
  bool check_invariants(Scalar tol = Scalar(1e-8)) const {
    for (const CMat& p : inv_corr_) {
      if (p.size() == 0) continue;
      if ((p - p.adjoint()).norm() > tol * std::max(Scalar(1), p.norm())) return false;
      Eigen::LLT<CMat> llt(p);
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Debug dump: "CSCL", u32 version, config, u32 num_bins, u8 frozen, then
  // per bin u(k) followed by P(k) row-major, complex values as f64 (re, im).
  void write(std::ostream& out) const {
    out.write("CSCL", 4);
    binary::put_u32(out, 1);
    binary::put_i32(out, config_.num_mics);
    binary::put_i32(out, config_.taps_per_mic);
    binary::put_f64(out, config_.forgetting_factor);
    binary::put_f64(out, config_.init_diag);
    binary::put_i32(out, config_.reference_mic);
    binary::put_u32(out, static_cast<std::uint32_t>(num_bins_));
    out.put(frozen_ ? 1 : 0);
    const int d = regressor_len();
    for (int k = 0; k < num_bins_; ++k) {
      for (int i = 0; i < d; ++i) put_complex(out, coeffs_(i, k));
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) put_complex(out, inv_corr_[k](r, c));
      }
    }
  }

  static CleanerState read(std::istream& in) {
    binary::expect_magic(in, "CSCL");
    if (binary::get_u32(in) != 1) {
      throw Error(Errc::kUnsupportedVersion, "unsupported cleaner state version");
    }
    CleanerConfig config;
    config.num_mics = binary::get_i32(in);
    config.taps_per_mic = binary::get_i32(in);
    config.forgetting_factor = binary::get_f64(in);
    config.init_diag = binary::get_f64(in);
    config.reference_mic = binary::get_i32(in);
    const int bins = static_cast<int>(binary::get_u32(in));
    char frozen = 0;
    binary::get_bytes(in, &frozen, 1);
    CleanerState state(config, bins);
    const int d = state.regressor_len();
    for (int k = 0; k < bins; ++k) {
      for (int i = 0; i < d; ++i) state.coeffs_(i, k) = get_complex(in);
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) state.inv_corr_[k](r, c) = get_complex(in);
      }
    }
    state.frozen_ = frozen != 0;
    return state;
  }

 private:
  void check_frame(const Eigen::Ref<const CMat>& frame) const {
    if (frame.cols() != config_.num_mics) {
      throw Error(Errc::kShapeMismatch, "frame has " + std::to_string(frame.cols()) +
                                            " channels, cleaner expects " +
                                            std::to_string(config_.num_mics));
    }
    if (frame.rows() != num_bins_) {
      throw Error(Errc::kShapeMismatch, "frame bin count mismatch");
    }
  }

  void push(const Eigen::Ref<const CMat>& frame) {
    const int taps = config_.taps_per_mic;
    for (std::size_t b = 0; b < others_.size(); ++b) {
      const int base = static_cast<int>(b) * taps;
      for (int l = taps - 1; l > 0; --l) regressors_.row(base + l) = regressors_.row(base + l - 1);
      regressors_.row(base) = frame.col(others_[b]).transpose();
    }
  }

  CVec filter(const Eigen::Ref<const CMat>& frame) const {
    CVec z = frame.col(config_.reference_mic);
    if (regressor_len() > 0) {
      z -= coeffs_.conjugate().cwiseProduct(regressors_).colwise().sum().transpose();
    }
    return z;
  }

  static void put_complex(std::ostream& out, const Complex<Scalar>& v) {
    binary::put_f64(out, static_cast<double>(v.real()));
    binary::put_f64(out, static_cast<double>(v.imag()));
  }

  static Complex<Scalar> get_complex(std::istream& in) {
    const double re = binary::get_f64(in);
    const double im = binary::get_f64(in);
    return {Scalar(re), Scalar(im)};
  }

  CleanerConfig config_;
  int num_bins_;
  std::vector<int> others_;
  CMat coeffs_;
  CMat regressors_;
  std::vector<CMat> inv_corr_;
  bool frozen_ = false;
};

template <typename Scalar>
CleanerState<Scalar> cleaner_init(const CleanerConfig& config, int num_bins) {
  return CleanerState<Scalar>(config, num_bins);
}

// Regularised batch least squares over frames [begin, end): per bin solves
// (sum y y^H + init_diag I) u = sum y conj(Y_ref), with the delay lines
// starting from zero at `begin`.
template <typename Scalar>
ComplexMatrix<Scalar> batch_ls_oracle(const Spectrogram<Scalar>& spec, int begin, int end,
                                      const CleanerConfig& config) {
  config.validate();
  if (spec.num_channels() != config.num_mics) {
    throw Error(Errc::kShapeMismatch, "spectrogram channel count differs from num_mics");
  }
  const int d = config.regressor_len();
  const int taps = config.taps_per_mic;
  const int bins = spec.num_bins();
  if (end - begin < d || begin < 0 || end > spec.num_frames()) {
    throw Error(Errc::kContextTooShort, "batch least squares needs >= (M-1)*L frames");
  }
  ComplexMatrix<Scalar> out(d, bins);
  if (d == 0) return out;
  std::vector<int> others;
  for (int m = 0; m < config.num_mics; ++m) {
    if (m != config.reference_mic) others.push_back(m);
  }
  ComplexVector<Scalar> y(d);
  for (int k = 0; k < bins; ++k) {
    ComplexMatrix<Scalar> gram =
        ComplexMatrix<Scalar>::Identity(d, d) * Complex<Scalar>(Scalar(config.init_diag));
    ComplexVector<Scalar> rhs = ComplexVector<Scalar>::Zero(d);
    for (int n = begin; n < end; ++n) {
      for (std::size_t b = 0; b < others.size(); ++b) {
        for (int l = 0; l < taps; ++l) {
          const int src = n - l;
          y[b * taps + l] = src >= begin ? spec.channel(others[b])(k, src) : Complex<Scalar>(0);
        }
      }
      gram.noalias() += y * y.adjoint();
      rhs += y * std::conj(spec.channel(config.reference_mic)(k, n));
    }
    Eigen::LLT<ComplexMatrix<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw Error(Errc::kSingularSystem, "batch least-squares system is singular");
    }
    out.col(k) = llt.solve(rhs);
    if (!out.col(k).allFinite()) {
      throw Error(Errc::kSingularSystem, "batch least-squares solution is not finite");
    }
  }
  return out;
}

// Frames lying entirely inside the first `context_samples` samples.
inline int context_frame_count(Eigen::Index context_samples, const StftConfig& stft) {
  return stft.num_frames(context_samples);
}

template <typename Scalar>
struct CleanResult {
  CleanerState<Scalar> state;       // frozen at the end of the context
  Spectrogram<Scalar> enhanced;     // frames [first_frame, num_frames)
  int first_frame;
};

// Runs the frozen filter over frames [first_frame, end) of `input`. The delay
// lines are primed from the preceding frames, so the result equals what the
// streaming cleaner would output for the same frames.
template <typename Scalar>
Spectrogram<Scalar> apply_frozen(const CleanerState<Scalar>& state,
                                 const Spectrogram<Scalar>& input, int first_frame) {
  CleanerState<Scalar> work = state;
  work.reset_delay_lines();
  const int taps = state.config().taps_per_mic;
  for (int n = std::max(0, first_frame - taps + 1); n < first_frame; ++n) {
    work.prime(input.frame(n));
  }
  ComplexMatrix<Scalar> out(input.num_bins(), input.num_frames() - first_frame);
  for (int n = first_frame; n < input.num_frames(); ++n) {
    out.col(n - first_frame) = work.residual(input.frame(n));
  }
  return Spectrogram<Scalar>({std::move(out)}, input.config());
}

// Adapts on the first `context_frames` frames, freezes, and filters the rest.
template <typename Scalar>
CleanResult<Scalar> clean_spectrogram(const Spectrogram<Scalar>& mixture, int context_frames,
                                      const CleanerConfig& config) {
  config.validate();
  if (mixture.num_channels() != config.num_mics) {
    throw Error(Errc::kShapeMismatch, "mixture channel count differs from num_mics");
  }
  if (context_frames < config.regressor_len() || context_frames < 0) {
    throw Error(Errc::kContextTooShort, "context too short: " + std::to_string(context_frames) +
                                            " frames for " +
                                            std::to_string(config.regressor_len()) + " taps");
  }
  if (context_frames >= mixture.num_frames()) {
    throw Error(Errc::kInsufficientSamples, "audio does not extend past the noise context");
  }
  CleanerState<Scalar> state(config, mixture.num_bins());
  for (int n = 0; n < context_frames; ++n) state.adapt_frame(mixture.frame(n));
  state.freeze();
  ComplexMatrix<Scalar> out(mixture.num_bins(), mixture.num_frames() - context_frames);
  CleanerState<Scalar> running = state;
  for (int n = context_frames; n < mixture.num_frames(); ++n) {
    out.col(n - context_frames) = running.residual(mixture.frame(n));
  }
  return CleanResult<Scalar>{std::move(state),
                             Spectrogram<Scalar>({std::move(out)}, mixture.config()),
                             context_frames};
}

template <typename Derived>
Spectrogram<typename Derived::Scalar> clean_utterance(const Eigen::MatrixBase<Derived>& audio,
                                                      double context_s,
                                                      const CleanerConfig& config,
                                                      const StftConfig& stft = StftConfig()) {
  const auto context_samples =
      static_cast<Eigen::Index>(std::llround(context_s * stft.sample_rate_hz()));
  if (audio.rows() <= context_samples) {
    throw Error(Errc::kInsufficientSamples, "audio must be longer than the noise context");
  }
  const auto spec = analyze(audio, stft);
  return clean_spectrogram(spec, context_frame_count(context_samples, stft), config).enhanced;
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_CLEANER_HPP_
