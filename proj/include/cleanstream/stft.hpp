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

#ifndef CLEANSTREAM_STFT_HPP_
#define CLEANSTREAM_STFT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cleanstream/error.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

enum class WindowKind { kHann };

// Short-time analysis parameters. Construction validates the geometry and
// that the window squared overlap-adds to a strictly positive envelope at the
// configured hop, which is what least-squares resynthesis needs.
class StftConfig {
 public:
  // 16 kHz, 32 ms Hann window, 10 ms hop, 512-point FFT.
  StftConfig() : StftConfig(16000, 512, 160, 512) {}

  StftConfig(int sample_rate_hz, int window_len, int hop_len, int fft_size,
             WindowKind kind = WindowKind::kHann)
      : sample_rate_hz_(sample_rate_hz),
        window_len_(window_len),
        hop_len_(hop_len),
        fft_size_(fft_size),
        kind_(kind) {
    if (sample_rate_hz <= 0) {
      throw Error(Errc::kInvalidConfig, "sample rate must be positive");
    }
    if (hop_len < 1 || hop_len > window_len || window_len > fft_size) {
      throw Error(Errc::kInvalidConfig,
                  "stft requires 1 <= hop_len <= window_len <= fft_size");
    }
    if (fft_size % 2 != 0) {
      throw Error(Errc::kInvalidConfig, "fft_size must be even");
    }
    window_.resize(window_len);
    for (int n = 0; n < window_len; ++n) {
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window_len);
    }
    check_overlap_add();
  }

  static StftConfig from_durations(int sample_rate_hz, double window_ms,
                                   double hop_ms) {
    const int win = static_cast<int>(std::lround(sample_rate_hz * window_ms / 1000.0));
    const int hop = static_cast<int>(std::lround(sample_rate_hz * hop_ms / 1000.0));
    int fft = 1;
    while (fft < win) fft <<= 1;
    return StftConfig(sample_rate_hz, win, hop, fft);
  }

  int sample_rate_hz() const { return sample_rate_hz_; }
  int window_len() const { return window_len_; }
  int hop_len() const { return hop_len_; }
  int fft_size() const { return fft_size_; }
  int num_bins() const { return fft_size_ / 2 + 1; }
  WindowKind window_kind() const { return kind_; }
  const Eigen::VectorXd& window() const { return window_; }

  int num_frames(Eigen::Index num_samples) const {
    if (num_samples < window_len_) return 0;
    return static_cast<int>((num_samples - window_len_) / hop_len_) + 1;
  }

  // Number of samples spanned by `frames` consecutive frames.
  Eigen::Index coverage(int frames) const {
    return frames <= 0 ? 0 : static_cast<Eigen::Index>(frames - 1) * hop_len_ + window_len_;
  }

  bool operator==(const StftConfig& o) const {
    return sample_rate_hz_ == o.sample_rate_hz_ && window_len_ == o.window_len_ &&
           hop_len_ == o.hop_len_ && fft_size_ == o.fft_size_ && kind_ == o.kind_;
  }

 private:
  void check_overlap_add() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int t = 0; t < hop_len_; ++t) {
      double acc = 0.0;
      for (int s = t; s < window_len_; s += hop_len_) acc += window_[s] * window_[s];
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
    }
    if (!(lo > 1e-6 * hi)) {
      throw Error(Errc::kInvalidConfig,
                  "window does not overlap-add to a positive envelope at hop " +
                      std::to_string(hop_len_));
    }
  }

  int sample_rate_hz_;
  int window_len_;
  int hop_len_;
  int fft_size_;
  WindowKind kind_;
  Eigen::VectorXd window_;
};

// Complex STFT of one or more channels. Each channel is stored as a
// (num_bins x num_frames) matrix so a frame is a contiguous column.
template <typename Scalar>
class Spectrogram {
 public:
  using Bins = ComplexMatrix<Scalar>;

  Spectrogram(std::vector<Bins> channels, StftConfig config)
      : channels_(std::move(channels)), config_(std::move(config)) {
    if (channels_.empty()) {
      throw Error(Errc::kShapeMismatch, "spectrogram needs at least one channel");
    }
    for (const Bins& c : channels_) {
      if (c.rows() != config_.num_bins() || c.cols() != channels_.front().cols()) {
        throw Error(Errc::kShapeMismatch, "spectrogram channels disagree in shape");
      }
    }
  }

  int num_channels() const { return static_cast<int>(channels_.size()); }
  int num_frames() const { return static_cast<int>(channels_.front().cols()); }
  int num_bins() const { return static_cast<int>(channels_.front().rows()); }
  const StftConfig& config() const { return config_; }

  const Bins& channel(int m) const { return channels_.at(m); }

  // One multichannel frame as (num_bins x num_channels).
  ComplexMatrix<Scalar> frame(int n) const {
    ComplexMatrix<Scalar> out(num_bins(), num_channels());
    for (int m = 0; m < num_channels(); ++m) out.col(m) = channels_[m].col(n);
    return out;
  }

  Spectrogram frames(int begin, int end) const {
    std::vector<Bins> out;
    out.reserve(channels_.size());
    for (const Bins& c : channels_) out.emplace_back(c.middleCols(begin, end - begin));
    return Spectrogram(std::move(out), config_);
  }

  Spectrogram first_channels(int count) const {
    if (count < 1 || count > num_channels()) {
      throw Error(Errc::kShapeMismatch, "channel count out of range");
    }
    return Spectrogram(std::vector<Bins>(channels_.begin(), channels_.begin() + count),
                       config_);
  }

 private:
  std::vector<Bins> channels_;
  StftConfig config_;
};

// Forward STFT without centre padding: frame n covers samples
// [n*hop, n*hop + window_len).
template <typename Derived>
Spectrogram<typename Derived::Scalar> analyze(const Eigen::MatrixBase<Derived>& signal,
                                              const StftConfig& config) {
  using Scalar = typename Derived::Scalar;
  if (signal.cols() < 1 || signal.rows() < 1) {
    throw Error(Errc::kInsufficientSamples, "insufficient samples: empty signal");
  }
  if (signal.rows() < config.window_len()) {
    throw Error(Errc::kInsufficientSamples, "insufficient samples for one window");
  }
  const int frames = config.num_frames(signal.rows());
  const int win = config.window_len();
  const Vector<Scalar> window = config.window().cast<Scalar>();

  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  std::vector<Scalar> buffer(config.fft_size(), Scalar(0));
  std::vector<Complex<Scalar>> spectrum;

  std::vector<ComplexMatrix<Scalar>> channels;
  channels.reserve(signal.cols());
  for (Eigen::Index m = 0; m < signal.cols(); ++m) {
    ComplexMatrix<Scalar> bins(config.num_bins(), frames);
    for (int n = 0; n < frames; ++n) {
      const Eigen::Index start = static_cast<Eigen::Index>(n) * config.hop_len();
      for (int t = 0; t < win; ++t) buffer[t] = window[t] * signal(start + t, m);
      fft.fwd(spectrum, buffer);
      for (int k = 0; k < config.num_bins(); ++k) bins(k, n) = spectrum[k];
    }
    channels.push_back(std::move(bins));
  }
  return Spectrogram<Scalar>(std::move(channels), config);
}

// Least-squares overlap-add inverse of one channel. Output length is the
// coverage of the frames; samples with zero window support come out as 0.
template <typename Scalar>
Vector<Scalar> synthesize(const Spectrogram<Scalar>& spec, int channel = 0) {
  const StftConfig& config = spec.config();
  const int frames = spec.num_frames();
  const int win = config.window_len();
  const Vector<Scalar> window = config.window().cast<Scalar>();
  const Eigen::Index length = config.coverage(frames);

  Vector<Scalar> numer = Vector<Scalar>::Zero(length);
  Vector<Scalar> denom = Vector<Scalar>::Zero(length);

  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  std::vector<Complex<Scalar>> half(config.num_bins());
  std::vector<Scalar> time;
  const auto& bins = spec.channel(channel);
  for (int n = 0; n < frames; ++n) {
    for (int k = 0; k < config.num_bins(); ++k) half[k] = bins(k, n);
    fft.inv(time, half, config.fft_size());
    const Eigen::Index start = static_cast<Eigen::Index>(n) * config.hop_len();
    for (int t = 0; t < win; ++t) {
      numer[start + t] += window[t] * time[t];
      denom[start + t] += window[t] * window[t];
    }
  }
  Vector<Scalar> out(length);
  const Scalar tiny = std::numeric_limits<Scalar>::min() * Scalar(1e6);
  for (Eigen::Index t = 0; t < length; ++t) {
    out[t] = denom[t] > tiny ? numer[t] / denom[t] : Scalar(0);
  }
  return out;
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_STFT_HPP_
