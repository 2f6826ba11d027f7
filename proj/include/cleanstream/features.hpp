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

#ifndef CLEANSTREAM_FEATURES_HPP_
#define CLEANSTREAM_FEATURES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cleanstream/error.hpp"
#include "cleanstream/stft.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

struct MelConfig {
  int num_mel = 128;
  double fmin_hz = 125.0;
  double fmax_hz = 7500.0;
  double log_floor = 1e-5;
  StftConfig stft;

  void validate() const {
    if (num_mel < 1) throw Error(Errc::kInvalidConfig, "num_mel must be >= 1");
    if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= stft.sample_rate_hz() / 2.0)) {
      throw Error(Errc::kInvalidConfig, "mel bounds must satisfy 0 <= fmin < fmax <= fs/2");
    }
    if (!(log_floor > 0.0)) throw Error(Errc::kInvalidConfig, "log_floor must be positive");
  }

  // Fingerprint stored in exported feature containers.
  std::uint64_t hash() const;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// num_mel + 2 edge frequencies equally spaced on the mel scale; filter f
// rises from edge f, peaks at edge f+1 and falls to edge f+2.
inline std::vector<double> mel_edge_frequencies(const MelConfig& config) {
  config.validate();
  const double lo = hz_to_mel(config.fmin_hz);
  const double hi = hz_to_mel(config.fmax_hz);
  std::vector<double> edges(config.num_mel + 2);
  for (int i = 0; i < config.num_mel + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (config.num_mel + 1));
  }
  return edges;
}

inline std::vector<double> mel_center_frequencies(const MelConfig& config) {
  const auto edges = mel_edge_frequencies(config);
  return {edges.begin() + 1, edges.end() - 1};
}

namespace detail {

// Integral of the unit-peak triangle (l, c, r) over [a, b].
inline double triangle_integral(double l, double c, double r, double a, double b) {
  auto rising = [&](double x0, double x1) {
    x0 = std::max(x0, l);
    x1 = std::min(x1, c);
    if (x1 <= x0) return 0.0;
    return ((x1 - l) * (x1 - l) - (x0 - l) * (x0 - l)) / (2.0 * (c - l));
  };
  auto falling = [&](double x0, double x1) {
    x0 = std::max(x0, c);
    x1 = std::min(x1, r);
    if (x1 <= x0) return 0.0;
    return ((r - x0) * (r - x0) - (r - x1) * (r - x1)) / (2.0 * (r - c));
  };
  return rising(a, b) + falling(a, b);
}

}  // namespace detail

// Triangular mel filterbank, (num_mel x num_bins).
//
// Each weight is the mean of the unit-peak triangle over the frequency
// interval owned by the FFT bin, [f_k - df/2, f_k + df/2]. For wide filters
// this is the usual sampled triangle; narrow low-frequency filters that fall
// between bin centres still receive the energy of the bin they overlap
// instead of collapsing to an all-zero row.
template <typename Scalar = double>
Matrix<Scalar> mel_filterbank(const MelConfig& config) {
  const auto edges = mel_edge_frequencies(config);
  const int bins = config.stft.num_bins();
  const double df = static_cast<double>(config.stft.sample_rate_hz()) / config.stft.fft_size();
  Matrix<Scalar> w = Matrix<Scalar>::Zero(config.num_mel, bins);
  for (int f = 0; f < config.num_mel; ++f) {
    const double l = edges[f], c = edges[f + 1], r = edges[f + 2];
    for (int k = 0; k < bins; ++k) {
      const double a = std::max(0.0, (k - 0.5) * df);
      const double b = (k + 0.5) * df;
      if (b <= l || a >= r) continue;
      w(f, k) = Scalar(detail::triangle_integral(l, c, r, a, b) / df);
    }
    if (w.row(f).maxCoeff() <= Scalar(0)) {
      throw Error(Errc::kInvalidConfig,
                  "mel filter " + std::to_string(f) + " covers no FFT bin; reduce num_mel");
    }
  }
  return w;
}

// Mel energies indexed (frame, mel bin).
template <typename Scalar>
class MelSpectrogram {
 public:
  MelSpectrogram(Matrix<Scalar> values, bool is_log) : values_(std::move(values)), is_log_(is_log) {
    if (!is_log_ && (values_.array() < Scalar(0)).any()) {
      throw Error(Errc::kOutOfRange, "linear mel energies must be nonnegative");
    }
  }

  const Matrix<Scalar>& values() const { return values_; }
  bool is_log() const { return is_log_; }
  int num_frames() const { return static_cast<int>(values_.rows()); }
  int num_mel() const { return static_cast<int>(values_.cols()); }

 private:
  Matrix<Scalar> values_;
  bool is_log_;
};

// mel(n, f) = sum_k W(f, k) |X(k, n)|
template <typename Scalar>
MelSpectrogram<Scalar> to_mel(const Spectrogram<Scalar>& spec, const Matrix<Scalar>& filterbank,
                              int channel = 0) {
  if (filterbank.cols() != spec.num_bins()) {
    throw Error(Errc::kShapeMismatch, "filterbank bin count differs from spectrogram");
  }
  Matrix<Scalar> mel = (filterbank * spec.channel(channel).cwiseAbs()).transpose();
  return MelSpectrogram<Scalar>(std::move(mel), false);
}

template <typename Scalar>
MelSpectrogram<Scalar> to_mel(const Spectrogram<Scalar>& spec, const MelConfig& config,
                              int channel = 0) {
  return to_mel(spec, mel_filterbank<Scalar>(config), channel);
}

template <typename Scalar>
MelSpectrogram<Scalar> to_log(const MelSpectrogram<Scalar>& mel, double log_floor = 1e-5) {
  if (mel.is_log()) throw Error(Errc::kAlreadyLog, "mel spectrogram is already log-compressed");
  Matrix<Scalar> out = mel.values().array().max(Scalar(log_floor)).log().matrix();
  return MelSpectrogram<Scalar>(std::move(out), true);
}

inline constexpr int kStackFrames = 4;
inline constexpr int kStackHop = 3;

// Model input: one row per stacked frame, laid out as
// [raw(n-3) raw(n-2) raw(n-1) raw(n) | cleaned(n-3) ... cleaned(n)] for n = 3t.
template <typename Scalar>
struct StackedFeatures {
  Matrix<Scalar> values;

  int num_frames() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

inline int stacked_frame_count(int base_frames) {
  return base_frames <= 0 ? 0 : (base_frames - 1) / kStackHop + 1;
}

template <typename Scalar>
StackedFeatures<Scalar> stack(const MelSpectrogram<Scalar>& raw,
                              const MelSpectrogram<Scalar>& cleaned) {
  if (!raw.is_log() || !cleaned.is_log()) {
    throw Error(Errc::kInvalidConfig, "stacking expects log-mel inputs");
  }
  if (raw.num_frames() != cleaned.num_frames() || raw.num_mel() != cleaned.num_mel()) {
    throw Error(Errc::kShapeMismatch, "raw and cleaned features differ in shape");
  }
  const int mel = raw.num_mel();
  const int out_frames = stacked_frame_count(raw.num_frames());
  StackedFeatures<Scalar> out{Matrix<Scalar>(out_frames, 2 * kStackFrames * mel)};
  for (int t = 0; t < out_frames; ++t) {
    const int newest = kStackHop * t;
    for (int j = 0; j < kStackFrames; ++j) {
      const int src = std::max(0, newest - (kStackFrames - 1) + j);
      out.values.block(t, j * mel, 1, mel) = raw.values().row(src);
      out.values.block(t, (kStackFrames + j) * mel, 1, mel) = cleaned.values().row(src);
    }
  }
  return out;
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_FEATURES_HPP_
