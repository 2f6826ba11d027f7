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

// Shared fixtures for the unit and acceptance tests.

#ifndef CLEANSTREAM_TESTS_SUPPORT_HPP_
#define CLEANSTREAM_TESTS_SUPPORT_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "cleanstream/cleaner.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/rng.hpp"
#include "cleanstream/simulator.hpp"
#include "cleanstream/stft.hpp"

namespace cleanstream::testing {

inline Eigen::MatrixXd random_signal(Eigen::Index samples, int channels, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd x(samples, channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index i = 0; i < samples; ++i) x(i, c) = rng.uniform(-1.0, 1.0);
  }
  return x;
}

inline constexpr double kHalfRoot = 0.70710678118654752440;

inline std::complex<double> complex_normal(SplitMix64& rng) {
  return {rng.normal() * kHalfRoot, rng.normal() * kHalfRoot};
}

inline Eigen::MatrixXcd complex_normal(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
  Eigen::MatrixXcd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = complex_normal(rng);
  }
  return out;
}

// Random Hermitian positive definite matrix.
inline Eigen::MatrixXcd random_hpd(int n, SplitMix64& rng, double ridge = 0.1) {
  const Eigen::MatrixXcd a = complex_normal(n, 2 * n, rng);
  Eigen::MatrixXcd h = a * a.adjoint() / double(2 * n);
  h.diagonal().array() += ridge;
  return 0.5 * (h + h.adjoint());
}

// STFT-domain scene whose reference-mic noise is exactly an (M-1)*L tap
// per-bin FIR mix of the other mics' noise:
//   N_ref(k,n) = sum_m sum_l conj(u_{m,l}(k)) N_m(k, n-l)
// with zero history before frame 0. Speech is present on the reference mic
// only, and only in the query frames.
struct ExactFirScene {
  Spectrogram<double> mixture;
  Spectrogram<double> speech;
  Spectrogram<double> noise;
  Eigen::MatrixXcd taps;  // (M-1)*L x bins, stacked as the cleaner stacks them
  int context_frames;
  CleanerConfig config;
};

struct ExactFirOptions {
  int num_mics = 3;
  int taps_per_mic = 3;
  int max_context_frames = 600;  // 6 s at 100 frames/s
  int context_frames = 600;      // leading frames dropped when smaller
  int query_frames = 200;
  double speech_power = 1.0;
  std::uint64_t seed = 2026;
};

inline ExactFirScene make_exact_fir_scene(const ExactFirOptions& o) {
  const StftConfig stft;
  const int bins = stft.num_bins();
  const int M = o.num_mics;
  const int L = o.taps_per_mic;
  const int total = o.max_context_frames + o.query_frames;
  const int drop = o.max_context_frames - o.context_frames;
  const int frames = total - drop;

  SplitMix64 root(o.seed);
  SplitMix64 tap_rng = root.fork(1);
  SplitMix64 noise_rng = root.fork(2);
  SplitMix64 speech_rng = root.fork(3);

  const int d = (M - 1) * L;
  Eigen::MatrixXcd taps = complex_normal(d, bins, tap_rng) / std::sqrt(double(std::max(d, 1)));

  std::vector<Eigen::MatrixXcd> noise(M, Eigen::MatrixXcd::Zero(bins, frames));
  for (int m = 1; m < M; ++m) {
    const Eigen::MatrixXcd full = complex_normal(bins, total, noise_rng);
    noise[m] = full.rightCols(frames);
  }
  for (int n = 0; n < frames; ++n) {
    for (int m = 1; m < M; ++m) {
      for (int l = 0; l < L && n - l >= 0; ++l) {
        noise[0].col(n) += (taps.row((m - 1) * L + l).transpose().conjugate().array() *
                            noise[m].col(n - l).array())
                               .matrix();
      }
    }
  }

  std::vector<Eigen::MatrixXcd> speech(M, Eigen::MatrixXcd::Zero(bins, frames));
  speech[0].rightCols(o.query_frames) =
      complex_normal(bins, o.query_frames, speech_rng) * std::sqrt(o.speech_power);

  std::vector<Eigen::MatrixXcd> mix(M);
  for (int m = 0; m < M; ++m) mix[m] = speech[m] + noise[m];

  CleanerConfig config;
  config.num_mics = M;
  config.taps_per_mic = L;
  return ExactFirScene{Spectrogram<double>(mix, stft), Spectrogram<double>(speech, stft),
                       Spectrogram<double>(noise, stft), taps, o.context_frames, config};
}

// Max over bins of |a_k - b_k| / |b_k| using column 2-norms.
inline double max_column_relative_error(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double ref = b.col(k).norm();
    const double err = (a.col(k) - b.col(k)).norm();
    worst = std::max(worst, ref > 0.0 ? err / ref : err);
  }
  return worst;
}

inline double energy(const Spectrogram<double>& s, int channel = 0) {
  return s.channel(channel).squaredNorm();
}

// Synthetic material for simulator-level tests.
inline std::vector<SourceClip> synth_speech_clips(int count, double duration_s, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<SourceClip> out;
  for (int i = 0; i < count; ++i) {
    SplitMix64 r = rng.fork(static_cast<std::uint64_t>(i));
    out.push_back({"utt" + std::to_string(i), synth_speech(duration_s, 16000, r)});
  }
  return out;
}

inline std::vector<SourceClip> synth_noise_clips(int count, double duration_s, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<SourceClip> out;
  for (int i = 0; i < count; ++i) {
    SplitMix64 r = rng.fork(static_cast<std::uint64_t>(i));
    out.push_back({"noise" + std::to_string(i),
                   synth_noise(duration_s, 16000, r,
                               i % 2 == 0 ? NoiseKind::kColored : NoiseKind::kBabble)});
  }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cleanstream_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Code of the cleanstream::Error thrown by fn, or nullopt if nothing was.
template <typename Fn>
std::optional<Errc> thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace cleanstream::testing

#endif  // CLEANSTREAM_TESTS_SUPPORT_HPP_
