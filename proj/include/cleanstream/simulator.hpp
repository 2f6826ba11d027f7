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

#ifndef CLEANSTREAM_SIMULATOR_HPP_
#define CLEANSTREAM_SIMULATOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cleanstream/rng.hpp"

namespace cleanstream {

struct ArrayGeometry {
  std::vector<Eigen::Vector3d> positions;  // metres; positions[0] is the reference mic
  double speed_of_sound = 343.0;

  int num_mics() const { return static_cast<int>(positions.size()); }
  void validate() const;

  // Leading `count` microphones.
  ArrayGeometry first(int count) const;

  // Equilateral triangle in the horizontal plane.
  static ArrayGeometry triangle(double side_m = 0.071);

  // Triangle for up to three mics; the fourth sits 5 cm in front of the
  // triangle centroid.
  static ArrayGeometry default_array(int num_mics);
};

// Unit vector pointing from the array toward a far-field source.
Eigen::Vector3d direction_from_azimuth(double azimuth_rad, double elevation_rad = 0.0);

// Relative arrival delays in seconds, tau_m = -((r_m - r_0) . direction) / c.
Eigen::VectorXd arrival_delays(const ArrayGeometry& geometry, const Eigen::Vector3d& direction);

// y[n] = x[n - delay]; integer delays are exact shifts, fractional ones use a
// 32-tap Blackman-windowed sinc normalised to unit DC gain. Zero outside x.
Eigen::VectorXd delay_signal(const Eigen::VectorXd& x, double delay_samples);

// Far-field anechoic array image of `source`, one column per microphone.
Eigen::MatrixXd simulate_array(const Eigen::VectorXd& source, const Eigen::Vector3d& direction,
                               const ArrayGeometry& geometry, int sample_rate_hz = 16000);

struct MixResult {
  double noise_gain;
  Eigen::VectorXd mixture;
};

// Scales noise by g so that 10 log10(P_speech / (g^2 P_noise)) = snr_db,
// powers measured over the speech length. +inf dB gives g = 0.
MixResult mix_at_snr(const Eigen::VectorXd& speech, const Eigen::VectorXd& noise, double snr_db);

struct SceneConfig {
  double snr_db = 0.0;  // +inf: noise-free; -inf: speech gain 0
  double noise_context_s = 6.0;
  Eigen::Vector3d speech_direction = Eigen::Vector3d::UnitX();
  std::vector<Eigen::Vector3d> noise_directions = {Eigen::Vector3d::UnitY()};
  std::uint64_t seed = 0;
  ArrayGeometry geometry = ArrayGeometry::triangle();
  int sample_rate_hz = 16000;
  // Round the stored images to float32 so scenes survive a float WAV
  // round-trip bit-exactly.
  bool quantize_f32 = true;
};

// Noise runs from t = 0; speech starts at context_boundary. The mixture is
// exactly speech_image + noise_image (the noise image already carries the
// SNR gain).
struct Scene {
  std::string id;
  Eigen::MatrixXd mixture;
  Eigen::MatrixXd speech_image;
  Eigen::MatrixXd noise_image;
  Eigen::Index context_boundary = 0;
  double noise_gain = 1.0;
  SceneConfig config;

  int num_mics() const { return static_cast<int>(mixture.cols()); }
  Eigen::Index num_samples() const { return mixture.rows(); }
  Eigen::VectorXd clean_ref() const { return speech_image.col(0); }
  Eigen::VectorXd noise_ref() const { return noise_image.col(0); }

  // SNR at the reference mic over [context_boundary, end).
  double measured_snr_db() const;

  Scene first_mics(int count) const;
  void validate() const;
};

// The noise for a source direction i > 0 is the same clip circularly shifted
// by i/num_sources of the scene length.
Scene make_scene(const Eigen::VectorXd& speech, const Eigen::VectorXd& noise,
                 const SceneConfig& config);

struct SourceClip {
  std::string id;
  Eigen::VectorXd samples;
};

struct SweepOptions {
  std::vector<double> snr_levels_db = {-12, -6, 0, 6, 12};
  ArrayGeometry geometry = ArrayGeometry::triangle();
  std::uint64_t seed = 0;
  double noise_context_s = 6.0;
  int num_noise_sources = 1;
  int sample_rate_hz = 16000;
};

// One scene per (utterance, SNR). For utterance i the noise clip, offset and
// directions come from SplitMix64(seed) forked by i, and are shared across
// the SNR levels.
std::vector<Scene> generate_sweep(const std::vector<SourceClip>& speech,
                                  const std::vector<SourceClip>& noise, const SweepOptions& options);

// Deterministic synthetic material for tests and demos.
Eigen::VectorXd synth_speech(double duration_s, int sample_rate_hz, SplitMix64& rng);

enum class NoiseKind { kColored, kBabble };
Eigen::VectorXd synth_noise(double duration_s, int sample_rate_hz, SplitMix64& rng,
                            NoiseKind kind = NoiseKind::kColored);

}  // namespace cleanstream

#endif  // CLEANSTREAM_SIMULATOR_HPP_
