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

#include "cleanstream/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cleanstream/error.hpp"

namespace cleanstream {
namespace {

constexpr int kSincTaps = 32;
constexpr double kPeakLimit = 0.9;

double power(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<double>(x.size());
}

void quantize(Eigen::MatrixXd& m) {
  m = m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

std::string snr_tag(double snr_db) {
  if (std::isinf(snr_db)) return snr_db > 0 ? "clean" : "noiseonly";
  std::ostringstream s;
  s << (snr_db < 0 ? "m" : "p") << std::abs(snr_db);
  return s.str();
}

}  // namespace

void ArrayGeometry::validate() const {
  if (positions.empty()) throw Error(Errc::kInvalidConfig, "array geometry needs at least one mic");
  if (!(speed_of_sound > 0.0)) throw Error(Errc::kInvalidConfig, "speed of sound must be positive");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) throw Error(Errc::kInvalidConfig, "non-finite mic position");
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      if ((positions[i] - positions[j]).norm() < 1e-9) {
        throw Error(Errc::kInvalidConfig, "mic positions must be distinct");
      }
    }
  }
}

ArrayGeometry ArrayGeometry::first(int count) const {
  if (count < 1 || count > num_mics()) throw Error(Errc::kInvalidConfig, "mic count out of range");
  ArrayGeometry g = *this;
  g.positions.resize(count);
  return g;
}

ArrayGeometry ArrayGeometry::triangle(double side_m) {
  const double h = side_m * std::sqrt(3.0) / 2.0;
  ArrayGeometry g;
  g.positions = {Eigen::Vector3d(0.0, 0.0, 0.0), Eigen::Vector3d(side_m, 0.0, 0.0),
                 Eigen::Vector3d(side_m / 2.0, h, 0.0)};
  return g;
}

ArrayGeometry ArrayGeometry::default_array(int num_mics) {
  if (num_mics < 1 || num_mics > 4) {
    throw Error(Errc::kInvalidConfig, "default array supports 1 to 4 mics");
  }
  ArrayGeometry g = triangle();
  const Eigen::Vector3d centroid =
      (g.positions[0] + g.positions[1] + g.positions[2]) / 3.0;
  g.positions.push_back(centroid + Eigen::Vector3d(0.0, 0.0, 0.05));
  g.positions.resize(num_mics);
  return g;
}

Eigen::Vector3d direction_from_azimuth(double azimuth_rad, double elevation_rad) {
  return {std::cos(elevation_rad) * std::cos(azimuth_rad),
          std::cos(elevation_rad) * std::sin(azimuth_rad), std::sin(elevation_rad)};
}

Eigen::VectorXd arrival_delays(const ArrayGeometry& geometry, const Eigen::Vector3d& direction) {
  geometry.validate();
  const Eigen::Vector3d dir = direction.normalized();
  Eigen::VectorXd tau(geometry.num_mics());
  for (int m = 0; m < geometry.num_mics(); ++m) {
    tau[m] = -(geometry.positions[m] - geometry.positions[0]).dot(dir) / geometry.speed_of_sound;
  }
  return tau;
}

Eigen::VectorXd delay_signal(const Eigen::VectorXd& x, double delay_samples) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  const double rounded = std::round(delay_samples);
  if (std::abs(delay_samples - rounded) < 1e-9) {
    const auto shift = static_cast<Eigen::Index>(rounded);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = i - shift;
      if (src >= 0 && src < n) y[i] = x[src];
    }
    return y;
  }
  const auto base = static_cast<Eigen::Index>(std::floor(delay_samples));
  const Eigen::Index first = base - (kSincTaps / 2 - 1);
  const double half = kSincTaps / 2.0;
  Eigen::VectorXd h(kSincTaps);
  for (int j = 0; j < kSincTaps; ++j) {
    const double t = static_cast<double>(first + j) - delay_samples;
    const double sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double window = 0.42 + 0.5 * std::cos(std::numbers::pi * t / half) +
                          0.08 * std::cos(2.0 * std::numbers::pi * t / half);
    h[j] = sinc * window;
  }
  h /= h.sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kSincTaps; ++j) {
      const Eigen::Index src = i - (first + j);
      if (src >= 0 && src < n) acc += h[j] * x[src];
    }
    y[i] = acc;
  }
  return y;
}

Eigen::MatrixXd simulate_array(const Eigen::VectorXd& source, const Eigen::Vector3d& direction,
                               const ArrayGeometry& geometry, int sample_rate_hz) {
  const Eigen::VectorXd tau = arrival_delays(geometry, direction);
  Eigen::MatrixXd out(source.size(), geometry.num_mics());
  for (int m = 0; m < geometry.num_mics(); ++m) {
    out.col(m) = delay_signal(source, tau[m] * sample_rate_hz);
  }
  return out;
}

MixResult mix_at_snr(const Eigen::VectorXd& speech, const Eigen::VectorXd& noise, double snr_db) {
  if (noise.size() < speech.size()) {
    throw Error(Errc::kInsufficientSamples, "noise shorter than speech");
  }
  const Eigen::VectorXd n = noise.head(speech.size());
  const double ps = power(speech);
  const double pn = power(n);
  if (!(ps > 0.0) || !(pn > 0.0)) throw Error(Errc::kInvalidConfig, "zero-power input to mix_at_snr");
  double g = 0.0;
  if (!(std::isinf(snr_db) && snr_db > 0)) g = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  return {g, speech + g * n};
}

double Scene::measured_snr_db() const {
  const Eigen::Index active = num_samples() - context_boundary;
  const double s = speech_image.col(0).tail(active).squaredNorm();
  const double n = noise_image.col(0).tail(active).squaredNorm();
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  if (s == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(s / n);
}

Scene Scene::first_mics(int count) const {
  if (count < 1 || count > num_mics()) throw Error(Errc::kInvalidConfig, "mic count out of range");
  Scene s = *this;
  s.mixture = mixture.leftCols(count);
  s.speech_image = speech_image.leftCols(count);
  s.noise_image = noise_image.leftCols(count);
  s.config.geometry = config.geometry.first(count);
  return s;
}

void Scene::validate() const {
  if (mixture.rows() != speech_image.rows() || mixture.rows() != noise_image.rows() ||
      mixture.cols() != speech_image.cols() || mixture.cols() != noise_image.cols()) {
    throw Error(Errc::kMalformedScene, "scene components differ in shape");
  }
  if (mixture.cols() < 1) throw Error(Errc::kMalformedScene, "scene has no channels");
  if (context_boundary < 0 || context_boundary >= mixture.rows()) {
    throw Error(Errc::kMalformedScene, "context boundary outside the scene");
  }
}

Scene make_scene(const Eigen::VectorXd& speech, const Eigen::VectorXd& noise,
                 const SceneConfig& config) {
  config.geometry.validate();
  if (!(config.noise_context_s >= 0.0)) {
    throw Error(Errc::kInvalidConfig, "noise_context_s must be >= 0");
  }
  if (config.noise_directions.empty()) {
    throw Error(Errc::kInvalidConfig, "at least one noise direction is required");
  }
  const int fs = config.sample_rate_hz;
  const auto boundary = static_cast<Eigen::Index>(std::llround(config.noise_context_s * fs));
  const Eigen::Index total = boundary + speech.size();
  if (speech.size() == 0) throw Error(Errc::kInsufficientSamples, "empty speech clip");
  if (noise.size() < total) {
    throw Error(Errc::kInsufficientSamples, "insufficient noise duration: need " +
                                                std::to_string(total) + " samples, have " +
                                                std::to_string(noise.size()));
  }

  Eigen::VectorXd source = Eigen::VectorXd::Zero(total);
  source.tail(speech.size()) = speech;
  Eigen::MatrixXd speech_image =
      simulate_array(source, config.speech_direction, config.geometry, fs);
  // Interpolation tails of a fractional delay must not leak speech into the
  // context.
  speech_image.topRows(boundary).setZero();

  const Eigen::VectorXd segment = noise.head(total);
  const auto sources = static_cast<Eigen::Index>(config.noise_directions.size());
  Eigen::MatrixXd noise_image = Eigen::MatrixXd::Zero(total, config.geometry.num_mics());
  for (Eigen::Index i = 0; i < sources; ++i) {
    const Eigen::Index shift = i * total / sources;
    Eigen::VectorXd shifted(total);
    shifted.head(total - shift) = segment.tail(total - shift);
    shifted.tail(shift) = segment.head(shift);
    noise_image += simulate_array(shifted, config.noise_directions[i], config.geometry, fs);
  }

  double speech_gain = 1.0;
  double g = 1.0;
  if (std::isinf(config.snr_db) && config.snr_db < 0) {
    speech_gain = 0.0;
  } else {
    const double ps = power(speech_image.col(0).tail(speech.size()));
    const double pn = power(noise_image.col(0).tail(speech.size()));
    if (!(ps > 0.0)) throw Error(Errc::kInvalidConfig, "speech image has zero power");
    if (std::isinf(config.snr_db)) {
      g = 0.0;
    } else {
      if (!(pn > 0.0)) throw Error(Errc::kInvalidConfig, "noise image has zero power");
      g = std::sqrt(ps / (pn * std::pow(10.0, config.snr_db / 10.0)));
    }
  }
  speech_image *= speech_gain;
  noise_image *= g;

  const double peak = (speech_image + noise_image).cwiseAbs().maxCoeff();
  if (peak > kPeakLimit) {
    speech_image *= kPeakLimit / peak;
    noise_image *= kPeakLimit / peak;
  }
  if (config.quantize_f32) {
    quantize(speech_image);
    quantize(noise_image);
  }

  Scene scene;
  scene.speech_image = std::move(speech_image);
  scene.noise_image = std::move(noise_image);
  scene.mixture = scene.speech_image + scene.noise_image;
  scene.context_boundary = boundary;
  scene.noise_gain = g;
  scene.config = config;
  return scene;
}

std::vector<Scene> generate_sweep(const std::vector<SourceClip>& speech,
                                  const std::vector<SourceClip>& noise,
                                  const SweepOptions& options) {
  if (speech.empty() || noise.empty()) {
    throw Error(Errc::kInvalidConfig, "sweep needs at least one speech and one noise clip");
  }
  if (options.num_noise_sources < 1) {
    throw Error(Errc::kInvalidConfig, "num_noise_sources must be >= 1");
  }
  options.geometry.validate();
  std::vector<Scene> scenes;
  scenes.reserve(speech.size() * options.snr_levels_db.size());
  SplitMix64 root(options.seed);
  const auto boundary =
      static_cast<Eigen::Index>(std::llround(options.noise_context_s * options.sample_rate_hz));
  for (std::size_t i = 0; i < speech.size(); ++i) {
    SplitMix64 rng = root.fork(i);
    const SourceClip& clip = noise[rng.below(noise.size())];
    const Eigen::Index total = boundary + speech[i].samples.size();
    if (clip.samples.size() < total) {
      throw Error(Errc::kInsufficientSamples, "noise clip " + clip.id + " too short for " +
                                                  speech[i].id);
    }
    const auto offset = static_cast<Eigen::Index>(rng.below(clip.samples.size() - total + 1));
    const Eigen::VectorXd noise_segment = clip.samples.segment(offset, total);

    const double speech_az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    SceneConfig config;
    config.noise_context_s = options.noise_context_s;
    config.geometry = options.geometry;
    config.sample_rate_hz = options.sample_rate_hz;
    config.speech_direction = direction_from_azimuth(speech_az);
    config.noise_directions.clear();
    for (int s = 0; s < options.num_noise_sources; ++s) {
      // Keep noise at least 30 degrees away from the talker.
      const double az = speech_az + rng.uniform(std::numbers::pi / 6.0,
                                                2.0 * std::numbers::pi - std::numbers::pi / 6.0);
      config.noise_directions.push_back(direction_from_azimuth(az));
    }
    config.seed = options.seed;
    for (double snr : options.snr_levels_db) {
      config.snr_db = snr;
      Scene scene = make_scene(speech[i].samples, noise_segment, config);
      scene.id = speech[i].id + "_" + clip.id + "_" + snr_tag(snr);
      scenes.push_back(std::move(scene));
    }
  }
  return scenes;
}

Eigen::VectorXd synth_speech(double duration_s, int sample_rate_hz, SplitMix64& rng) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * sample_rate_hz));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  const double fs = sample_rate_hz;
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::Index pos = static_cast<Eigen::Index>(rng.uniform(0.03, 0.12) * fs);
  while (pos < n) {
    const auto len = static_cast<Eigen::Index>(rng.uniform(0.12, 0.30) * fs);
    const double f0_start = rng.uniform(90.0, 220.0);
    const double f0_end = f0_start * rng.uniform(0.85, 1.15);
    const double formants[3] = {rng.uniform(300.0, 900.0), rng.uniform(900.0, 2500.0),
                                rng.uniform(2300.0, 3300.0)};
    const double bandwidth = rng.uniform(80.0, 150.0);
    const int harmonics = static_cast<int>(4000.0 / std::max(f0_start, f0_end));
    std::vector<double> amp(harmonics), phase(harmonics);
    for (int h = 0; h < harmonics; ++h) {
      const double f = (h + 1) * f0_start;
      double a = 0.02;
      for (int i = 0; i < 3; ++i) {
        const double z = (f - formants[i]) / bandwidth;
        a += std::exp(-0.5 * z * z) / (1.0 + i);
      }
      amp[h] = a / std::sqrt(h + 1.0);
      phase[h] = rng.uniform(0.0, two_pi);
    }
    double f0_phase = 0.0;
    for (Eigen::Index t = 0; t < len && pos + t < n; ++t) {
      const double frac = static_cast<double>(t) / len;
      const double f0 = f0_start + (f0_end - f0_start) * frac;
      f0_phase += two_pi * f0 / fs;
      const double env = 0.5 - 0.5 * std::cos(two_pi * frac);
      double acc = 0.0;
      for (int h = 0; h < harmonics; ++h) acc += amp[h] * std::sin((h + 1) * f0_phase + phase[h]);
      out[pos + t] += env * acc;
    }
    pos += len;
    if (rng.uniform() < 0.4) {
      // Unvoiced burst: differenced white noise.
      const auto burst = static_cast<Eigen::Index>(rng.uniform(0.04, 0.08) * fs);
      double prev = 0.0;
      for (Eigen::Index t = 0; t < burst && pos + t < n; ++t) {
        const double w = rng.normal();
        const double env = std::sin(std::numbers::pi * t / burst);
        out[pos + t] += 0.15 * env * (w - prev);
        prev = w;
      }
      pos += burst;
    }
    pos += static_cast<Eigen::Index>(rng.uniform(0.04, 0.15) * fs);
  }
  const double rms = std::sqrt(power(out));
  if (rms > 0.0) out *= 0.05 / rms;
  return out;
}

Eigen::VectorXd synth_noise(double duration_s, int sample_rate_hz, SplitMix64& rng, NoiseKind kind) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * sample_rate_hz));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (kind == NoiseKind::kColored) {
    double state = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      state = 0.8 * state + rng.normal();
      out[i] = state;
    }
  } else {
    for (int talker = 0; talker < 6; ++talker) {
      SplitMix64 sub = rng.fork(static_cast<std::uint64_t>(talker));
      out += synth_speech(duration_s, sample_rate_hz, sub);
    }
  }
  const double rms = std::sqrt(power(out));
  if (rms > 0.0) out *= 0.05 / rms;
  return out;
}

}  // namespace cleanstream
