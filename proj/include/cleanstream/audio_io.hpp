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

#ifndef CLEANSTREAM_AUDIO_IO_HPP_
#define CLEANSTREAM_AUDIO_IO_HPP_

#include <string>

#include <Eigen/Dense>

namespace cleanstream {

enum class SampleFormat { kPcm16, kFloat32 };

// Deinterleaved audio: one column per channel, values in [-1, 1].
struct AudioBuffer {
  Eigen::MatrixXd samples;
  int sample_rate_hz = 16000;

  int num_channels() const { return static_cast<int>(samples.cols()); }
  Eigen::Index num_samples() const { return samples.rows(); }
};

// RIFF/WAVE with PCM16 or IEEE float32 data (plain or EXTENSIBLE fmt).
// Unknown chunks are skipped. Float samples outside [-1, 1] are rejected.
AudioBuffer read_wav(const std::string& path);

// As above, but fails with kSampleRateMismatch unless the file is at
// `expected_rate_hz`.
AudioBuffer read_wav(const std::string& path, int expected_rate_hz);

// Values are clamped to [-1, 1]; PCM16 uses round(x * 32768) saturated to
// the int16 range.
void write_wav(const AudioBuffer& buffer, const std::string& path,
               SampleFormat format = SampleFormat::kFloat32);

}  // namespace cleanstream

#endif  // CLEANSTREAM_AUDIO_IO_HPP_
