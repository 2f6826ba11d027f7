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

#include "cleanstream/container.hpp"

#include <fstream>
#include <sstream>

#include "cleanstream/binary_io.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/features.hpp"

namespace cleanstream {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidConfig: return "invalid config";
    case Errc::kInsufficientSamples: return "insufficient samples";
    case Errc::kShapeMismatch: return "shape mismatch";
    case Errc::kCleanerFrozen: return "cleaner frozen";
    case Errc::kContextTooShort: return "context too short";
    case Errc::kSingularSystem: return "singular system";
    case Errc::kNonFinite: return "non-finite value";
    case Errc::kNotHermitian: return "not hermitian";
    case Errc::kAlreadyLog: return "already log";
    case Errc::kBadMagic: return "bad magic";
    case Errc::kTruncated: return "truncated container";
    case Errc::kConfigMismatch: return "config mismatch";
    case Errc::kUnsupportedVersion: return "unsupported version";
    case Errc::kUnsupportedCodec: return "unsupported codec";
    case Errc::kMalformedHeader: return "malformed header";
    case Errc::kOutOfRange: return "out of range";
    case Errc::kSampleRateMismatch: return "sample rate mismatch";
    case Errc::kIo: return "i/o error";
    case Errc::kMissingWeights: return "missing weights";
    case Errc::kMalformedScene: return "malformed scene";
  }
  return "unknown";
}

std::uint64_t MelConfig::hash() const {
  std::ostringstream s;
  s.precision(17);
  s << "mel:" << num_mel << ':' << fmin_hz << ':' << fmax_hz << ':' << log_floor
    << ":stft:" << stft.sample_rate_hz() << ':' << stft.window_len() << ':' << stft.hop_len()
    << ':' << stft.fft_size();
  return binary::fnv1a(s.str());
}

void write_container(const FloatContainer& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot open " + path + " for writing");
  out.write("CSFT", 4);
  binary::put_u32(out, 1);
  binary::put_u32(out, static_cast<std::uint32_t>(c.kind));
  binary::put_u32(out, static_cast<std::uint32_t>(c.values.rows()));
  binary::put_u32(out, static_cast<std::uint32_t>(c.values.cols()));
  binary::put_u64(out, c.config_hash);
  for (Eigen::Index r = 0; r < c.values.rows(); ++r) {
    for (Eigen::Index col = 0; col < c.values.cols(); ++col) binary::put_f32(out, c.values(r, col));
  }
  if (!out) throw Error(Errc::kIo, "failed writing " + path);
}

FloatContainer read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  binary::expect_magic(in, "CSFT");
  const std::uint32_t version = binary::get_u32(in);
  if (version != 1) throw Error(Errc::kUnsupportedVersion, "unsupported container version");
  FloatContainer c;
  const std::uint32_t kind = binary::get_u32(in);
  if (kind < 1 || kind > 3) throw Error(Errc::kMalformedHeader, "unknown container kind");
  c.kind = static_cast<ContainerKind>(kind);
  const std::uint32_t rows = binary::get_u32(in);
  const std::uint32_t cols = binary::get_u32(in);
  c.config_hash = binary::get_u64(in);
  c.values.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t col = 0; col < cols; ++col) c.values(r, col) = binary::get_f32(in);
  }
  return c;
}

}  // namespace cleanstream
