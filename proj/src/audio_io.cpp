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

#include "cleanstream/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "cleanstream/binary_io.hpp"
#include "cleanstream/error.hpp"

namespace cleanstream {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

std::uint32_t read_tag(std::istream& in, const char* what) {
  char tag[4];
  in.read(tag, 4);
  if (in.gcount() != 4) throw Error(Errc::kMalformedHeader, std::string("missing ") + what);
  std::uint32_t v;
  std::memcpy(&v, tag, 4);
  return v;
}

std::uint32_t tag_of(const char (&s)[5]) {
  std::uint32_t v;
  std::memcpy(&v, s, 4);
  return v;
}

std::uint32_t read_len(std::istream& in) {
  try {
    return binary::get_u32(in);
  } catch (const Error&) {
    throw Error(Errc::kMalformedHeader, "truncated chunk header");
  }
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  if (read_tag(in, "RIFF tag") != tag_of("RIFF")) throw Error(Errc::kMalformedHeader, "not a RIFF file");
  read_len(in);
  if (read_tag(in, "WAVE tag") != tag_of("WAVE")) throw Error(Errc::kMalformedHeader, "not a WAVE file");

  FmtChunk fmt;
  bool have_fmt = false;
  while (true) {
    char tag[4];
    in.read(tag, 4);
    if (in.gcount() != 4) throw Error(Errc::kMalformedHeader, "no data chunk in " + path);
    std::uint32_t id;
    std::memcpy(&id, tag, 4);
    const std::uint32_t len = read_len(in);
    if (id == tag_of("fmt ")) {
      if (len < 16) throw Error(Errc::kMalformedHeader, "fmt chunk too short");
      std::vector<char> body(len);
      in.read(body.data(), len);
      if (in.gcount() != static_cast<std::streamsize>(len)) {
        throw Error(Errc::kMalformedHeader, "truncated fmt chunk");
      }
      auto u16 = [&](int off) {
        return static_cast<std::uint16_t>(static_cast<unsigned char>(body[off]) |
                                          (static_cast<unsigned char>(body[off + 1]) << 8));
      };
      auto u32 = [&](int off) {
        return static_cast<std::uint32_t>(u16(off)) | (static_cast<std::uint32_t>(u16(off + 2)) << 16);
      };
      fmt.format = u16(0);
      fmt.channels = u16(2);
      fmt.sample_rate = u32(4);
      fmt.bits = u16(14);
      if (fmt.format == kFormatExtensible) {
        if (len < 40) throw Error(Errc::kMalformedHeader, "extensible fmt chunk too short");
        fmt.format = u16(24);  // first two bytes of the subformat GUID
      }
      if (len % 2 == 1) in.ignore(1);
      have_fmt = true;
    } else if (id == tag_of("data")) {
      if (!have_fmt) throw Error(Errc::kMalformedHeader, "data chunk before fmt chunk");
      if (fmt.channels == 0 || fmt.sample_rate == 0) {
        throw Error(Errc::kMalformedHeader, "fmt chunk declares zero channels or rate");
      }
      const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
      const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
      if (!pcm16 && !f32) {
        throw Error(Errc::kUnsupportedCodec, "unsupported codec: format " + std::to_string(fmt.format) +
                                                 ", " + std::to_string(fmt.bits) + " bits");
      }
      const std::uint32_t frame_bytes = fmt.channels * (fmt.bits / 8);
      if (len % frame_bytes != 0) throw Error(Errc::kTruncated, "data chunk is not whole frames");
      std::vector<unsigned char> raw(len);
      in.read(reinterpret_cast<char*>(raw.data()), len);
      if (in.gcount() != static_cast<std::streamsize>(len)) {
        throw Error(Errc::kTruncated, "truncated data in " + path);
      }
      const Eigen::Index frames = len / frame_bytes;
      AudioBuffer out;
      out.sample_rate_hz = static_cast<int>(fmt.sample_rate);
      out.samples.resize(frames, fmt.channels);
      std::size_t pos = 0;
      for (Eigen::Index n = 0; n < frames; ++n) {
        for (int c = 0; c < fmt.channels; ++c) {
          if (pcm16) {
            const auto v = static_cast<std::int16_t>(raw[pos] | (raw[pos + 1] << 8));
            out.samples(n, c) = v / 32768.0;
            pos += 2;
          } else {
            const std::uint32_t bits = static_cast<std::uint32_t>(raw[pos]) |
                                       (static_cast<std::uint32_t>(raw[pos + 1]) << 8) |
                                       (static_cast<std::uint32_t>(raw[pos + 2]) << 16) |
                                       (static_cast<std::uint32_t>(raw[pos + 3]) << 24);
            const float v = std::bit_cast<float>(bits);
            if (!(std::abs(v) <= 1.0f)) {
              throw Error(Errc::kOutOfRange, "float sample outside [-1, 1] in " + path);
            }
            out.samples(n, c) = v;
            pos += 4;
          }
        }
      }
      return out;
    } else {
      in.ignore(len + (len % 2));
      if (!in) throw Error(Errc::kMalformedHeader, "truncated chunk in " + path);
    }
  }
}

AudioBuffer read_wav(const std::string& path, int expected_rate_hz) {
  AudioBuffer out = read_wav(path);
  if (out.sample_rate_hz != expected_rate_hz) {
    throw Error(Errc::kSampleRateMismatch, path + " is at " + std::to_string(out.sample_rate_hz) +
                                               " Hz, expected " + std::to_string(expected_rate_hz));
  }
  return out;
}

void write_wav(const AudioBuffer& buffer, const std::string& path, SampleFormat format) {
  const int channels = buffer.num_channels();
  if (channels < 1 && buffer.num_samples() > 0) {
    throw Error(Errc::kInvalidConfig, "audio buffer has samples but no channels");
  }
  const int out_channels = std::max(channels, 1);
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint32_t frame_bytes = out_channels * bits / 8;
  const auto data_len = static_cast<std::uint32_t>(buffer.num_samples() * frame_bytes);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot open " + path + " for writing");
  out.write("RIFF", 4);
  binary::put_u32(out, 36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  binary::put_u32(out, 16);
  binary::put_u16(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  binary::put_u16(out, static_cast<std::uint16_t>(out_channels));
  binary::put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz));
  binary::put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz) * frame_bytes);
  binary::put_u16(out, static_cast<std::uint16_t>(frame_bytes));
  binary::put_u16(out, bits);
  out.write("data", 4);
  binary::put_u32(out, data_len);
  for (Eigen::Index n = 0; n < buffer.num_samples(); ++n) {
    for (int c = 0; c < channels; ++c) {
      const double v = std::clamp(buffer.samples(n, c), -1.0, 1.0);
      if (format == SampleFormat::kPcm16) {
        const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        binary::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
      } else {
        binary::put_f32(out, static_cast<float>(v));
      }
    }
  }
  if (!out) throw Error(Errc::kIo, "failed writing " + path);
}

}  // namespace cleanstream
