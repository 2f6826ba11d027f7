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

#ifndef CLEANSTREAM_ERROR_HPP_
#define CLEANSTREAM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cleanstream {

enum class Errc {
  kInvalidConfig,
  kInsufficientSamples,
  kShapeMismatch,
  kCleanerFrozen,
  kContextTooShort,
  kSingularSystem,
  kNonFinite,
  kNotHermitian,
  kAlreadyLog,
  kBadMagic,
  kTruncated,
  kConfigMismatch,
  kUnsupportedVersion,
  kUnsupportedCodec,
  kMalformedHeader,
  kOutOfRange,
  kSampleRateMismatch,
  kIo,
  kMissingWeights,
  kMalformedScene,
};

const char* errc_name(Errc code);

// All library failures surface as this exception; code() distinguishes them.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cleanstream

#endif  // CLEANSTREAM_ERROR_HPP_
