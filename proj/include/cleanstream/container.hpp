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

#ifndef CLEANSTREAM_CONTAINER_HPP_
#define CLEANSTREAM_CONTAINER_HPP_

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace cleanstream {

enum class ContainerKind : std::uint32_t { kFeatures = 1, kMask = 2, kMel = 3 };

// Float32 matrix exchange format for features and masks:
//   "CSFT" | u32 version (1) | u32 kind | u32 rows | u32 cols |
//   u64 config hash | rows*cols float32, row-major
// All integers and floats little-endian.
struct FloatContainer {
  ContainerKind kind = ContainerKind::kFeatures;
  std::uint64_t config_hash = 0;
  Eigen::MatrixXf values;
};

void write_container(const FloatContainer& container, const std::string& path);
FloatContainer read_container(const std::string& path);

}  // namespace cleanstream

#endif  // CLEANSTREAM_CONTAINER_HPP_
