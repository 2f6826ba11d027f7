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

#ifndef CLEANSTREAM_TYPES_HPP_
#define CLEANSTREAM_TYPES_HPP_

#include <complex>

#include <Eigen/Dense>

namespace cleanstream {

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using ComplexMatrix = Matrix<Complex<Scalar>>;

template <typename Scalar>
using ComplexVector = Vector<Complex<Scalar>>;

// Multichannel audio: one column per channel, one row per sample.
template <typename Scalar>
using Multichannel = Matrix<Scalar>;

}  // namespace cleanstream

#endif  // CLEANSTREAM_TYPES_HPP_
