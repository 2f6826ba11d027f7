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

#ifndef CLEANSTREAM_BEAMFORMER_HPP_
#define CLEANSTREAM_BEAMFORMER_HPP_

#include <cmath>
#include <vector>

#include "cleanstream/error.hpp"
#include "cleanstream/stft.hpp"
#include "cleanstream/types.hpp"

namespace cleanstream {

// One Hermitian (M x M) sample covariance per frequency bin.
template <typename Scalar>
using SpatialCovariance = std::vector<ComplexMatrix<Scalar>>;

template <typename Scalar>
struct BeamformerWeights {
  ComplexMatrix<Scalar> weights;   // (M x bins)
  ComplexMatrix<Scalar> steering;  // (M x bins), unit norm
};

// Phi(k) = 1/T sum_n y(k,n) y(k,n)^H over frames [begin, end).
template <typename Scalar>
SpatialCovariance<Scalar> covariance(const Spectrogram<Scalar>& spec, int begin, int end) {
  if (begin < 0 || end > spec.num_frames() || end <= begin) {
    throw Error(Errc::kShapeMismatch, "covariance needs a non-empty frame range");
  }
  const int mics = spec.num_channels();
  const int bins = spec.num_bins();
  const Scalar scale = Scalar(1) / Scalar(end - begin);
  SpatialCovariance<Scalar> out;
  out.reserve(bins);
  ComplexMatrix<Scalar> block(mics, end - begin);
  for (int k = 0; k < bins; ++k) {
    for (int m = 0; m < mics; ++m) block.row(m) = spec.channel(m).row(k).segment(begin, end - begin);
    ComplexMatrix<Scalar> phi = (block * block.adjoint()) * scale;
    out.push_back(Scalar(0.5) * (phi + phi.adjoint()));
  }
  return out;
}

template <typename Scalar>
SpatialCovariance<Scalar> covariance(const Spectrogram<Scalar>& spec) {
  return covariance(spec, 0, spec.num_frames());
}

namespace detail {

template <typename Scalar>
void require_hermitian(const ComplexMatrix<Scalar>& m, const char* what) {
  if (m.rows() != m.cols()) throw Error(Errc::kShapeMismatch, std::string(what) + " is not square");
  const Scalar scale = std::max(Scalar(1), m.norm());
  if ((m - m.adjoint()).norm() > Scalar(1e-10) * scale) {
    throw Error(Errc::kNotHermitian, std::string(what) + " is not Hermitian");
  }
}

}  // namespace detail

// Unit-norm principal eigenvector with its largest-magnitude entry made
// real and positive.
template <typename Scalar>
ComplexVector<Scalar> principal_eigenvector(const ComplexMatrix<Scalar>& phi) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix<Scalar>> eig(phi);
  if (eig.info() != Eigen::Success) {
    throw Error(Errc::kSingularSystem, "eigendecomposition failed");
  }
  ComplexVector<Scalar> d = eig.eigenvectors().col(phi.rows() - 1);
  Eigen::Index idx = 0;
  d.cwiseAbs().maxCoeff(&idx);
  const Complex<Scalar> phase = d[idx] / std::abs(d[idx]);
  d *= std::conj(phase);
  d[idx] = Complex<Scalar>(d[idx].real(), Scalar(0));
  return d.normalized();
}

// Steering vector from the principal eigenvector of the speech covariance;
// MVDR weights w = Phi_N^-1 d / (d^H Phi_N^-1 d). Diagonal loading is
// relative: Phi_N + loading * trace(Phi_N)/M * I.
template <typename Scalar>
BeamformerWeights<Scalar> steer(const SpatialCovariance<Scalar>& speech_cov,
                                const SpatialCovariance<Scalar>& noise_cov,
                                double diagonal_loading = 1e-6) {
  if (speech_cov.size() != noise_cov.size() || speech_cov.empty()) {
    throw Error(Errc::kShapeMismatch, "speech and noise covariances differ in bin count");
  }
  const int bins = static_cast<int>(speech_cov.size());
  const int mics = static_cast<int>(speech_cov.front().rows());
  BeamformerWeights<Scalar> out{ComplexMatrix<Scalar>(mics, bins),
                                ComplexMatrix<Scalar>(mics, bins)};
  for (int k = 0; k < bins; ++k) {
    const auto& phi_s = speech_cov[k];
    const auto& phi_n = noise_cov[k];
    if (phi_s.rows() != mics || phi_n.rows() != mics) {
      throw Error(Errc::kShapeMismatch, "covariance dimension mismatch");
    }
    detail::require_hermitian(phi_s, "speech covariance");
    detail::require_hermitian(phi_n, "noise covariance");

    const ComplexVector<Scalar> d = principal_eigenvector(phi_s);
    const Scalar load = Scalar(diagonal_loading) * std::real(phi_n.trace()) / Scalar(mics);
    ComplexMatrix<Scalar> loaded = phi_n;
    loaded.diagonal().array() += load;
    Eigen::LDLT<ComplexMatrix<Scalar>> ldlt(loaded);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().real().minCoeff() > Scalar(0))) {
      throw Error(Errc::kSingularSystem, "loaded noise covariance is singular at bin " +
                                             std::to_string(k));
    }
    const ComplexVector<Scalar> num = ldlt.solve(d);
    const Complex<Scalar> denom = d.dot(num);
    out.steering.col(k) = d;
    out.weights.col(k) = num / denom;
  }
  return out;
}

// out(k,n) = w(k)^H y(k,n)
template <typename Scalar>
Spectrogram<Scalar> apply_beamformer(const BeamformerWeights<Scalar>& bf,
                                     const Spectrogram<Scalar>& spec) {
  if (bf.weights.rows() != spec.num_channels() || bf.weights.cols() != spec.num_bins()) {
    throw Error(Errc::kShapeMismatch, "beamformer weights do not match the spectrogram");
  }
  ComplexMatrix<Scalar> out = ComplexMatrix<Scalar>::Zero(spec.num_bins(), spec.num_frames());
  for (int m = 0; m < spec.num_channels(); ++m) {
    out += (spec.channel(m).array().colwise() * bf.weights.row(m).conjugate().transpose().array())
               .matrix();
  }
  return Spectrogram<Scalar>({std::move(out)}, spec.config());
}

}  // namespace cleanstream

#endif  // CLEANSTREAM_BEAMFORMER_HPP_
