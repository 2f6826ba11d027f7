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

#include "cleanstream/metrics.hpp"

#include <cmath>
#include <limits>

#include "cleanstream/error.hpp"

namespace cleanstream {

double snr_db(const Eigen::Ref<const Eigen::VectorXd>& signal,
              const Eigen::Ref<const Eigen::VectorXd>& noise) {
  if (signal.size() != noise.size()) throw Error(Errc::kShapeMismatch, "snr_db: length mismatch");
  const double n = noise.squaredNorm();
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal.squaredNorm() / n);
}

double si_sdr(const Eigen::Ref<const Eigen::VectorXd>& estimate,
              const Eigen::Ref<const Eigen::VectorXd>& reference) {
  if (estimate.size() != reference.size()) throw Error(Errc::kShapeMismatch, "si_sdr: length mismatch");
  const double rr = reference.squaredNorm();
  if (rr == 0.0) throw Error(Errc::kInvalidConfig, "si_sdr: zero reference");
  const double alpha = estimate.dot(reference) / rr;
  const Eigen::VectorXd target = alpha * reference;
  const double t = target.squaredNorm();
  const double e = (estimate - target).squaredNorm();
  if (e <= 1e-24 * t) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(t / e);
}

double log_spectral_distance(const Eigen::Ref<const Eigen::MatrixXd>& estimate,
                             const Eigen::Ref<const Eigen::MatrixXd>& reference, double floor) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols()) {
    throw Error(Errc::kShapeMismatch, "log_spectral_distance: shape mismatch");
  }
  if (estimate.rows() == 0 || estimate.cols() == 0) return 0.0;
  const Eigen::ArrayXXd diff =
      20.0 * (estimate.array().max(floor).log10() - reference.array().max(floor).log10());
  return diff.square().rowwise().mean().sqrt().mean();
}

double mean_squared_error(const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::kShapeMismatch, "mean_squared_error: shape mismatch");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

Stats summarize(const std::vector<double>& values) {
  Stats s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = sum / s.count;
  double acc = 0.0;
  for (double v : values) {
    if (!std::isnan(v)) acc += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::isinf(s.mean) ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(acc / s.count);
  return s;
}

}  // namespace cleanstream
