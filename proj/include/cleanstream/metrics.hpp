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

#ifndef CLEANSTREAM_METRICS_HPP_
#define CLEANSTREAM_METRICS_HPP_

#include <vector>

#include <Eigen/Dense>

namespace cleanstream {

// 10 log10(sum s^2 / sum n^2); +inf when the noise is all zero.
double snr_db(const Eigen::Ref<const Eigen::VectorXd>& signal,
              const Eigen::Ref<const Eigen::VectorXd>& noise);

// Scale-invariant SDR with alpha = <e, r> / ||r||^2. Returns +inf when the
// residual is below 1e-24 of the target energy (estimate is a scaled copy).
double si_sdr(const Eigen::Ref<const Eigen::VectorXd>& estimate,
              const Eigen::Ref<const Eigen::VectorXd>& reference);

// Mean over frames of the RMS (over bins) difference in dB between two
// nonnegative magnitude matrices indexed (frame, bin): 20 log10 with both
// sides floored at `floor`.
double log_spectral_distance(const Eigen::Ref<const Eigen::MatrixXd>& estimate,
                             const Eigen::Ref<const Eigen::MatrixXd>& reference,
                             double floor = 1e-5);

double mean_squared_error(const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& b);

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  int count = 0;
};

// Ignores NaN entries; infinite entries propagate.
Stats summarize(const std::vector<double>& values);

}  // namespace cleanstream

#endif  // CLEANSTREAM_METRICS_HPP_
