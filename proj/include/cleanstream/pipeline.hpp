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

#ifndef CLEANSTREAM_PIPELINE_HPP_
#define CLEANSTREAM_PIPELINE_HPP_

#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cleanstream/cleaner.hpp"
#include "cleanstream/conformer.hpp"
#include "cleanstream/features.hpp"
#include "cleanstream/mask.hpp"
#include "cleanstream/simulator.hpp"

namespace cleanstream {

enum class EnhancementMethod {
  kPassthrough,
  kCleaner,
  kBeamformerOracle,
  kCleanformerOracleMask,
  kCleanformerModel,
};

std::string method_name(EnhancementMethod method);
EnhancementMethod parse_method(const std::string& name);

struct MethodParams {
  CleanerConfig cleaner;  // num_mics and reference_mic are taken from the scene
  MaskPostConfig mask_post;
  MelConfig mel;
  double diagonal_loading = 1e-6;
  // Build the noisy mel as X + N instead of the mel of the mixture STFT.
  bool additive_mel = false;
  int num_mics = 0;  // 0 = every scene channel
  std::shared_ptr<const ConformerWeights<float>> weights;
};

// One evaluated (scene, method, mic count). Waveform methods report SNRs in
// the time domain over [context_boundary, frames * hop); mask methods
// report them on mel magnitudes over the post-context frames. Undefined
// metrics are NaN.
struct MetricsRow {
  std::string scene_id;
  std::string method;
  int num_mics = 0;
  double snr_label_db = 0.0;
  std::string snr_domain;
  double input_snr_db = 0.0;
  double output_snr_db = 0.0;
  double snr_improvement_db = 0.0;
  double si_sdr_db = 0.0;
  double lsd_db = 0.0;
  double mask_mse = 0.0;
  std::string status = "ok";
};

struct MethodOutput {
  MelSpectrogram<double> enhanced_log_mel;  // post-context frames
  std::optional<Eigen::VectorXd> waveform;  // samples [context_boundary, frames * hop)
  std::optional<Mask<double>> mask;
  MetricsRow row;
};

// The cleaner adapts on the context frames only. Speech and noise images are
// pushed separately through every linear stage to track components.
MethodOutput run_method(const Scene& scene, EnhancementMethod method, const MethodParams& params);

}  // namespace cleanstream

#endif  // CLEANSTREAM_PIPELINE_HPP_
