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

#include "cleanstream/pipeline.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "cleanstream/beamformer.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/metrics.hpp"
#include "cleanstream/stft.hpp"

namespace cleanstream {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Components {
  Spectrogram<double> speech;
  Spectrogram<double> noise;
  Spectrogram<double> mixture;
};

double flat_snr_db(const Eigen::MatrixXd& s, const Eigen::MatrixXd& n) {
  return snr_db(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()),
                Eigen::Map<const Eigen::VectorXd>(n.data(), n.size()));
}

double improvement(double out, double in) {
  if (std::isinf(out) && std::isinf(in)) return kNaN;
  return out - in;
}

double safe_si_sdr(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  if (reference.squaredNorm() == 0.0) return kNaN;
  return si_sdr(estimate, reference);
}

}  // namespace

std::string method_name(EnhancementMethod method) {
  switch (method) {
    case EnhancementMethod::kPassthrough: return "passthrough";
    case EnhancementMethod::kCleaner: return "cleaner";
    case EnhancementMethod::kBeamformerOracle: return "beamformer_oracle";
    case EnhancementMethod::kCleanformerOracleMask: return "cleanformer_oracle_mask";
    case EnhancementMethod::kCleanformerModel: return "cleanformer_model";
  }
  return "unknown";
}

EnhancementMethod parse_method(const std::string& name) {
  for (auto m : {EnhancementMethod::kPassthrough, EnhancementMethod::kCleaner,
                 EnhancementMethod::kBeamformerOracle, EnhancementMethod::kCleanformerOracleMask,
                 EnhancementMethod::kCleanformerModel}) {
    if (method_name(m) == name) return m;
  }
  throw Error(Errc::kInvalidConfig, "unknown method '" + name + "'");
}

MethodOutput run_method(const Scene& full_scene, EnhancementMethod method,
                        const MethodParams& params) {
  full_scene.validate();
  const Scene scene = params.num_mics > 0 ? full_scene.first_mics(params.num_mics) : full_scene;
  const StftConfig& stft = params.mel.stft;
  if (scene.config.sample_rate_hz != stft.sample_rate_hz()) {
    throw Error(Errc::kSampleRateMismatch, "scene sample rate differs from the STFT config");
  }
  if (method == EnhancementMethod::kCleanformerModel && !params.weights) {
    throw Error(Errc::kMissingWeights, "cleanformer_model requires a weights file");
  }

  const int first = context_frame_count(scene.context_boundary, stft);
  const Spectrogram<double> spec_mix = analyze(scene.mixture, stft);
  const int frames = spec_mix.num_frames();
  if (first >= frames) throw Error(Errc::kMalformedScene, "scene has no frames after the context");
  const Spectrogram<double> spec_s = analyze(scene.speech_image, stft);
  const Spectrogram<double> spec_n = analyze(scene.noise_image, stft);

  // Past frames * hop the overlap-add tail is covered by fewer than
  // win/hop frames and any spectral change is amplified by 1/w there.
  const Eigen::Index region_begin = scene.context_boundary;
  const Eigen::Index region_len = static_cast<Eigen::Index>(frames) * stft.hop_len() - region_begin;
  if (region_len <= 0) throw Error(Errc::kMalformedScene, "scene has no samples after the context");
  const Eigen::Index synth_offset = static_cast<Eigen::Index>(first) * stft.hop_len();
  const Eigen::VectorXd clean_region = scene.speech_image.col(0).segment(region_begin, region_len);
  const Eigen::VectorXd noise_region = scene.noise_image.col(0).segment(region_begin, region_len);

  const Eigen::MatrixXd filterbank = mel_filterbank<double>(params.mel);
  const MelSpectrogram<double> clean_mel = to_mel(spec_s.frames(first, frames), filterbank);

  MetricsRow row;
  row.scene_id = scene.id;
  row.method = method_name(method);
  row.num_mics = scene.num_mics();
  row.snr_label_db = scene.config.snr_db;
  row.mask_mse = kNaN;

  CleanerConfig cleaner = params.cleaner;
  cleaner.num_mics = scene.num_mics();
  cleaner.reference_mic = 0;

  // Waveform-domain methods: resynthesise each component over the region.
  auto finish_waveform = [&](const Components& out) {
    auto region_of = [&](const Spectrogram<double>& s) {
      return Eigen::VectorXd(synthesize(s).segment(region_begin - synth_offset, region_len));
    };
    const Eigen::VectorXd s_hat = region_of(out.speech);
    const Eigen::VectorXd n_hat = region_of(out.noise);
    Eigen::VectorXd y_hat = region_of(out.mixture);
    row.snr_domain = "time";
    row.input_snr_db = snr_db(clean_region, noise_region);
    row.output_snr_db = snr_db(s_hat, n_hat);
    row.snr_improvement_db = improvement(row.output_snr_db, row.input_snr_db);
    row.si_sdr_db = safe_si_sdr(y_hat, clean_region);
    const MelSpectrogram<double> mel = to_mel(out.mixture, filterbank);
    row.lsd_db = log_spectral_distance(mel.values(), clean_mel.values(), params.mel.log_floor);
    return MethodOutput{to_log(mel, params.mel.log_floor), std::move(y_hat), std::nullopt, row};
  };

  switch (method) {
    case EnhancementMethod::kPassthrough: {
      Eigen::VectorXd y = scene.mixture.col(0).segment(region_begin, region_len);
      row.snr_domain = "time";
      row.input_snr_db = snr_db(clean_region, noise_region);
      row.output_snr_db = snr_db(clean_region, noise_region);
      row.snr_improvement_db = improvement(row.output_snr_db, row.input_snr_db);
      row.si_sdr_db = safe_si_sdr(y, clean_region);
      const MelSpectrogram<double> mel = to_mel(spec_mix.frames(first, frames), filterbank);
      row.lsd_db = log_spectral_distance(mel.values(), clean_mel.values(), params.mel.log_floor);
      return MethodOutput{to_log(mel, params.mel.log_floor), std::move(y), std::nullopt, row};
    }
    case EnhancementMethod::kCleaner: {
      CleanResult<double> run = clean_spectrogram(spec_mix, first, cleaner);
      Components out{apply_frozen(run.state, spec_s, first), apply_frozen(run.state, spec_n, first),
                     std::move(run.enhanced)};
      return finish_waveform(out);
    }
    case EnhancementMethod::kBeamformerOracle: {
      const auto post_s = spec_s.frames(first, frames);
      const auto post_n = spec_n.frames(first, frames);
      SpatialCovariance<double> phi_s = covariance(post_s);
      SpatialCovariance<double> phi_n = covariance(post_n);
      for (auto& phi : phi_n) {
        // Noise-free scenes: fall back to a white-noise model.
        if (!(std::real(phi.trace()) > 0.0)) phi.setIdentity();
      }
      const BeamformerWeights<double> bf = steer(phi_s, phi_n, params.diagonal_loading);
      // w^H d = 1 returns the speech in steering units; scaling by the
      // reference entry of d brings it back to the reference mic image.
      auto to_reference = [&](const Spectrogram<double>& in) {
        Eigen::MatrixXcd bins = apply_beamformer(bf, in).channel(0);
        bins.array().colwise() *= bf.steering.row(0).transpose().array();
        return Spectrogram<double>({std::move(bins)}, stft);
      };
      Components out{to_reference(post_s), to_reference(post_n),
                     to_reference(spec_mix.frames(first, frames))};
      return finish_waveform(out);
    }
    case EnhancementMethod::kCleanformerOracleMask:
    case EnhancementMethod::kCleanformerModel: {
      const MelSpectrogram<double> noise_mel = to_mel(spec_n.frames(first, frames), filterbank);
      const MelSpectrogram<double> noisy =
          params.additive_mel
              ? MelSpectrogram<double>(clean_mel.values() + noise_mel.values(), false)
              : to_mel(spec_mix.frames(first, frames), filterbank);
      const Mask<double> oracle = ideal_ratio_mask(clean_mel, noise_mel);

      std::optional<Mask<double>> mask;
      if (method == EnhancementMethod::kCleanformerOracleMask) {
        mask = oracle;
      } else {
        const CleanResult<double> run = clean_spectrogram(spec_mix, first, cleaner);
        const auto raw_log = to_log(noisy, params.mel.log_floor);
        const auto cleaned_log = to_log(to_mel(run.enhanced, filterbank), params.mel.log_floor);
        const StackedFeatures<double> stacked = stack(raw_log, cleaned_log);
        const Mask<float> coarse = forward(Eigen::MatrixXf(stacked.values.cast<float>()),
                                           *params.weights);
        // Each stacked mask frame holds until the next one arrives.
        Eigen::MatrixXd expanded(noisy.num_frames(), coarse.num_mel());
        for (int n = 0; n < noisy.num_frames(); ++n) {
          expanded.row(n) = coarse.values().row(n / kStackHop).cast<double>();
        }
        mask = Mask<double>(std::move(expanded));
      }
      if (mask->num_mel() != noisy.num_mel()) {
        throw Error(Errc::kShapeMismatch, "mask width differs from the mel configuration");
      }

      const MelSpectrogram<double> enhanced = apply_mask(noisy, *mask, params.mask_post);
      const Eigen::MatrixXd gain =
          mask->values().array().max(params.mask_post.beta).pow(params.mask_post.alpha).matrix();
      row.snr_domain = "mel";
      row.input_snr_db = flat_snr_db(clean_mel.values(), noise_mel.values());
      row.output_snr_db =
          flat_snr_db(clean_mel.values().cwiseProduct(gain), noise_mel.values().cwiseProduct(gain));
      row.snr_improvement_db = improvement(row.output_snr_db, row.input_snr_db);
      row.si_sdr_db = kNaN;
      row.lsd_db = log_spectral_distance(enhanced.values(), clean_mel.values(), params.mel.log_floor);
      row.mask_mse = mean_squared_error(mask->values(), oracle.values());
      return MethodOutput{to_log(enhanced, params.mel.log_floor), std::nullopt, std::move(mask), row};
    }
  }
  throw Error(Errc::kInvalidConfig, "unhandled method");
}

}  // namespace cleanstream
