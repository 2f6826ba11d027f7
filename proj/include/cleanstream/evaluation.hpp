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

#ifndef CLEANSTREAM_EVALUATION_HPP_
#define CLEANSTREAM_EVALUATION_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "cleanstream/metrics.hpp"
#include "cleanstream/pipeline.hpp"
#include "cleanstream/simulator.hpp"

namespace cleanstream {

// A scene on disk is a directory holding scene.json plus float32 WAVs for the
// mixture and both images. The loader rebuilds the mixture as speech + noise
// so the decomposition is exact; mixture.wav is for listening only.
std::filesystem::path write_scene(const Scene& scene, const std::filesystem::path& dir);
Scene read_scene(const std::filesystem::path& scene_json);

struct ManifestEntry {
  std::string id;
  std::filesystem::path scene;  // absolute, or relative to the manifest
  double snr_db = 0.0;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Writes <out>/scenes/<id>/ for every scene and <out>/manifest.json.
Manifest write_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& out_dir);

// Scenes described by a simulation config file (see README). Relative WAV
// paths resolve against the config's directory.
std::vector<Scene> simulate_from_config(const std::filesystem::path& config_path);

// CLEANSTREAM_THREADS caps the pool; otherwise hardware concurrency.
int worker_count(int jobs);

struct EvaluationJob {
  EnhancementMethod method;
  int num_mics = 0;  // 0 = all scene channels
};

struct EvaluationReport {
  std::vector<MetricsRow> rows;  // sorted by method, mics, SNR label, scene id
  int failures = 0;
  std::vector<std::string> messages;  // one per failure, in scene order
};

// Every job runs on every manifest scene. A failing scene yields rows with
// status "error:<code>" and NaN metrics; the run carries on.
EvaluationReport evaluate(const Manifest& manifest, const std::vector<EvaluationJob>& jobs,
                          const MethodParams& params, int workers);
EvaluationReport evaluate(const std::vector<Scene>& scenes, const std::vector<EvaluationJob>& jobs,
                          const MethodParams& params, int workers);

void sort_rows(std::vector<MetricsRow>& rows);

struct SummaryRow {
  std::string method;
  int num_mics = 0;
  double snr_label_db = 0.0;
  int scenes = 0;
  int failures = 0;
  Stats input_snr;
  Stats output_snr;
  Stats snr_improvement;
  Stats si_sdr;
  Stats lsd;
  Stats mask_mse;
};

// One row per (method, mics, SNR label), over rows with status "ok".
std::vector<SummaryRow> summarize_rows(const std::vector<MetricsRow>& rows);

// Fixed-point with six decimals; non-finite values print as nan, inf, -inf.
std::string format_number(double value);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// <out>/<method>.csv per method present in the report, plus <out>/summary.csv.
std::vector<std::filesystem::path> write_reports(const EvaluationReport& report,
                                                 const std::filesystem::path& out_dir);

}  // namespace cleanstream

#endif  // CLEANSTREAM_EVALUATION_HPP_
