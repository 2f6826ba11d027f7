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

// cleanstream command-line front end. Exit codes: 0 success, 1 when any
// scene fails, 2 on configuration or usage errors.

#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cleanstream/audio_io.hpp"
#include "cleanstream/conformer.hpp"
#include "cleanstream/container.hpp"
#include "cleanstream/error.hpp"
#include "cleanstream/evaluation.hpp"
#include "cleanstream/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cleanstream;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSceneFailure = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string weights;
  double alpha = 0.5;
  double beta = 0.01;
  double forgetting_factor = 0.9995;
  int taps = 3;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--weights", o.weights, "Conformer weights file (cleanformer_model)");
  cmd->add_option("--alpha", o.alpha, "Mask exponent")->capture_default_str();
  cmd->add_option("--beta", o.beta, "Mask floor")->capture_default_str();
  cmd->add_option("--forgetting-factor", o.forgetting_factor, "Cleaner RLS forgetting factor")
      ->capture_default_str();
  cmd->add_option("--taps", o.taps, "Cleaner taps per microphone")->capture_default_str();
}

MethodParams make_params(const CommonOptions& o) {
  MethodParams p;
  p.mask_post.alpha = o.alpha;
  p.mask_post.beta = o.beta;
  p.mask_post.validate();
  p.cleaner.forgetting_factor = o.forgetting_factor;
  p.cleaner.taps_per_mic = o.taps;
  p.cleaner.validate();
  if (!o.weights.empty()) {
    p.weights = std::make_shared<const ConformerWeights<float>>(load_weights<float>(o.weights));
  }
  return p;
}

std::vector<EnhancementMethod> parse_methods(const std::string& list) {
  std::vector<EnhancementMethod> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw Error(Errc::kInvalidConfig, "no methods given");
  return out;
}

bool is_config_error(Errc code) {
  switch (code) {
    case Errc::kInvalidConfig:
    case Errc::kMissingWeights:
    case Errc::kConfigMismatch:
      return true;
    default:
      return false;
  }
}

int report_and_exit(const EvaluationReport& report, const fs::path& out) {
  for (const auto& path : write_reports(report, out)) std::cout << path.string() << '\n';
  for (const auto& m : report.messages) std::cerr << "scene failed: " << m << '\n';
  if (report.failures > 0) {
    std::cerr << report.failures << " of " << report.rows.size() << " runs failed\n";
    return kExitSceneFailure;
  }
  return kExitOk;
}

int run_simulate(const std::string& config, const std::string& out) {
  const auto scenes = simulate_from_config(config);
  const Manifest m = write_dataset(scenes, out);
  std::cout << "wrote " << m.entries.size() << " scenes to " << (fs::path(out) / "manifest.json")
            << '\n';
  return kExitOk;
}

int run_enhance(const std::string& scene_path, const std::string& method_str, int mics,
                const CommonOptions& common, const std::string& out) {
  const EnhancementMethod method = parse_method(method_str);
  MethodParams params = make_params(common);
  params.num_mics = mics;
  if (method == EnhancementMethod::kCleanformerModel && !params.weights) {
    throw Error(Errc::kMissingWeights, "cleanformer_model requires --weights");
  }
  Scene scene;
  std::optional<MethodOutput> found;
  try {
    scene = read_scene(scene_path);
    found = run_method(scene, method, params);
  } catch (const Error& e) {
    if (is_config_error(e.code())) throw;
    std::cerr << "scene failed: " << e.what() << '\n';
    return kExitSceneFailure;
  }
  const MethodOutput& result = *found;
  fs::create_directories(out);
  const fs::path dir(out);
  const std::uint64_t hash = params.mel.hash();
  write_container({ContainerKind::kMel, hash, result.enhanced_log_mel.values().cast<float>()},
                  (dir / "enhanced_log_mel.csft").string());
  if (result.mask) {
    write_container({ContainerKind::kMask, hash, result.mask->values().cast<float>()},
                    (dir / "mask.csft").string());
  }
  if (result.waveform) {
    write_wav({*result.waveform, scene.config.sample_rate_hz}, (dir / "enhanced.wav").string());
  }
  std::ofstream csv(dir / "metrics.csv");
  csv << metrics_csv({result.row});
  std::cout << metrics_csv({result.row});
  return kExitOk;
}

int run_evaluate(const std::string& manifest_path, const std::string& methods,
                 const std::vector<int>& mics, const CommonOptions& common, const std::string& out) {
  const Manifest manifest = read_manifest(manifest_path);
  const MethodParams params = make_params(common);
  std::vector<EvaluationJob> jobs;
  for (auto method : parse_methods(methods)) {
    for (int m : mics) {
      if (m < 0) throw Error(Errc::kInvalidConfig, "mic counts must be positive");
      jobs.push_back({method, m});
    }
  }
  const int workers = worker_count(static_cast<int>(manifest.entries.size()));
  return report_and_exit(evaluate(manifest, jobs, params, workers), out);
}

int run_init_weights(const std::string& out, std::uint64_t seed) {
  const ConformerConfig config;
  save_weights(init_weights<float>(config, seed), out);
  std::cout << "wrote " << count_params(config) << " parameters to " << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multichannel streaming speech enhancement toolkit"};
  app.require_subcommand(1);

  std::string config, out, scene, method = "cleaner", manifest, methods = "passthrough,cleaner";
  int mics = 0;
  std::vector<int> sweep_mics = {2, 3, 4};
  std::uint64_t seed = 0;
  CommonOptions enhance_opts, evaluate_opts, sweep_opts;

  auto* simulate = app.add_subcommand("simulate", "Generate a scene set from a JSON config");
  simulate->add_option("--config", config, "Simulation config (JSON)")->required();
  simulate->add_option("--out", out, "Output directory")->required();

  auto* enhance = app.add_subcommand("enhance", "Run one method on one scene");
  enhance->add_option("--scene", scene, "scene.json")->required();
  enhance->add_option("--method", method, "Method name")->capture_default_str();
  enhance->add_option("--mics", mics, "Use the first N microphones (0 = all)");
  enhance->add_option("--out", out, "Output directory")->required();
  add_common(enhance, enhance_opts);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate methods over a manifest");
  evaluate_cmd->add_option("--manifest", manifest, "manifest.json")->required();
  evaluate_cmd->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  evaluate_cmd->add_option("--out", out, "Output directory")->required();
  add_common(evaluate_cmd, evaluate_opts);

  auto* sweep = app.add_subcommand("sweep", "Evaluate methods across microphone counts");
  sweep->add_option("--manifest", manifest, "manifest.json")->required();
  sweep->add_option("--mics", sweep_mics, "Comma-separated mic counts")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  sweep->add_option("--out", out, "Output directory")->required();
  add_common(sweep, sweep_opts);

  auto* init = app.add_subcommand("init-weights", "Write randomly initialised conformer weights");
  init->add_option("--out", out, "Weights file")->required();
  init->add_option("--seed", seed, "Initialisation seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(config, out);
    if (*enhance) return run_enhance(scene, method, mics, enhance_opts, out);
    if (*evaluate_cmd) return run_evaluate(manifest, methods, {0}, evaluate_opts, out);
    if (*sweep) {
      if (sweep_mics.empty()) throw Error(Errc::kInvalidConfig, "no mic counts given");
      return run_evaluate(manifest, methods, sweep_mics, sweep_opts, out);
    }
    if (*init) return run_init_weights(out, seed);
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
