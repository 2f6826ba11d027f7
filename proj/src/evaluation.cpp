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

#include "cleanstream/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cleanstream/audio_io.hpp"
#include "cleanstream/error.hpp"

namespace cleanstream {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSceneVersion = 1;

// JSON has no infinities; they travel as the strings "inf" and "-inf".
json encode_db(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

double decode_db(const json& value) {
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(Errc::kInvalidConfig, "bad SNR value '" + s + "'");
  }
  if (!value.is_number()) throw Error(Errc::kInvalidConfig, "SNR must be a number");
  return value.get<double>();
}

json encode_vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d decode_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::kInvalidConfig, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json encode_geometry(const ArrayGeometry& g) {
  json positions = json::array();
  for (const auto& p : g.positions) positions.push_back(encode_vec3(p));
  return {{"positions", positions}, {"speed_of_sound", g.speed_of_sound}};
}

ArrayGeometry decode_geometry(const json& j) {
  ArrayGeometry g;
  g.positions.clear();
  for (const auto& p : j.at("positions")) g.positions.push_back(decode_vec3(p));
  g.speed_of_sound = j.value("speed_of_sound", 343.0);
  g.validate();
  return g;
}

json read_json(const fs::path& path, Errc code) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(code, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
}

Eigen::MatrixXd load_channels(const fs::path& path, int rate) {
  return read_wav(path.string(), rate).samples;
}

MetricsRow failed_row(const std::string& id, const EvaluationJob& job, double snr,
                      const std::string& status) {
  MetricsRow row;
  row.scene_id = id;
  row.method = method_name(job.method);
  row.num_mics = job.num_mics;
  row.snr_label_db = snr;
  row.snr_domain = "";
  row.input_snr_db = row.output_snr_db = row.snr_improvement_db = kNaN;
  row.si_sdr_db = row.lsd_db = row.mask_mse = kNaN;
  row.status = status;
  return row;
}

std::string status_of(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string("error:") + errc_name(err->code());
  }
  return "error:internal";
}

struct SceneSource {
  std::size_t count;
  std::function<std::string(std::size_t)> id;
  std::function<double(std::size_t)> snr;
  std::function<Scene(std::size_t)> load;
};

EvaluationReport run_pool(const SceneSource& source, const std::vector<EvaluationJob>& jobs,
                          const MethodParams& params, int workers) {
  if (jobs.empty()) throw Error(Errc::kInvalidConfig, "no methods to evaluate");
  for (const auto& job : jobs) {
    if (job.method == EnhancementMethod::kCleanformerModel && !params.weights) {
      throw Error(Errc::kMissingWeights, "cleanformer_model requires a weights file");
    }
  }
  std::vector<std::vector<MetricsRow>> per_scene(source.count);
  std::vector<std::vector<std::string>> notes(source.count);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < source.count; i = next++) {
      auto& rows = per_scene[i];
      Scene scene;
      try {
        scene = source.load(i);
      } catch (const std::exception& e) {
        for (const auto& job : jobs) {
          rows.push_back(failed_row(source.id(i), job, source.snr(i), status_of(e)));
        }
        notes[i].push_back(source.id(i) + ": " + e.what());
        continue;
      }
      for (const auto& job : jobs) {
        MethodParams p = params;
        p.num_mics = job.num_mics;
        try {
          rows.push_back(run_method(scene, job.method, p).row);
        } catch (const std::exception& e) {
          rows.push_back(failed_row(scene.id, job, scene.config.snr_db, status_of(e)));
          notes[i].push_back(scene.id + " " + method_name(job.method) + ": " + e.what());
        }
      }
    }
  };

  const int n = std::max(1, std::min<int>(workers, static_cast<int>(source.count)));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }

  EvaluationReport report;
  for (auto& rows : per_scene) {
    for (auto& row : rows) {
      if (row.status != "ok") ++report.failures;
      report.rows.push_back(std::move(row));
    }
  }
  for (auto& n : notes) {
    for (auto& m : n) report.messages.push_back(std::move(m));
  }
  sort_rows(report.rows);
  return report;
}

void add_stat_columns(std::ostringstream& out, const Stats& s) {
  out << ',' << format_number(s.mean) << ',' << format_number(s.stddev);
}

}  // namespace

fs::path write_scene(const Scene& scene, const fs::path& dir) {
  scene.validate();
  fs::create_directories(dir);
  const int rate = scene.config.sample_rate_hz;
  write_wav({scene.mixture, rate}, (dir / "mixture.wav").string());
  write_wav({scene.speech_image, rate}, (dir / "speech.wav").string());
  write_wav({scene.noise_image, rate}, (dir / "noise.wav").string());

  json noise_dirs = json::array();
  for (const auto& d : scene.config.noise_directions) noise_dirs.push_back(encode_vec3(d));
  const json j = {
      {"version", kSceneVersion},
      {"id", scene.id},
      {"sample_rate_hz", rate},
      {"num_mics", scene.num_mics()},
      {"num_samples", scene.num_samples()},
      {"context_boundary", scene.context_boundary},
      {"snr_db", encode_db(scene.config.snr_db)},
      {"noise_gain", scene.noise_gain},
      {"seed", scene.config.seed},
      {"noise_context_s", scene.config.noise_context_s},
      {"geometry", encode_geometry(scene.config.geometry)},
      {"speech_direction", encode_vec3(scene.config.speech_direction)},
      {"noise_directions", noise_dirs},
      {"files", {{"mixture", "mixture.wav"}, {"speech_image", "speech.wav"},
                 {"noise_image", "noise.wav"}}},
  };
  const fs::path path = dir / "scene.json";
  write_text(path, j.dump(2) + "\n");
  return path;
}

Scene read_scene(const fs::path& scene_json) {
  const json j = read_json(scene_json, Errc::kMalformedScene);
  Scene scene;
  try {
    if (j.at("version").get<int>() != kSceneVersion) {
      throw Error(Errc::kUnsupportedVersion, "unsupported scene version");
    }
    scene.id = j.at("id").get<std::string>();
    auto& c = scene.config;
    c.sample_rate_hz = j.at("sample_rate_hz").get<int>();
    c.snr_db = decode_db(j.at("snr_db"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.noise_context_s = j.at("noise_context_s").get<double>();
    c.geometry = decode_geometry(j.at("geometry"));
    c.speech_direction = decode_vec3(j.at("speech_direction"));
    c.noise_directions.clear();
    for (const auto& d : j.at("noise_directions")) c.noise_directions.push_back(decode_vec3(d));
    scene.context_boundary = j.at("context_boundary").get<Eigen::Index>();
    scene.noise_gain = j.at("noise_gain").get<double>();

    const fs::path dir = scene_json.parent_path();
    const auto& files = j.at("files");
    scene.speech_image =
        load_channels(dir / files.at("speech_image").get<std::string>(), c.sample_rate_hz);
    scene.noise_image =
        load_channels(dir / files.at("noise_image").get<std::string>(), c.sample_rate_hz);
    if (scene.speech_image.rows() != j.at("num_samples").get<Eigen::Index>() ||
        scene.speech_image.cols() != j.at("num_mics").get<int>()) {
      throw Error(Errc::kMalformedScene, "scene audio does not match its header");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kMalformedScene, scene_json.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kInvalidConfig) {
      throw Error(Errc::kMalformedScene, scene_json.string() + ": " + e.what());
    }
    throw;
  }
  if (scene.noise_image.rows() != scene.speech_image.rows() ||
      scene.noise_image.cols() != scene.speech_image.cols()) {
    throw Error(Errc::kMalformedScene, "speech and noise images differ in shape");
  }
  if (scene.config.geometry.num_mics() != scene.speech_image.cols()) {
    throw Error(Errc::kMalformedScene, "geometry does not match the channel count");
  }
  scene.mixture = scene.speech_image + scene.noise_image;
  scene.validate();
  return scene;
}

fs::path Manifest::resolve(const ManifestEntry& entry) const {
  return entry.scene.is_absolute() ? entry.scene : base_dir / entry.scene;
}

Manifest read_manifest(const fs::path& path) {
  const json j = read_json(path, Errc::kInvalidConfig);
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    for (const auto& e : j.at("scenes")) {
      m.entries.push_back({e.at("id").get<std::string>(), fs::path(e.at("path").get<std::string>()),
                           decode_db(e.at("snr_db"))});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidConfig, path.string() + ": " + e.what());
  }
  if (m.entries.empty()) throw Error(Errc::kInvalidConfig, "manifest lists no scenes");
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    if (!ids.insert(e.id).second) throw Error(Errc::kInvalidConfig, "duplicate scene id " + e.id);
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  json scenes = json::array();
  for (const auto& e : manifest.entries) {
    scenes.push_back({{"id", e.id}, {"path", e.scene.generic_string()},
                      {"snr_db", encode_db(e.snr_db)}});
  }
  write_text(path, json{{"scenes", scenes}}.dump(2) + "\n");
}

Manifest write_dataset(const std::vector<Scene>& scenes, const fs::path& out_dir) {
  Manifest m;
  m.base_dir = out_dir;
  for (const auto& scene : scenes) {
    const fs::path rel = fs::path("scenes") / scene.id / "scene.json";
    write_scene(scene, out_dir / "scenes" / scene.id);
    m.entries.push_back({scene.id, rel, scene.config.snr_db});
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

std::vector<Scene> simulate_from_config(const fs::path& config_path) {
  const json j = read_json(config_path, Errc::kInvalidConfig);
  static const std::set<std::string> known = {
      "seed", "sample_rate_hz", "snr_db", "noise_context_s", "num_noise_sources",
      "num_mics", "geometry", "speech", "noise"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(Errc::kInvalidConfig, "unknown config key '" + key + "'");
  }
  try {
    SweepOptions opt;
    opt.seed = j.value<std::uint64_t>("seed", 0);
    opt.sample_rate_hz = j.value("sample_rate_hz", 16000);
    opt.noise_context_s = j.value("noise_context_s", 6.0);
    opt.num_noise_sources = j.value("num_noise_sources", 1);
    if (j.contains("snr_db")) {
      opt.snr_levels_db.clear();
      for (const auto& s : j.at("snr_db")) opt.snr_levels_db.push_back(decode_db(s));
    }
    if (j.contains("geometry")) {
      opt.geometry = decode_geometry(j.at("geometry"));
    } else {
      opt.geometry = ArrayGeometry::default_array(j.value("num_mics", 3));
    }
    if (opt.sample_rate_hz <= 0) throw Error(Errc::kInvalidConfig, "sample_rate_hz must be > 0");

    const fs::path base = config_path.parent_path();
    SplitMix64 root(opt.seed);
    auto clips = [&](const json& spec, bool is_speech) {
      std::vector<SourceClip> out;
      SplitMix64 rng = root.fork(is_speech ? 1 : 2);
      if (spec.contains("files")) {
        for (const auto& f : spec.at("files")) {
          const fs::path p = fs::path(f.get<std::string>());
          const fs::path full = p.is_absolute() ? p : base / p;
          out.push_back({p.stem().string(), read_wav(full.string(), opt.sample_rate_hz).samples.col(0)});
        }
      } else {
        const auto& syn = spec.at("synthetic");
        const int count = syn.at("count").get<int>();
        const double duration = syn.at("duration_s").get<double>();
        if (count < 1 || !(duration > 0.0)) {
          throw Error(Errc::kInvalidConfig, "synthetic sources need count >= 1 and duration_s > 0");
        }
        const std::string kind = syn.value("kind", is_speech ? "speech" : "colored");
        for (int i = 0; i < count; ++i) {
          SplitMix64 r = rng.fork(static_cast<std::uint64_t>(i));
          char id[32];
          if (is_speech) {
            std::snprintf(id, sizeof(id), "spk%03d", i);
            out.push_back({id, synth_speech(duration, opt.sample_rate_hz, r)});
          } else {
            NoiseKind nk;
            if (kind == "colored") {
              nk = NoiseKind::kColored;
            } else if (kind == "babble") {
              nk = NoiseKind::kBabble;
            } else {
              throw Error(Errc::kInvalidConfig, "unknown noise kind '" + kind + "'");
            }
            std::snprintf(id, sizeof(id), "%s%03d", kind == "babble" ? "bab" : "col", i);
            out.push_back({id, synth_noise(duration, opt.sample_rate_hz, r, nk)});
          }
        }
      }
      if (out.empty()) throw Error(Errc::kInvalidConfig, "empty source list");
      return out;
    };
    const auto speech = clips(j.at("speech"), true);
    const auto noise = clips(j.at("noise"), false);
    return generate_sweep(speech, noise, opt);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidConfig, config_path.string() + ": " + e.what());
  }
}

int worker_count(int jobs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CLEANSTREAM_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw Error(Errc::kInvalidConfig, "CLEANSTREAM_THREADS must be a positive integer");
    }
    cap = static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1, std::min(cap, std::max(jobs, 1)));
}

EvaluationReport evaluate(const Manifest& manifest, const std::vector<EvaluationJob>& jobs,
                          const MethodParams& params, int workers) {
  SceneSource src{
      manifest.entries.size(),
      [&](std::size_t i) { return manifest.entries[i].id; },
      [&](std::size_t i) { return manifest.entries[i].snr_db; },
      [&](std::size_t i) { return read_scene(manifest.resolve(manifest.entries[i])); },
  };
  return run_pool(src, jobs, params, workers);
}

EvaluationReport evaluate(const std::vector<Scene>& scenes, const std::vector<EvaluationJob>& jobs,
                          const MethodParams& params, int workers) {
  SceneSource src{
      scenes.size(),
      [&](std::size_t i) { return scenes[i].id; },
      [&](std::size_t i) { return scenes[i].config.snr_db; },
      [&](std::size_t i) { return scenes[i]; },
  };
  return run_pool(src, jobs, params, workers);
}

void sort_rows(std::vector<MetricsRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.method, a.num_mics, a.snr_label_db, a.scene_id) <
           std::tie(b.method, b.num_mics, b.snr_label_db, b.scene_id);
  });
}

std::vector<SummaryRow> summarize_rows(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, int, double>;
  std::map<Key, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[{r.method, r.num_mics, r.snr_label_db}].push_back(&r);

  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    std::tie(s.method, s.num_mics, s.snr_label_db) = key;
    std::vector<double> in, outp, imp, sdr, lsd, mse;
    for (const MetricsRow* r : members) {
      ++s.scenes;
      if (r->status != "ok") {
        ++s.failures;
        continue;
      }
      in.push_back(r->input_snr_db);
      outp.push_back(r->output_snr_db);
      imp.push_back(r->snr_improvement_db);
      sdr.push_back(r->si_sdr_db);
      lsd.push_back(r->lsd_db);
      mse.push_back(r->mask_mse);
    }
    s.input_snr = summarize(in);
    s.output_snr = summarize(outp);
    s.snr_improvement = summarize(imp);
    s.si_sdr = summarize(sdr);
    s.lsd = summarize(lsd);
    s.mask_mse = summarize(mse);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "scene_id,method,num_mics,snr_label_db,snr_domain,input_snr_db,output_snr_db,"
         "snr_improvement_db,si_sdr_db,lsd_db,mask_mse,status\n";
  for (const auto& r : rows) {
    out << r.scene_id << ',' << r.method << ',' << r.num_mics << ','
        << format_number(r.snr_label_db) << ',' << r.snr_domain << ','
        << format_number(r.input_snr_db) << ',' << format_number(r.output_snr_db) << ','
        << format_number(r.snr_improvement_db) << ',' << format_number(r.si_sdr_db) << ','
        << format_number(r.lsd_db) << ',' << format_number(r.mask_mse) << ',' << r.status
        << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "method,num_mics,snr_label_db,scenes,failures";
  for (const char* name :
       {"input_snr_db", "output_snr_db", "snr_improvement_db", "si_sdr_db", "lsd_db", "mask_mse"}) {
    out << ',' << name << "_mean," << name << "_std";
  }
  out << '\n';
  for (const auto& s : rows) {
    out << s.method << ',' << s.num_mics << ',' << format_number(s.snr_label_db) << ','
        << s.scenes << ',' << s.failures;
    for (const Stats* st : {&s.input_snr, &s.output_snr, &s.snr_improvement, &s.si_sdr, &s.lsd,
                            &s.mask_mse}) {
      add_stat_columns(out, *st);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<fs::path> write_reports(const EvaluationReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::map<std::string, std::vector<MetricsRow>> by_method;
  for (const auto& r : report.rows) by_method[r.method].push_back(r);
  std::vector<fs::path> written;
  for (auto& [method, rows] : by_method) {
    sort_rows(rows);
    const fs::path p = out_dir / (method + ".csv");
    write_text(p, metrics_csv(rows));
    written.push_back(p);
  }
  const fs::path summary = out_dir / "summary.csv";
  write_text(summary, summary_csv(summarize_rows(report.rows)));
  written.push_back(summary);
  return written;
}

}  // namespace cleanstream
