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

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "cleanstream/audio_io.hpp"
#include "cleanstream/evaluation.hpp"
#include "support.hpp"

namespace cleanstream {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;
using testing::thrown_code;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<Scene> small_sweep() {
  SweepOptions o;
  o.snr_levels_db = {-6.0, 6.0};
  o.noise_context_s = 1.0;
  o.seed = 3;
  o.geometry = ArrayGeometry::default_array(3);
  return generate_sweep(testing::synth_speech_clips(2, 0.5, 1), testing::synth_noise_clips(2, 3.0, 2), o);
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (value) {
      ::setenv("CLEANSTREAM_THREADS", value, 1);
    } else {
      ::unsetenv("CLEANSTREAM_THREADS");
    }
  }
  ~ThreadsEnv() { ::unsetenv("CLEANSTREAM_THREADS"); }
};

TEST(SceneFileTest, RoundTrip) {
  ScratchDir dir("scene");
  for (const Scene& s : small_sweep()) {
    const fs::path json = write_scene(s, dir.path() / s.id);
    const Scene back = read_scene(json);
    EXPECT_EQ(back.id, s.id);
    EXPECT_TRUE(back.mixture == s.mixture);
    EXPECT_TRUE(back.speech_image == s.speech_image);
    EXPECT_TRUE(back.noise_image == s.noise_image);
    EXPECT_EQ(back.context_boundary, s.context_boundary);
    EXPECT_EQ(back.noise_gain, s.noise_gain);
    EXPECT_EQ(back.config.snr_db, s.config.snr_db);
    EXPECT_EQ(back.config.seed, s.config.seed);
    EXPECT_EQ(back.config.geometry.positions, s.config.geometry.positions);
    EXPECT_TRUE(back.config.speech_direction == s.config.speech_direction);
    ASSERT_EQ(back.config.noise_directions.size(), s.config.noise_directions.size());
  }
}

TEST(SceneFileTest, InfiniteSnrSurvives) {
  ScratchDir dir("scene");
  SplitMix64 rng(4);
  SceneConfig c;
  c.snr_db = kInf;
  c.noise_context_s = 0.5;
  Scene s = make_scene(synth_speech(0.3, 16000, rng), synth_noise(1.0, 16000, rng), c);
  s.id = "clean";
  const Scene back = read_scene(write_scene(s, dir.path() / "clean"));
  EXPECT_EQ(back.config.snr_db, kInf);
  EXPECT_NE(slurp(dir.path() / "clean" / "scene.json").find("\"inf\""), std::string::npos);
}

TEST(SceneFileTest, Malformed) {
  ScratchDir dir("scene");
  const Scene s = small_sweep().front();
  const fs::path json = write_scene(s, dir.path() / "a");
  spit(dir.path() / "broken.json", "{ not json");
  EXPECT_EQ(thrown_code([&] { read_scene(dir.path() / "broken.json"); }), Errc::kMalformedScene);

  std::string text = slurp(json);
  const auto pos = text.find("\"num_mics\": 3");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 13, "\"num_mics\": 2");
  spit(json, text);
  EXPECT_EQ(thrown_code([&] { read_scene(json); }), Errc::kMalformedScene);

  write_scene(s, dir.path() / "b");
  fs::remove(dir.path() / "b" / "noise.wav");
  EXPECT_TRUE(thrown_code([&] { read_scene(dir.path() / "b" / "scene.json"); }).has_value());
}

TEST(ManifestTest, RoundTripAndResolve) {
  ScratchDir dir("manifest");
  const auto scenes = small_sweep();
  const Manifest m = write_dataset(scenes, dir.path());
  ASSERT_EQ(m.entries.size(), scenes.size());
  const Manifest back = read_manifest(dir.path() / "manifest.json");
  ASSERT_EQ(back.entries.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EXPECT_EQ(back.entries[i].id, scenes[i].id);
    EXPECT_EQ(back.entries[i].snr_db, scenes[i].config.snr_db);
    EXPECT_TRUE(fs::exists(back.resolve(back.entries[i])));
    EXPECT_FALSE(back.entries[i].scene.is_absolute());
  }
}

TEST(ManifestTest, Rejects) {
  ScratchDir dir("manifest");
  spit(dir.path() / "empty.json", R"({"scenes": []})");
  EXPECT_EQ(thrown_code([&] { read_manifest(dir.path() / "empty.json"); }), Errc::kInvalidConfig);
  spit(dir.path() / "dup.json",
       R"({"scenes": [{"id": "a", "path": "x", "snr_db": 0}, {"id": "a", "path": "y", "snr_db": 6}]})");
  EXPECT_EQ(thrown_code([&] { read_manifest(dir.path() / "dup.json"); }), Errc::kInvalidConfig);
  spit(dir.path() / "keys.json", R"({"scenes": [{"id": "a"}]})");
  EXPECT_EQ(thrown_code([&] { read_manifest(dir.path() / "keys.json"); }), Errc::kInvalidConfig);
  EXPECT_TRUE(thrown_code([&] { read_manifest(dir.path() / "none.json"); }).has_value());
}

TEST(EvaluateTest, FailedSceneDoesNotStopTheRun) {
  ScratchDir dir("eval");
  const auto scenes = small_sweep();
  Manifest m = write_dataset(scenes, dir.path());
  fs::remove(m.resolve(m.entries[1]));
  const std::vector<EvaluationJob> jobs = {{EnhancementMethod::kPassthrough, 0},
                                           {EnhancementMethod::kCleaner, 0}};
  const auto report = evaluate(m, jobs, {}, 2);
  ASSERT_EQ(report.rows.size(), scenes.size() * 2);
  EXPECT_EQ(report.failures, 2);
  EXPECT_EQ(report.messages.size(), 1u);
  int errors = 0;
  for (const auto& r : report.rows) {
    if (r.scene_id == scenes[1].id) {
      EXPECT_EQ(r.status.rfind("error:", 0), 0u) << r.status;
      EXPECT_TRUE(std::isnan(r.output_snr_db));
      ++errors;
    } else {
      EXPECT_EQ(r.status, "ok");
    }
  }
  EXPECT_EQ(errors, 2);
}

TEST(EvaluateTest, ReportsAreDeterministicAcrossRunsAndWorkers) {
  ScratchDir dir("eval");
  const Manifest m = write_dataset(small_sweep(), dir.path() / "data");
  const std::vector<EvaluationJob> jobs = {{EnhancementMethod::kPassthrough, 0},
                                           {EnhancementMethod::kCleaner, 2},
                                           {EnhancementMethod::kCleaner, 3}};
  const auto one = write_reports(evaluate(m, jobs, {}, 1), dir.path() / "one");
  const auto again = write_reports(evaluate(m, jobs, {}, 1), dir.path() / "again");
  const auto two = write_reports(evaluate(m, jobs, {}, 2), dir.path() / "two");
  ASSERT_EQ(one.size(), 3u);  // cleaner.csv, passthrough.csv, summary.csv
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].filename(), two[i].filename());
    EXPECT_EQ(slurp(one[i]), slurp(again[i])) << one[i];
    EXPECT_EQ(slurp(one[i]), slurp(two[i])) << one[i];
  }
  EXPECT_TRUE(fs::exists(dir.path() / "one" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "one" / "passthrough.csv"));
}

TEST(EvaluateTest, RowsAreSorted) {
  const auto report = evaluate(small_sweep(),
                               {{EnhancementMethod::kPassthrough, 0}, {EnhancementMethod::kCleaner, 2}},
                               {}, 2);
  auto sorted = report.rows;
  sort_rows(sorted);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    EXPECT_EQ(report.rows[i].scene_id, sorted[i].scene_id);
    EXPECT_EQ(report.rows[i].method, sorted[i].method);
  }
  EXPECT_EQ(report.rows.front().method, "cleaner");
  EXPECT_EQ(report.rows.front().snr_label_db, -6.0);
}

TEST(SummaryTest, MatchesManualMeans) {
  const auto report = evaluate(small_sweep(), {{EnhancementMethod::kCleaner, 0}}, {}, 1);
  const auto summary = summarize_rows(report.rows);
  ASSERT_EQ(summary.size(), 2u);
  for (const auto& s : summary) {
    std::vector<double> v;
    for (const auto& r : report.rows) {
      if (r.snr_label_db == s.snr_label_db) v.push_back(r.snr_improvement_db);
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    EXPECT_EQ(s.scenes, 2);
    EXPECT_EQ(s.failures, 0);
    EXPECT_NEAR(s.snr_improvement.mean, mean, 1e-12);
  }
}

TEST(SummaryTest, FailuresAreCountedButNotAveraged) {
  MetricsRow a;
  a.method = "cleaner";
  a.num_mics = 3;
  a.snr_improvement_db = 10.0;
  MetricsRow b = a;
  b.snr_improvement_db = kNan;
  b.status = "error:singular system";
  const auto s = summarize_rows({a, b});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].scenes, 2);
  EXPECT_EQ(s[0].failures, 1);
  EXPECT_EQ(s[0].snr_improvement.mean, 10.0);
  EXPECT_EQ(s[0].snr_improvement.count, 1);
}

TEST(CsvTest, NumberFormatting) {
  EXPECT_EQ(format_number(1.0), "1.000000");
  EXPECT_EQ(format_number(-2.5), "-2.500000");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_number(-0.0), "0.000000");
  EXPECT_EQ(format_number(-1e-9), "0.000000");
  EXPECT_EQ(format_number(kNan), "nan");
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(format_number(-kInf), "-inf");
}

TEST(CsvTest, Headers) {
  MetricsRow r;
  r.scene_id = "s";
  r.method = "passthrough";
  r.num_mics = 3;
  r.snr_domain = "time";
  r.mask_mse = kNan;
  const std::string csv = metrics_csv({r});
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header,
            "scene_id,method,num_mics,snr_label_db,snr_domain,input_snr_db,output_snr_db,"
            "snr_improvement_db,si_sdr_db,lsd_db,mask_mse,status");
  EXPECT_EQ(row, "s,passthrough,3,0.000000,time,0.000000,0.000000,0.000000,0.000000,0.000000,nan,ok");
  const std::string summary = summary_csv(summarize_rows({r}));
  EXPECT_EQ(summary.rfind("method,num_mics,snr_label_db,scenes,failures,input_snr_db_mean,", 0), 0u);
}

TEST(WorkerCountTest, EnvironmentCap) {
  {
    ThreadsEnv env("2");
    EXPECT_EQ(worker_count(10), 2);
    EXPECT_EQ(worker_count(1), 1);
  }
  {
    ThreadsEnv env("abc");
    EXPECT_EQ(thrown_code([] { worker_count(4); }), Errc::kInvalidConfig);
  }
  {
    ThreadsEnv env("0");
    EXPECT_EQ(thrown_code([] { worker_count(4); }), Errc::kInvalidConfig);
  }
  ThreadsEnv env(nullptr);
  EXPECT_GE(worker_count(4), 1);
  EXPECT_LE(worker_count(4), 4);
}

TEST(SimulateConfigTest, SyntheticSources) {
  ScratchDir dir("config");
  spit(dir.file("sim.json"), R"({
    "seed": 9, "snr_db": [-6, 6, "inf"], "noise_context_s": 1.0, "num_mics": 4,
    "speech": {"synthetic": {"count": 2, "duration_s": 0.5}},
    "noise": {"synthetic": {"count": 1, "duration_s": 2.0, "kind": "babble"}}
  })");
  const auto scenes = simulate_from_config(dir.file("sim.json"));
  ASSERT_EQ(scenes.size(), 6u);
  EXPECT_EQ(scenes[0].id, "spk000_bab000_m6");
  EXPECT_EQ(scenes[1].id, "spk000_bab000_p6");
  EXPECT_EQ(scenes[2].id, "spk000_bab000_clean");
  EXPECT_EQ(scenes[0].num_mics(), 4);
  EXPECT_EQ(scenes[0].context_boundary, 16000);
  const auto again = simulate_from_config(dir.file("sim.json"));
  for (std::size_t i = 0; i < scenes.size(); ++i) EXPECT_TRUE(again[i].mixture == scenes[i].mixture);
}

TEST(SimulateConfigTest, WavSources) {
  ScratchDir dir("config");
  SplitMix64 rng(10);
  write_wav({synth_speech(0.5, 16000, rng) * 0.5, 16000}, dir.file("talk.wav"));
  write_wav({synth_noise(2.0, 16000, rng) * 0.5, 16000}, dir.file("hum.wav"));
  spit(dir.file("sim.json"), R"({
    "snr_db": [0], "noise_context_s": 1.0,
    "speech": {"files": ["talk.wav"]}, "noise": {"files": ["hum.wav"]}
  })");
  const auto scenes = simulate_from_config(dir.file("sim.json"));
  ASSERT_EQ(scenes.size(), 1u);
  EXPECT_EQ(scenes[0].id, "talk_hum_p0");
}

TEST(SimulateConfigTest, Errors) {
  ScratchDir dir("config");
  const std::string sources =
      R"("speech": {"synthetic": {"count": 1, "duration_s": 0.5}}, "noise": {"synthetic": {"count": 1, "duration_s": 2.0}})";
  auto code = [&](const std::string& body) {
    spit(dir.file("c.json"), body);
    return thrown_code([&] { simulate_from_config(dir.file("c.json")); });
  };
  EXPECT_EQ(code("{" + sources + R"(, "noise_context": 1.0})"), Errc::kInvalidConfig);
  EXPECT_EQ(code("{" + sources + R"(, "num_mics": 7})"), Errc::kInvalidConfig);
  EXPECT_EQ(code(R"({"speech": {"synthetic": {"count": 1, "duration_s": 0.5}}, "noise": {"synthetic": {"count": 1, "duration_s": 2.0, "kind": "pink"}}})"),
            Errc::kInvalidConfig);
  EXPECT_EQ(code(R"({"speech": {"synthetic": {"count": 0, "duration_s": 0.5}}, "noise": {"synthetic": {"count": 1, "duration_s": 2.0}}})"),
            Errc::kInvalidConfig);
  EXPECT_EQ(code(R"({"speech": {}})"), Errc::kInvalidConfig);
  EXPECT_EQ(code("[1, 2"), Errc::kInvalidConfig);
  EXPECT_EQ(code("{" + sources + R"(, "noise_context_s": 6.0})"), Errc::kInsufficientSamples);
}

}  // namespace
}  // namespace cleanstream
