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
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "cleanstream/stft.hpp"
#include "support.hpp"

namespace cleanstream {
namespace {

using testing::random_signal;

// Naive DFT of the windowed frame starting at `offset`.
Eigen::VectorXcd direct_dft(const Eigen::VectorXd& x, Eigen::Index offset, const StftConfig& c) {
  Eigen::VectorXcd out(c.num_bins());
  for (int k = 0; k < c.num_bins(); ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < c.window_len(); ++n) {
      acc += c.window()[n] * x[offset + n] *
             std::polar(1.0, -2.0 * std::numbers::pi * k * n / c.fft_size());
    }
    out[k] = acc;
  }
  return out;
}

TEST(StftConfigTest, DefaultsAreThirtyTwoAndTenMilliseconds) {
  const StftConfig c;
  EXPECT_EQ(c.sample_rate_hz(), 16000);
  EXPECT_EQ(c.window_len(), 512);
  EXPECT_EQ(c.hop_len(), 160);
  EXPECT_EQ(c.fft_size(), 512);
  EXPECT_EQ(c.num_bins(), 257);
  EXPECT_TRUE(StftConfig::from_durations(16000, 32.0, 10.0) == c);
}

TEST(StftConfigTest, PeriodicHannWindow) {
  const StftConfig c;
  EXPECT_EQ(c.window()[0], 0.0);
  EXPECT_NEAR(c.window()[256], 1.0, 1e-15);
  EXPECT_NEAR(c.window()[128], 0.5, 1e-15);
}

TEST(StftConfigTest, RejectsBadGeometry) {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::kIo;
  };
  EXPECT_EQ(code([] { StftConfig(0, 512, 160, 512); }), Errc::kInvalidConfig);
  EXPECT_EQ(code([] { StftConfig(16000, 512, 600, 512); }), Errc::kInvalidConfig);
  EXPECT_EQ(code([] { StftConfig(16000, 512, 160, 256); }), Errc::kInvalidConfig);
  EXPECT_EQ(code([] { StftConfig(16000, 511, 160, 511); }), Errc::kInvalidConfig);
  // Hop equal to a Hann window leaves sample 0 of every frame with no energy.
  EXPECT_EQ(code([] { StftConfig(16000, 512, 512, 512); }), Errc::kInvalidConfig);
}

TEST(StftTest, FrameCountHasNoPadding) {
  const StftConfig c;
  EXPECT_EQ(c.num_frames(511), 0);
  EXPECT_EQ(c.num_frames(512), 1);
  EXPECT_EQ(c.num_frames(671), 1);
  EXPECT_EQ(c.num_frames(672), 2);
  EXPECT_EQ(c.num_frames(16000), (16000 - 512) / 160 + 1);
  EXPECT_EQ(analyze(random_signal(16000, 2, 1), c).num_frames(), 97);
  EXPECT_EQ(c.coverage(97), 96 * 160 + 512);
}

TEST(StftTest, ShortSignalIsAnError) {
  try {
    analyze(random_signal(400, 1, 1), StftConfig());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInsufficientSamples);
    EXPECT_NE(std::string(e.what()).find("insufficient samples"), std::string::npos);
  }
}

TEST(StftTest, ZeroSignalGivesZeroSpectrogram) {
  const auto spec = analyze(Eigen::MatrixXd::Zero(4000, 3), StftConfig());
  for (int m = 0; m < 3; ++m) EXPECT_EQ(spec.channel(m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(StftTest, MatchesDirectDft) {
  const StftConfig c;
  const Eigen::MatrixXd x = random_signal(2000, 1, 5);
  const auto spec = analyze(x, c);
  for (int n : {0, 3, spec.num_frames() - 1}) {
    const Eigen::VectorXcd ref = direct_dft(x.col(0), Eigen::Index(n) * c.hop_len(), c);
    EXPECT_LT((spec.channel(0).col(n) - ref).norm(), 1e-10 * ref.norm());
  }
}

TEST(StftTest, BinCentredSinusoidStaysInItsMainLobe) {
  const StftConfig c;
  const int k0 = 40;
  Eigen::MatrixXd x(4000, 1);
  for (int t = 0; t < x.rows(); ++t) {
    x(t, 0) = std::cos(2.0 * std::numbers::pi * k0 * t / c.fft_size() + 0.3);
  }
  const auto spec = analyze(x, c);
  for (int n = 0; n < spec.num_frames(); ++n) {
    const Eigen::VectorXd e = spec.channel(0).col(n).cwiseAbs2();
    // A Hann window spreads a bin-centred tone over k0-1..k0+1 in the ratio
    // 1:4:1 in magnitude squared.
    EXPECT_GE(e.segment(k0 - 1, 3).sum(), 0.99 * e.sum());
    EXPECT_NEAR(e[k0] / e.segment(k0 - 1, 3).sum(), 4.0 / 6.0, 1e-6);
  }
}

TEST(StftTest, ParsevalPerFrame) {
  const StftConfig c;
  const Eigen::MatrixXd x = random_signal(16000, 1, 9);
  const auto spec = analyze(x, c);
  for (int n = 0; n < spec.num_frames(); n += 7) {
    const Eigen::VectorXd frame =
        x.col(0).segment(Eigen::Index(n) * c.hop_len(), c.window_len()).cwiseProduct(c.window());
    const auto& col = spec.channel(0).col(n);
    const int last = c.num_bins() - 1;
    const double half = std::norm(col[0]) + std::norm(col[last]) +
                        2.0 * col.segment(1, last - 1).squaredNorm();
    const double time = c.fft_size() * frame.squaredNorm();
    EXPECT_NEAR(half, time, 1e-9 * time);
  }
}

TEST(StftTest, Linearity) {
  const StftConfig c;
  const Eigen::MatrixXd x = random_signal(5000, 2, 10), y = random_signal(5000, 2, 11);
  const double a = 0.7, b = -1.9;
  const auto lhs = analyze((a * x + b * y).eval(), c);
  const auto sx = analyze(x, c), sy = analyze(y, c);
  for (int m = 0; m < 2; ++m) {
    const Eigen::MatrixXcd rhs = a * sx.channel(m) + b * sy.channel(m);
    EXPECT_LT((lhs.channel(m) - rhs).norm(), 1e-9 * rhs.norm());
  }
}

TEST(StftTest, MultichannelIsPerChannel) {
  const StftConfig c;
  const Eigen::MatrixXd x = random_signal(3000, 3, 12);
  const auto all = analyze(x, c);
  for (int m = 0; m < 3; ++m) {
    const auto one = analyze(Eigen::MatrixXd(x.col(m)), c);
    EXPECT_EQ((all.channel(m) - one.channel(0)).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(StftTest, RoundTripOnInterior) {
  const StftConfig c;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Eigen::MatrixXd x = random_signal(16000, 1, seed);
    const auto spec = analyze(x, c);
    const Eigen::VectorXd y = synthesize(spec);
    ASSERT_EQ(y.size(), c.coverage(spec.num_frames()));
    const Eigen::Index begin = c.window_len() - c.hop_len();
    const Eigen::Index end = Eigen::Index(spec.num_frames()) * c.hop_len();
    const double err = (y - x.col(0).head(y.size())).segment(begin, end - begin).cwiseAbs().maxCoeff();
    EXPECT_LT(err, 1e-6 * x.cwiseAbs().maxCoeff());
  }
}

TEST(StftTest, RoundTripOtherConfigs) {
  for (const StftConfig& c : {StftConfig(8000, 256, 64, 256), StftConfig(16000, 400, 160, 512)}) {
    const Eigen::MatrixXd x = random_signal(6000, 1, 4);
    const auto spec = analyze(x, c);
    const Eigen::VectorXd y = synthesize(spec);
    const Eigen::Index begin = c.window_len() - c.hop_len();
    const Eigen::Index end = Eigen::Index(spec.num_frames()) * c.hop_len();
    EXPECT_LT((y - x.col(0).head(y.size())).segment(begin, end - begin).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(StftTest, ZeroSpectrogramSynthesisesSilence) {
  const StftConfig c;
  const Spectrogram<double> spec({Eigen::MatrixXcd::Zero(c.num_bins(), 10)}, c);
  EXPECT_EQ(synthesize(spec).cwiseAbs().maxCoeff(), 0.0);
}

TEST(StftTest, SingleImpulseFrame) {
  const StftConfig c;
  const int frames = 8, target = 3, pos = 200;
  Eigen::MatrixXcd bins = Eigen::MatrixXcd::Zero(c.num_bins(), frames);
  for (int k = 0; k < c.num_bins(); ++k) {
    bins(k, target) = std::polar(1.0, -2.0 * std::numbers::pi * k * pos / c.fft_size());
  }
  const Eigen::VectorXd y = synthesize(Spectrogram<double>({bins}, c));
  // Least-squares overlap-add divides by the squared-window envelope.
  const Eigen::Index t0 = Eigen::Index(target) * c.hop_len() + pos;
  double envelope = 0.0;
  for (int n = 0; n < frames; ++n) {
    const Eigen::Index rel = t0 - Eigen::Index(n) * c.hop_len();
    if (rel >= 0 && rel < c.window_len()) envelope += c.window()[rel] * c.window()[rel];
  }
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(y.size());
  expected[t0] = c.window()[pos] / envelope;
  EXPECT_LT((y - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StftTest, FrameSlicing) {
  const auto spec = analyze(random_signal(5000, 2, 3), StftConfig());
  const auto part = spec.frames(4, 10);
  EXPECT_EQ(part.num_frames(), 6);
  EXPECT_EQ((part.channel(1).col(0) - spec.channel(1).col(4)).norm(), 0.0);
  EXPECT_EQ(spec.frame(5).cols(), 2);
  EXPECT_EQ(spec.first_channels(1).num_channels(), 1);
}

}  // namespace
}  // namespace cleanstream
