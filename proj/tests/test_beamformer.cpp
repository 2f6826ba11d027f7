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
#include <numeric>

#include <gtest/gtest.h>

#include "cleanstream/beamformer.hpp"
#include "support.hpp"

namespace cleanstream {
namespace {

using cd = std::complex<double>;
using testing::complex_normal;
using testing::random_hpd;
using testing::thrown_code;

Spectrogram<double> spec_from(const std::vector<Eigen::MatrixXcd>& ch) {
  return Spectrogram<double>(ch, StftConfig());
}

Eigen::VectorXcd random_unit(int n, SplitMix64& rng) {
  return complex_normal(n, 1, rng).col(0).normalized();
}

SpatialCovariance<double> rank_one(const std::vector<Eigen::VectorXcd>& d) {
  SpatialCovariance<double> out;
  for (const auto& v : d) out.push_back(v * v.adjoint());
  return out;
}

TEST(CovarianceTest, SingleFrameIsOuterProduct) {
  SplitMix64 rng(1);
  std::vector<Eigen::MatrixXcd> ch;
  for (int m = 0; m < 3; ++m) ch.push_back(complex_normal(257, 4, rng));
  const auto spec = spec_from(ch);
  const auto phi = covariance(spec, 2, 3);
  ASSERT_EQ(phi.size(), 257u);
  for (int k : {0, 100, 256}) {
    const Eigen::VectorXcd y = spec.frame(2).row(k).transpose();
    EXPECT_LT((phi[k] - y * y.adjoint()).norm(), 1e-14);
  }
}

TEST(CovarianceTest, HermitianPsdAndAveraged) {
  SplitMix64 rng(2);
  std::vector<Eigen::MatrixXcd> ch;
  for (int m = 0; m < 4; ++m) ch.push_back(complex_normal(257, 6, rng));
  const auto spec = spec_from(ch);
  const auto phi = covariance(spec);
  for (int k = 0; k < 257; k += 32) {
    EXPECT_EQ((phi[k] - phi[k].adjoint()).norm(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(phi[k]);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(4, 4);
    for (int n = 0; n < 6; ++n) {
      const Eigen::VectorXcd y = spec.frame(n).row(k).transpose();
      sum += y * y.adjoint();
    }
    EXPECT_LT((phi[k] - sum / 6.0).norm(), 1e-13);
  }
}

TEST(CovarianceTest, IdenticalChannelsGiveRankOne) {
  SplitMix64 rng(3);
  const Eigen::MatrixXcd x = complex_normal(257, 20, rng);
  const auto phi = covariance(spec_from({x, x, x}));
  for (int k = 0; k < 257; k += 16) {
    const double p = phi[k](0, 0).real();
    EXPECT_LT((phi[k] - Eigen::MatrixXcd::Constant(3, 3, p)).norm(), 1e-12 * (1.0 + p));
  }
}

TEST(CovarianceTest, WhiteNoiseIsNearIdentity) {
  SplitMix64 rng(4);
  std::vector<Eigen::MatrixXcd> ch;
  for (int m = 0; m < 3; ++m) ch.push_back(complex_normal(257, 4000, rng));
  const auto phi = covariance(spec_from(ch));
  for (int k = 0; k < 257; k += 64) {
    EXPECT_LT((phi[k] - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.05);
  }
}

TEST(CovarianceTest, BadRange) {
  SplitMix64 rng(5);
  const auto spec = spec_from({complex_normal(257, 3, rng)});
  EXPECT_EQ(thrown_code([&] { covariance(spec, 2, 2); }), Errc::kShapeMismatch);
  EXPECT_EQ(thrown_code([&] { covariance(spec, 0, 4); }), Errc::kShapeMismatch);
  EXPECT_EQ(thrown_code([&] { covariance(spec, -1, 2); }), Errc::kShapeMismatch);
}

TEST(PrincipalEigenvectorTest, RecoversRankOneDirection) {
  SplitMix64 rng(6);
  const Eigen::VectorXcd d = random_unit(4, rng);
  const Eigen::VectorXcd e = principal_eigenvector<double>(3.0 * d * d.adjoint());
  EXPECT_NEAR(e.norm(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.dot(d)), 1.0, 1e-12);
  Eigen::Index idx = 0;
  e.cwiseAbs().maxCoeff(&idx);
  EXPECT_EQ(e[idx].imag(), 0.0);
  EXPECT_GT(e[idx].real(), 0.0);
}

TEST(SteerTest, WhiteNoiseGivesMatchedFilter) {
  SplitMix64 rng(7);
  std::vector<Eigen::VectorXcd> dirs;
  for (int k = 0; k < 5; ++k) dirs.push_back(random_unit(3, rng));
  const SpatialCovariance<double> noise(5, Eigen::MatrixXcd::Identity(3, 3));
  const auto bf = steer(rank_one(dirs), noise, 0.0);
  for (int k = 0; k < 5; ++k) {
    const Eigen::VectorXcd d = bf.steering.col(k);
    EXPECT_NEAR(std::abs(d.dot(dirs[k])), 1.0, 1e-12);
    EXPECT_LT((bf.weights.col(k) - d).norm(), 1e-12);
  }
}

TEST(SteerTest, DistortionlessAndMinimumVariance) {
  SplitMix64 rng(8);
  std::vector<Eigen::VectorXcd> dirs;
  SpatialCovariance<double> noise;
  for (int k = 0; k < 8; ++k) {
    dirs.push_back(random_unit(4, rng));
    noise.push_back(random_hpd(4, rng));
  }
  const auto bf = steer(rank_one(dirs), noise, 0.0);
  for (int k = 0; k < 8; ++k) {
    const Eigen::VectorXcd w = bf.weights.col(k);
    const Eigen::VectorXcd d = bf.steering.col(k);
    EXPECT_LT(std::abs(w.dot(d) - cd(1.0)), 1e-12);
    // Closed form.
    const Eigen::VectorXcd inv_d = noise[k].inverse() * d;
    EXPECT_LT((w - inv_d / d.dot(inv_d)).norm(), 1e-10);
    // Any other distortionless filter passes at least as much noise.
    const double best = std::real(w.dot(noise[k] * w));
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXcd v = complex_normal(4, 1, rng).col(0);
      v -= d * (d.dot(v));  // orthogonal to d
      const Eigen::VectorXcd other = w + v;
      EXPECT_LT(std::abs(other.dot(d) - cd(1.0)), 1e-12);
      EXPECT_GE(std::real(other.dot(noise[k] * other)), best - 1e-12);
    }
  }
}

TEST(SteerTest, ScaleInvariance) {
  SplitMix64 rng(9);
  std::vector<Eigen::VectorXcd> dirs;
  SpatialCovariance<double> noise;
  for (int k = 0; k < 4; ++k) {
    dirs.push_back(random_unit(3, rng));
    noise.push_back(random_hpd(3, rng));
  }
  const auto speech = rank_one(dirs);
  const auto base = steer(speech, noise);
  SpatialCovariance<double> speech2 = speech, noise2 = noise;
  for (auto& p : speech2) p *= 17.0;
  for (auto& p : noise2) p *= 1e-3;
  const auto scaled = steer(speech2, noise2);
  EXPECT_LT((scaled.weights - base.weights).norm(), 1e-9);
  EXPECT_LT((scaled.steering - base.steering).norm(), 1e-12);
}

TEST(SteerTest, SingleMic) {
  const SpatialCovariance<double> s(3, Eigen::MatrixXcd::Constant(1, 1, 2.5));
  const SpatialCovariance<double> n(3, Eigen::MatrixXcd::Constant(1, 1, 0.3));
  const auto bf = steer(s, n);
  for (int k = 0; k < 3; ++k) {
    EXPECT_LT(std::abs(bf.weights(0, k) - cd(1.0)), 1e-14);
    EXPECT_LT(std::abs(bf.steering(0, k) - cd(1.0)), 1e-14);
  }
}

TEST(SteerTest, Errors) {
  SplitMix64 rng(10);
  SpatialCovariance<double> s{random_hpd(3, rng)}, n{random_hpd(3, rng)};
  Eigen::MatrixXcd bad = n[0];
  bad(0, 1) += cd(0.5, 0.5);
  EXPECT_EQ(thrown_code([&] { steer(s, SpatialCovariance<double>{bad}); }), Errc::kNotHermitian);
  EXPECT_EQ(thrown_code([&] { steer(SpatialCovariance<double>{bad}, n); }), Errc::kNotHermitian);
  EXPECT_EQ(thrown_code([&] { steer(s, SpatialCovariance<double>{Eigen::MatrixXcd::Zero(3, 3)}); }),
            Errc::kSingularSystem);
  EXPECT_EQ(thrown_code([&] { steer(s, SpatialCovariance<double>{}); }), Errc::kShapeMismatch);
  EXPECT_EQ(thrown_code([&] { steer(s, SpatialCovariance<double>{random_hpd(2, rng)}); }),
            Errc::kShapeMismatch);
}

TEST(SteerTest, LoadingRescuesRankDeficientNoise) {
  SplitMix64 rng(11);
  const Eigen::VectorXcd v = random_unit(3, rng);
  const SpatialCovariance<double> n{v * v.adjoint()};
  const SpatialCovariance<double> s{random_hpd(3, rng)};
  const auto bf = steer(s, n, 1e-3);
  EXPECT_TRUE(bf.weights.allFinite());
  EXPECT_LT(std::abs(bf.weights.col(0).dot(bf.steering.col(0)) - cd(1.0)), 1e-9);
}

TEST(ApplyBeamformerTest, SelectsAndCombinesChannels) {
  SplitMix64 rng(12);
  std::vector<Eigen::MatrixXcd> ch;
  for (int m = 0; m < 3; ++m) ch.push_back(complex_normal(257, 5, rng));
  const auto spec = spec_from(ch);
  BeamformerWeights<double> bf{Eigen::MatrixXcd::Zero(3, 257), Eigen::MatrixXcd::Zero(3, 257)};
  bf.weights.row(0).setOnes();
  EXPECT_EQ((apply_beamformer(bf, spec).channel(0) - ch[0]).norm(), 0.0);

  bf.weights = complex_normal(3, 257, rng);
  const auto out = apply_beamformer(bf, spec);
  for (int k : {0, 77, 256}) {
    for (int n = 0; n < 5; ++n) {
      const Eigen::VectorXcd y = spec.frame(n).row(k).transpose();
      EXPECT_LT(std::abs(out.channel(0)(k, n) - bf.weights.col(k).dot(y)), 1e-13);
    }
  }
  const auto zero = apply_beamformer(
      bf, spec_from({Eigen::MatrixXcd::Zero(257, 2), Eigen::MatrixXcd::Zero(257, 2),
                     Eigen::MatrixXcd::Zero(257, 2)}));
  EXPECT_EQ(zero.channel(0).norm(), 0.0);
  EXPECT_EQ(thrown_code([&] { apply_beamformer(bf, spec.first_channels(2)); }), Errc::kShapeMismatch);
}

TEST(BeamformerTest, BinPermutationEquivariance) {
  SplitMix64 rng(13);
  std::vector<Eigen::MatrixXcd> sp, ns;
  for (int m = 0; m < 3; ++m) {
    sp.push_back(complex_normal(257, 40, rng));
    ns.push_back(complex_normal(257, 40, rng));
  }
  std::vector<int> perm(257);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  auto permute = [&](const std::vector<Eigen::MatrixXcd>& in) {
    std::vector<Eigen::MatrixXcd> out;
    for (const auto& c : in) {
      Eigen::MatrixXcd p(257, c.cols());
      for (int k = 0; k < 257; ++k) p.row(k) = c.row(perm[k]);
      out.push_back(p);
    }
    return out;
  };
  const auto a = steer(covariance(spec_from(sp)), covariance(spec_from(ns)));
  const auto b = steer(covariance(spec_from(permute(sp))), covariance(spec_from(permute(ns))));
  for (int k = 0; k < 257; ++k) {
    EXPECT_LT((b.weights.col(k) - a.weights.col(perm[k])).norm(), 1e-10);
  }
}

}  // namespace
}  // namespace cleanstream
