/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sweepnav/common.hpp"
#include "sweepnav/imu.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {
namespace {

std::vector<ImuSample> constant_samples(std::size_t n, const Eigen::Vector3d& acc, const Eigen::Vector3d& gyro,
                                        double rate = 50.0) {
  std::vector<ImuSample> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = {static_cast<double>(i) / rate, acc, gyro};
  return s;
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

TEST(LoadImu, CsvFieldMapping) {
  testing::TempDir tmp("imu");
  io::write_file(tmp / "a.csv", "t,ax,ay,az,gx,gy,gz\n0.02,0.1,0.0,9.81,0.0,0.0,0.0\n");
  const auto s = load_imu(tmp / "a.csv", ImuFormat::kCsv);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].t, 0.02);
  EXPECT_EQ(s[0].acc, Eigen::Vector3d(0.1, 0.0, 9.81));
  EXPECT_EQ(s[0].gyro, Eigen::Vector3d::Zero());
}

TEST(LoadImu, HeaderColumnsMayBeReordered) {
  std::istringstream in("gz,t,ax,ay,az,gx,gy\n3,1,4,5,6,7,8\n");
  const auto s = parse_imu_csv(in, "mem");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].t, 1.0);
  EXPECT_EQ(s[0].gyro.z(), 3.0);
  EXPECT_EQ(s[0].acc.x(), 4.0);
}

TEST(LoadImu, EmptyFileIsEmpty) {
  testing::TempDir tmp("imu");
  io::write_file(tmp / "e.csv", "");
  EXPECT_TRUE(load_imu(tmp / "e.csv", ImuFormat::kCsv).empty());
}

TEST(LoadImu, NonMonotonicNamesIndex) {
  testing::TempDir tmp("imu");
  io::write_file(tmp / "m.csv", "0.0,0,0,9.81,0,0,0\n0.02,0,0,9.81,0,0,0\n0.01,0,0,9.81,0,0,0\n");
  try {
    load_imu(tmp / "m.csv", ImuFormat::kCsv);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 2"), std::string::npos) << e.what();
  }
}

TEST(LoadImu, ParseErrorCarriesLine) {
  testing::TempDir tmp("imu");
  io::write_file(tmp / "p.csv", "t,ax,ay,az,gx,gy,gz\n0,0,0,9.81,0,0,0\n0.02,0,zz,9.81,0,0,0\n");
  try {
    load_imu(tmp / "p.csv", ImuFormat::kCsv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadImu, JsonlMatchesCsv) {
  testing::TempDir tmp("imu");
  io::write_file(tmp / "a.jsonl",
                 "{\"t\":0,\"ax\":1,\"ay\":2,\"az\":3,\"gx\":4,\"gy\":5,\"gz\":6}\n\n"
                 "{\"t\":0.02,\"ax\":1,\"ay\":2,\"az\":3,\"gx\":4,\"gy\":5,\"gz\":6}\n");
  EXPECT_EQ(imu_format_for(tmp / "a.jsonl"), ImuFormat::kJsonl);
  EXPECT_EQ(imu_format_for(tmp / "a.csv"), ImuFormat::kCsv);
  const auto s = load_imu(tmp / "a.jsonl", ImuFormat::kJsonl);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].gyro, Eigen::Vector3d(4, 5, 6));
  io::write_file(tmp / "b.jsonl", "{\"t\":0,\"ax\":1}\n");
  EXPECT_THROW(load_imu(tmp / "b.jsonl", ImuFormat::kJsonl), ParseError);
}

TEST(LoadImu, WriteReadRoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<ImuSample> s(30);
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = {i * 0.02, {n(rng), n(rng), n(rng)}, {n(rng), n(rng), n(rng)}};
  std::ostringstream out;
  write_imu_csv(out, s);
  std::istringstream in(out.str());
  const auto back = parse_imu_csv(in, "mem");
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].t, s[i].t);
    EXPECT_EQ(back[i].acc, s[i].acc);
    EXPECT_EQ(back[i].gyro, s[i].gyro);
  }
}

TEST(Resample, UniformInputUnchanged) {
  const auto s = constant_samples(10, {0, 0, 9.81}, {0, 0, 0.1});
  EXPECT_TRUE(is_uniform(s, 50.0));
  const auto r = resample_uniform(s, 50.0);
  ASSERT_EQ(r.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(r[i].t, s[i].t);
}

TEST(Resample, LinearInterpolationOracle) {
  // Channel values are linear in t so interpolation must be exact.
  std::vector<ImuSample> s;
  const double ts[] = {0.0, 0.013, 0.05, 0.061, 0.1, 0.133, 0.2};
  for (double t : ts) s.push_back({t, {2 * t, -t, 9.81}, {0, 0, 3 * t + 1}});
  EXPECT_FALSE(is_uniform(s, 50.0));
  const auto r = resample_uniform(s, 50.0);
  ASSERT_EQ(r.size(), 11u);
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double t = k * 0.02;
    EXPECT_NEAR(r[k].t, t, 1e-12);
    EXPECT_NEAR(r[k].acc.x(), 2 * t, 1e-12);
    EXPECT_NEAR(r[k].acc.y(), -t, 1e-12);
    EXPECT_NEAR(r[k].gyro.z(), 3 * t + 1, 1e-12);
  }
}

TEST(Resample, LongGapRejected) {
  std::vector<ImuSample> s{{0.0, {}, {}}, {0.02, {}, {}}, {0.9, {}, {}}};
  EXPECT_THROW(resample_uniform(s, 50.0), ValidationError);
}

TEST(Orientation, StationaryLevelIsIdentity) {
  const auto s = constant_samples(100, {0, 0, 9.81}, {0, 0, 0});
  const auto o = estimate_orientation(s, 0.02);
  ASSERT_EQ(o.size(), 100u);
  for (const auto& q : o) EXPECT_LT(q.q.angularDistance(Eigen::Quaterniond::Identity()), 1e-12);
}

TEST(Orientation, ConstantYawRateIntegrates) {
  const double w = 0.5;
  const std::size_t n = 501;  // T = 10 s
  const auto s = constant_samples(n, {0, 0, 9.81}, {0, 0, w});
  const auto o = estimate_orientation(s, 0.02);
  const double T = s.back().t - s.front().t;
  EXPECT_NEAR(wrap_angle(yaw_of(o.back().q) - w * T), 0.0, 1e-3);
  for (const auto& q : o) EXPECT_NEAR(q.q.norm(), 1.0, 1e-9);
}

TEST(Orientation, TiltConvergesToGravity) {
  // acc = (0, 9.81, 0): device y carries the reaction to gravity, so the
  // converged rotation must map it to world up.
  auto s = constant_samples(600, {0, 9.81, 0}, {0, 0, 0});
  const auto o = estimate_orientation(s, 0.02, OrientationInit::kIdentity);
  const Eigen::Vector3d up = o.back().q * Eigen::Vector3d::UnitY();
  EXPECT_LT(std::acos(std::clamp(up.z(), -1.0, 1.0)), 1e-2);
  const auto o2 = estimate_orientation(s, 0.02);
  EXPECT_LT(std::acos(std::clamp((o2.front().q * Eigen::Vector3d::UnitY()).z(), -1.0, 1.0)), 1e-9);
}

TEST(Orientation, RejectsBadAlpha) {
  const auto s = constant_samples(3, {0, 0, 9.81}, {0, 0, 0});
  EXPECT_THROW(estimate_orientation(s, 1.5), ValidationError);
  EXPECT_THROW(estimate_orientation({}, 0.02), ValidationError);
}

TEST(Hacf, StationaryHasZeroAcceleration) {
  const auto s = constant_samples(5, {0, 0, 9.81}, {0, 0, 0});
  std::vector<Orientation> o(5);
  for (const auto& h : to_hacf(s, o)) EXPECT_LT(h.a.norm(), 1e-12);
}

TEST(Hacf, HeadingAnchoredAtFirstFrame) {
  std::vector<ImuSample> s{{0.0, {1, 0, 9.81}, {0, 0, 0}}};
  Orientation yawed;
  yawed.q = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ());
  // Without anchoring the world acceleration is (0, 1, 0).
  const Eigen::Vector3d world = yawed.q * s[0].acc - Eigen::Vector3d(0, 0, kGravity);
  EXPECT_NEAR(world.y(), 1.0, 1e-12);
  const auto h = to_hacf(s, std::vector<Orientation>{yawed});
  EXPECT_NEAR((h[0].a - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(Hacf, IdentityGyroPassThrough) {
  std::vector<ImuSample> s{{0.0, {0, 0, 9.81}, {0, 0, 0.5}}};
  const auto h = to_hacf(s, std::vector<Orientation>(1));
  EXPECT_EQ(h[0].g, Eigen::Vector3d(0, 0, 0.5));
}

TEST(Hacf, LengthMismatch) {
  const auto s = constant_samples(3, {0, 0, 9.81}, {0, 0, 0});
  EXPECT_THROW(to_hacf(s, std::vector<Orientation>(2)), ValidationError);
}

TEST(Hacf, RotationPreservesNorm) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d acc(n(rng), n(rng), n(rng));
    const auto q = random_quat(rng);
    EXPECT_NEAR((q * acc).norm(), acc.norm(), 1e-9);
  }
}

TEST(Hacf, ReapplicationIsIdempotent) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  std::vector<ImuSample> s(40);
  std::vector<Orientation> o(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = {i * 0.02, {n(rng), n(rng), 9.81 + n(rng)}, {n(rng), n(rng), n(rng)}};
    o[i].q = random_quat(rng);
  }
  const auto h1 = to_hacf(s, o);
  // Feed HACF back with gravity restored and identity orientations.
  std::vector<ImuSample> again(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    again[i] = {h1[i].t, h1[i].a + Eigen::Vector3d(0, 0, kGravity), h1[i].g};
  const auto h2 = to_hacf(again, std::vector<Orientation>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_LT((h2[i].a - h1[i].a).norm(), 1e-12);
    EXPECT_LT((h2[i].g - h1[i].g).norm(), 1e-12);
  }
}

TEST(Hacf, YawsRelativeToFirst) {
  std::vector<Orientation> o(3);
  o[0].q = Eigen::AngleAxisd(3.0, Eigen::Vector3d::UnitZ());
  o[1].q = Eigen::AngleAxisd(-3.0, Eigen::Vector3d::UnitZ());
  o[2].q = Eigen::AngleAxisd(3.5, Eigen::Vector3d::UnitZ());
  const auto y = hacf_yaws(o);
  EXPECT_NEAR(y[0], 0.0, 1e-12);
  EXPECT_NEAR(y[1], 2 * kPi - 6.0, 1e-12);
  EXPECT_NEAR(y[2], 0.5, 1e-12);
}

TEST(Orientations, FileMatchingSlerps) {
  testing::TempDir tmp("orient");
  const Eigen::Quaterniond q1(Eigen::AngleAxisd(1.0, Eigen::Vector3d::UnitZ()));
  io::write_file(tmp / "o.csv", "t,qw,qx,qy,qz\n0,1,0,0,0\n1," + std::to_string(q1.w()) + ",0,0," +
                                    std::to_string(q1.z()) + "\n");
  const auto timed = load_orientations(tmp / "o.csv");
  ASSERT_EQ(timed.size(), 2u);
  std::vector<ImuSample> s{{0.0, {}, {}}, {0.5, {}, {}}, {1.0, {}, {}}};
  const auto o = match_orientations(s, timed);
  EXPECT_NEAR(yaw_of(o[1].q), 0.5, 1e-5);
  std::vector<ImuSample> late{{2.0, {}, {}}};
  EXPECT_THROW(match_orientations(late, timed), ValidationError);
}

std::vector<HacfSample> ramp(std::size_t n) {
  std::vector<HacfSample> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = {i * 0.02, {double(i), 0, 0}, {0, 0, double(i)}};
  return h;
}

TEST(Windows, IndexArithmetic) {
  const auto w = make_windows(ramp(129), 64, 64);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].start_frame(), 0u);
  EXPECT_EQ(w[1].start_frame(), 64u);
  EXPECT_EQ(w[1].length(), 65u);
  EXPECT_TRUE(make_windows(ramp(64), 64, 64).empty());
  EXPECT_EQ(make_windows(ramp(65), 64, 1).size(), 1u);
  EXPECT_THROW(make_windows(ramp(10), 0, 1), ValidationError);
  EXPECT_THROW(make_windows(ramp(10), 2, 0), ValidationError);
}

TEST(Windows, ChannelMajorContent) {
  const auto w = make_windows(ramp(20), 4, 3);
  const auto& win = w[2];
  for (std::size_t i = 0; i < win.length(); ++i) {
    EXPECT_EQ(win.channel(Channel::kAx)[i], double(6 + i));
    EXPECT_EQ(win.channel(Channel::kGz)[i], double(6 + i));
    EXPECT_EQ(win.acc(i).x(), double(6 + i));
  }
  EXPECT_EQ(win.data().size(), 6 * win.length());
}

TEST(Windows, StrideTauTilesWithoutGaps) {
  for (std::size_t n : {65u, 100u, 129u, 300u, 641u}) {
    const int tau = 64;
    const auto w = make_windows(ramp(n), tau, tau);
    std::size_t next = 0;
    for (const auto& win : w) {
      EXPECT_EQ(win.start_frame(), next);
      next += tau;
    }
    // The uncovered tail is shorter than a full window.
    EXPECT_LT(n - next, static_cast<std::size_t>(tau) + 1);
  }
}

}  // namespace
}  // namespace sweepnav
