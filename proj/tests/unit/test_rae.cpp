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

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sweepnav/common.hpp"
#include "sweepnav/estimator.hpp"
#include "sweepnav/rae.hpp"

namespace sweepnav {
namespace {

constexpr int kTau = 64;

std::shared_ptr<const Trajectory> unit_x_run() {
  return std::make_shared<const Trajectory>(testing::straight_line(400, 1.0, 0.0));
}

ImuWindow noisy_window(std::size_t start, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ImuWindow w(start, kTau + 1);
  for (std::size_t i = 0; i < w.length(); ++i) w.set(i, {n(rng), n(rng), n(rng)}, {n(rng), n(rng), n(rng)});
  return w;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Ignores the window and returns a fixed vector.
class ConstModel final : public VelocityModel {
 public:
  explicit ConstModel(Eigen::Vector2d v) : v_(v) {}
  int tau() const override { return kTau; }
  std::string name() const override { return "const"; }
  Eigen::Vector2d predict(const ImuWindow&) const override { return v_; }

 private:
  Eigen::Vector2d v_;
};

// Non-finite for inputs rotated into the lower half plane.
class FlakyModel final : public VelocityModel {
 public:
  int tau() const override { return kTau; }
  std::string name() const override { return "flaky"; }
  Eigen::Vector2d predict(const ImuWindow& w) const override {
    if (w.frame_angle() < 0.0) return {std::nan(""), 0.0};
    return rotate2({1.0, 0.0}, w.frame_angle());
  }
};

TEST(RotateWindow, IdentityAndAxisRotation) {
  ImuWindow w(0, 3);
  w.set(0, {1, 0, 5}, {0, 2, 7});
  EXPECT_EQ(rotate_window(w, 0.0), w);
  const auto r = rotate_window(w, kPi / 2);
  EXPECT_NEAR((r.acc(0) - Eigen::Vector3d(0, 1, 5)).norm(), 0, 1e-15);
  EXPECT_NEAR((r.gyro(0) - Eigen::Vector3d(-2, 0, 7)).norm(), 0, 1e-15);
  EXPECT_EQ(r.acc(0).z(), 5.0);
}

TEST(RotateWindow, InverseComposition) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(-7, 7);
  for (int i = 0; i < 50; ++i) {
    const auto w = noisy_window(0, rng);
    const double th = a(rng);
    const auto back = rotate_window(rotate_window(w, th), -th);
    for (std::size_t k = 0; k < w.data().size(); ++k) EXPECT_NEAR(back.data()[k], w.data()[k], 1e-12);
    EXPECT_NEAR(back.frame_angle(), 0.0, 1e-12);
  }
}

TEST(RotateWindow, MatchesPerSampleRotation) {
  std::mt19937_64 rng(2);
  const auto w = noisy_window(0, rng);
  const auto r = rotate_window(w, 0.3);
  for (std::size_t i = 0; i < w.length(); ++i) {
    EXPECT_NEAR((r.acc(i) - rotate_z(w.acc(i), 0.3)).norm(), 0, 1e-14);
    EXPECT_NEAR((r.gyro(i) - rotate_z(w.gyro(i), 0.3)).norm(), 0, 1e-14);
  }
}

TEST(Angles, GridAndSeeded) {
  RaeConfig c;
  c.k = 4;
  const auto g = rae_angles(c, 0);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g[0], -kPi);
  EXPECT_DOUBLE_EQ(g[1], -kPi / 2);
  EXPECT_DOUBLE_EQ(g[2], 0.0);
  EXPECT_DOUBLE_EQ(g[3], kPi / 2);
  c.angle_mode = AngleMode::kSeededRandom;
  c.k = 50;
  const auto r1 = rae_angles(c, 9);
  EXPECT_EQ(r1, rae_angles(c, 9));
  EXPECT_NE(r1, rae_angles(c, 10));
  for (double a : r1) {
    EXPECT_GE(a, -kPi);
    EXPECT_LT(a, kPi);
  }
  c.k = 0;
  EXPECT_THROW(rae_angles(c, 0), ValidationError);
  RaeConfig t;
  t.trim_fraction = 0.5;
  EXPECT_THROW(validate(t), ValidationError);
  EXPECT_THROW(parse_reducer("mode"), ValidationError);
  EXPECT_EQ(parse_angle_mode("seeded_random"), AngleMode::kSeededRandom);
}

TEST(Rae, SingleMemberEquivariance) {
  OracleVelocityModel m({unit_x_run(), {0, 0}, 0.0, {}}, kTau, 0);
  RaeConfig c;
  c.k = 1;
  const auto v = rae_estimate(ImuWindow(0, kTau + 1), m, c, 0).v;
  EXPECT_NEAR((v - Eigen::Vector2d(1, 0)).norm(), 0.0, 1e-12);
}

TEST(Rae, ExactRecoveryEveryConfiguration) {
  std::mt19937_64 rng(3);
  OracleVelocityModel m({unit_x_run(), {0, 0}, 0.0, {}}, kTau, 0);
  for (int k = 1; k <= 8; ++k)
    for (auto red : {Reducer::kMedian, Reducer::kMean, Reducer::kTrimmedMean})
      for (auto mode : {AngleMode::kGrid, AngleMode::kSeededRandom}) {
        RaeConfig c{k, mode, red, 0.2};
        const auto w = noisy_window(rng() % 300, rng);
        const auto single = estimate_velocity(w, m).v;
        const auto v = rae_estimate(w, m, c, rng()).v;
        EXPECT_NEAR((v - single).norm(), 0.0, 1e-12) << k;
      }
}

TEST(Rae, MeanGridCancelsBias) {
  OracleVelocityModel m({unit_x_run(), {0.1, 0}, 0.0, {}}, kTau, 0);
  for (int k : {2, 3, 4, 5, 7}) {
    RaeConfig c{k, AngleMode::kGrid, Reducer::kMean, 0.2};
    const auto v = rae_estimate(ImuWindow(0, kTau + 1), m, c, 0).v;
    EXPECT_NEAR((v - Eigen::Vector2d(1, 0)).norm(), 0.0, 1e-12) << k;
  }
}

TEST(Rae, MedianK5AgainstHandComputedOracle) {
  const Eigen::Vector2d b(0.1, 0.0);
  OracleVelocityModel m({unit_x_run(), b, 0.0, {}}, kTau, 0);
  RaeConfig c{5, AngleMode::kGrid, Reducer::kMedian, 0.2};
  // Members are (1,0) + Z(b | -theta_k).
  std::vector<double> xs, ys;
  for (int k = 0; k < 5; ++k) {
    const double th = -kPi + 2 * kPi * k / 5;
    xs.push_back(1.0 + b.x() * std::cos(-th) - b.y() * std::sin(-th));
    ys.push_back(b.x() * std::sin(-th) + b.y() * std::cos(-th));
  }
  const Eigen::Vector2d expect(median_of(xs), median_of(ys));
  const auto v = rae_estimate(ImuWindow(0, kTau + 1), m, c, 0).v;
  EXPECT_NEAR((v - expect).norm(), 0.0, 1e-12);
  const double err = (v - Eigen::Vector2d(1, 0)).norm();
  EXPECT_LT(err, b.norm());
  EXPECT_LT(err, (Eigen::Vector2d(1.1, 0) - Eigen::Vector2d(1, 0)).norm());
}

TEST(Rae, PermutationInvariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Eigen::Vector2d> v(1 + rng() % 9);
    for (auto& x : v) x = {n(rng), n(rng)};
    for (auto red : {Reducer::kMedian, Reducer::kMean, Reducer::kTrimmedMean}) {
      const auto ref = reduce_members(v, red, 0.2);
      auto p = v;
      std::shuffle(p.begin(), p.end(), rng);
      EXPECT_EQ(reduce_members(p, red, 0.2), ref);
    }
  }
}

TEST(Rae, MedianRobustToOneCorruptedMember) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> big(-1e6, 1e6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Eigen::Vector2d> v(5);
    for (auto& x : v) x = {n(rng), n(rng)};
    const auto before = reduce_members(v, Reducer::kMedian);
    const std::size_t bad = rng() % 5;
    auto c = v;
    c[bad] += Eigen::Vector2d(big(rng), big(rng));
    const auto after = reduce_members(c, Reducer::kMedian);
    for (int comp = 0; comp < 2; ++comp) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < 5; ++i)
        if (i != bad) {
          lo = std::min(lo, v[i][comp]);
          hi = std::max(hi, v[i][comp]);
        }
      EXPECT_LE(std::abs(after[comp] - before[comp]), hi - lo + 1e-15);
    }
  }
}

TEST(Rae, ReducerDefinitions) {
  std::vector<Eigen::Vector2d> v{{1, 10}, {2, 20}, {3, 30}, {100, -5}};
  EXPECT_EQ(reduce_members(v, Reducer::kMedian), Eigen::Vector2d(2.5, 15));
  EXPECT_EQ(reduce_members(v, Reducer::kMean), Eigen::Vector2d(26.5, 13.75));
  EXPECT_EQ(reduce_members(v, Reducer::kTrimmedMean, 0.25), Eigen::Vector2d(2.5, 15));
  EXPECT_THROW(reduce_members({}, Reducer::kMean), RuntimeError);
}

TEST(Rae, MembersDroppedWhenNonFinite) {
  FlakyModel m;
  RaeConfig c{4, AngleMode::kGrid, Reducer::kMean, 0.2};
  const auto r = rae_estimate_detailed(ImuWindow(0, kTau + 1), m, c, 0);
  // -pi wraps to +pi; -pi/2 is dropped.
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_EQ(r.members.size(), 3u);
  EXPECT_NEAR((r.estimate.v - Eigen::Vector2d(1, 0)).norm(), 0, 1e-12);
  const std::vector<double> neg{-0.5, -1.0};
  EXPECT_THROW(rae_estimate_with_angles(ImuWindow(0, kTau + 1), m, neg, Reducer::kMean, 0.2), RuntimeError);
}

TEST(Rae, TauMismatch) {
  ConstModel m({1, 0});
  RaeConfig c;
  EXPECT_THROW(rae_estimate(ImuWindow(0, 10), m, c, 0), ValidationError);
}

TEST(Rae, OutputClamped) {
  ConstModel m({3, 0});
  RaeConfig c{1, AngleMode::kGrid, Reducer::kMedian, 0.2};
  const auto e = rae_estimate(ImuWindow(0, kTau + 1), m, c, 0, 2.0);
  EXPECT_TRUE(e.clamped);
  EXPECT_NEAR(e.v.norm(), 2.0, 1e-12);
}

TEST(EquivarianceError, Cases) {
  OracleVelocityModel exact({unit_x_run(), {0, 0}, 0.0, {}}, kTau, 0);
  const std::vector<double> many{-3.0, -1.0, 0.0, 0.4, 2.5};
  EXPECT_NEAR(equivariance_error(ImuWindow(0, kTau + 1), exact, many), 0.0, 1e-12);
  OracleVelocityModel biased({unit_x_run(), {0.1, 0}, 0.0, {}}, kTau, 0);
  const std::vector<double> opp{0.0, kPi};
  EXPECT_NEAR(equivariance_error(ImuWindow(0, kTau + 1), biased, opp), 0.2, 1e-12);
  const std::vector<double> quarter{0.0, kPi / 2};
  EXPECT_NEAR(equivariance_error(ImuWindow(0, kTau + 1), ConstModel({1, 0}), quarter), std::sqrt(2.0), 1e-12);
  const std::vector<double> one{0.0};
  EXPECT_THROW(equivariance_error(ImuWindow(0, kTau + 1), exact, one), ValidationError);
}

}  // namespace
}  // namespace sweepnav
