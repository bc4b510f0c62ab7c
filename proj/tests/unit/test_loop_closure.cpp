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
#include "sweepnav/loop_closure.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav {
namespace {

Trajectory random_walk(std::size_t n, std::mt19937_64& rng, double step = 0.05) {
  std::normal_distribution<double> d(0.0, step);
  Trajectory t;
  double x = 0, y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      x += d(rng);
      y += d(rng);
    }
    t.poses.push_back({i / 50.0, x, y, wrap_angle(d(rng) * 20)});
  }
  return t;
}

CorrectionParams random_params(std::size_t n, std::mt19937_64& rng, double scale = 0.1) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CorrectionParams p = CorrectionParams::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.r[i] = scale * u(rng);
    p.l[i] = {scale * u(rng), scale * u(rng)};
  }
  return p;
}

// Naive per-frame evaluation: every refined position is rebuilt from p_1.
Trajectory brute_force_apply(const Trajectory& t, const CorrectionParams& c) {
  Trajectory out = t;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double x = t[0].x, y = t[0].y;
    for (std::size_t j = 1; j <= i; ++j) {
      double phi = 0;
      for (std::size_t k = 0; k <= j; ++k) phi += c.r[k];
      const double dx = t[j].x - t[j - 1].x, dy = t[j].y - t[j - 1].y;
      x += std::cos(phi) * dx - std::sin(phi) * dy;
      y += std::sin(phi) * dx + std::cos(phi) * dy;
    }
    double phi = 0;
    for (std::size_t k = 0; k <= i; ++k) phi += c.r[k];
    out.poses[i].x = x + c.l[i].x();
    out.poses[i].y = y + c.l[i].y();
    out.poses[i].yaw = testing::naive_wrap(t[i].yaw + phi);
  }
  return out;
}

double brute_force_loss(const Trajectory& t, const CorrectionParams& c, const std::vector<Eigen::Vector2d>& v,
                        const RefineConfig& cfg) {
  const auto p = brute_force_apply(t, c);
  const std::size_t n = t.size();
  const double gx = p[n - 1].x - t[0].x, gy = p[n - 1].y - t[0].y;
  double sum_r = 0;
  for (double r : c.r) sum_r += r;
  double worst = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double ex = p[i].x - p[i - 1].x - v[i].x(), ey = p[i].y - p[i - 1].y - v[i].y();
    worst = std::max(worst, std::sqrt(ex * ex + ey * ey));
  }
  return cfg.lambda_loop * (gx * gx + gy * gy) + cfg.lambda_rot * sum_r * sum_r + cfg.lambda_smooth * worst;
}

Trajectory closed_square(std::size_t per_side, double side = 2.0) {
  std::vector<std::pair<double, double>> pts;
  for (int s = 0; s < 4; ++s)
    for (std::size_t i = 0; i < per_side; ++i) {
      const double f = side * static_cast<double>(i) / per_side;
      const double xy[4][2] = {{f, 0}, {side, f}, {side - f, side}, {0, side - f}};
      pts.emplace_back(xy[s][0], xy[s][1]);
    }
  pts.emplace_back(0, 0);
  return testing::from_points(pts);
}

TEST(ApplyCorrections, IdentityIsNoOp) {
  std::mt19937_64 rng(1);
  const auto t = random_walk(50, rng);
  const auto out = apply_corrections(t, CorrectionParams::zeros(50));
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(out[i].x, t[i].x, 1e-12);
    EXPECT_NEAR(out[i].y, t[i].y, 1e-12);
    EXPECT_DOUBLE_EQ(out[i].yaw, t[i].yaw);
  }
}

TEST(ApplyCorrections, QuarterTurnAtSecondFrame) {
  const auto t = testing::from_points({{0, 0}, {1, 0}, {2, 0}});
  auto c = CorrectionParams::zeros(3);
  c.r = {0.0, kPi / 2, 0.0};
  const auto out = apply_corrections(t, c);
  EXPECT_NEAR(out[0].x, 0.0, 1e-15);
  EXPECT_NEAR(out[1].x, 0.0, 1e-15);
  EXPECT_NEAR(out[1].y, 1.0, 1e-15);
  EXPECT_NEAR(out[2].x, 0.0, 1e-15);
  EXPECT_NEAR(out[2].y, 2.0, 1e-15);
  EXPECT_NEAR(out[2].yaw, kPi / 2, 1e-15);
}

TEST(ApplyCorrections, PureDisplacementTranslates) {
  std::mt19937_64 rng(2);
  const auto t = random_walk(30, rng);
  auto c = CorrectionParams::zeros(30);
  for (auto& l : c.l) l = {0.1, 0.0};
  const auto out = apply_corrections(t, c);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(out[i].x, t[i].x + 0.1, 1e-12);
    EXPECT_NEAR(out[i].y, t[i].y, 1e-12);
  }
}

TEST(ApplyCorrections, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const auto t = random_walk(n, rng);
    const auto c = random_params(n, rng, 0.5);
    const auto a = apply_corrections(t, c), b = brute_force_apply(t, c);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_NEAR(a[i].x, b[i].x, 1e-9);
      ASSERT_NEAR(a[i].y, b[i].y, 1e-9);
      ASSERT_NEAR(std::abs(wrap_angle(a[i].yaw - b[i].yaw)), 0.0, 1e-9);
    }
  }
}

TEST(ApplyCorrections, LengthMismatch) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(apply_corrections(random_walk(5, rng), CorrectionParams::zeros(4)), ValidationError);
}

TEST(Loss, ClosedLoopZeroCorrections) {
  const auto t = closed_square(25);
  const auto v = trajectory_increments(t);
  const auto l = correction_loss(t, CorrectionParams::zeros(t.size()), v, RefineConfig{});
  EXPECT_NEAR(l.total, 0.0, 1e-24);
}

TEST(Loss, OpenEndOneMetre) {
  const auto t = testing::straight_line(51, 1.0, 0.0);  // ends at (1, 0)
  const auto l = correction_loss(t, CorrectionParams::zeros(51), trajectory_increments(t), RefineConfig{});
  EXPECT_NEAR(l.loop, 1.0, 1e-12);
  EXPECT_NEAR(l.total, 1.0, 1e-12);
  EXPECT_EQ(l.rot, 0.0);
  EXPECT_NEAR(l.smooth, 0.0, 1e-15);
}

TEST(Loss, ConstantRotationMatchesBruteForce) {
  const auto t = closed_square(25);  // T = 101
  ASSERT_EQ(t.size(), 101u);
  auto c = CorrectionParams::zeros(100);
  c.r.assign(100, 0.01);
  Trajectory t100 = t;
  t100.poses.pop_back();
  const auto v = trajectory_increments(t100);
  RefineConfig cfg;
  const auto l = correction_loss(t100, c, v, cfg);
  EXPECT_NEAR(l.rot, 1.0, 1e-12);
  EXPECT_NEAR(l.total, brute_force_loss(t100, c, v, cfg), 1e-12);
  EXPECT_GT(l.loop, 0.0);
}

TEST(Loss, MatchesBruteForceWithWeights) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 80;
    const auto t = random_walk(n, rng);
    auto v = trajectory_increments(random_walk(n, rng));
    const auto c = random_params(n, rng, 0.3);
    RefineConfig cfg;
    cfg.lambda_loop = 0.5 + (rng() % 10) / 4.0;
    cfg.lambda_rot = (rng() % 10) / 3.0;
    cfg.lambda_smooth = 0.1 + (rng() % 10);
    EXPECT_NEAR(correction_loss(t, c, v, cfg).total, brute_force_loss(t, c, v, cfg), 1e-10);
  }
}

TEST(Loss, ArgmaxTiesBreakLow) {
  const auto t = testing::from_points({{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  std::vector<Eigen::Vector2d> v{{0, 0}, {1, 0}, {0, 0}, {1, 0}};
  const auto l = correction_loss(t, CorrectionParams::zeros(4), v, RefineConfig{});
  EXPECT_EQ(l.argmax, 1u);
  EXPECT_DOUBLE_EQ(l.smooth, 1.0);
}

TEST(Loss, LogSumExpBoundsHardMax) {
  std::mt19937_64 rng(6);
  const auto t = random_walk(40, rng);
  const auto v = trajectory_increments(random_walk(40, rng));
  const auto c = random_params(40, rng);
  RefineConfig hard, soft;
  soft.smooth_temperature = 0.01;
  const double h = correction_loss(t, c, v, hard).smooth;
  const double s = correction_loss(t, c, v, soft).smooth;
  EXPECT_GE(s, h);
  EXPECT_LE(s, h + 0.01 * std::log(39.0) + 1e-12);
}

// Central differences on the loss with respect to (r, l).
TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (double temp : {0.0, 0.05}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng() % 40;
      const auto t = random_walk(n, rng);
      const auto v = trajectory_increments(random_walk(n, rng));
      auto c = random_params(n, rng, 0.2);
      RefineConfig cfg;
      cfg.smooth_temperature = temp;
      CorrectionParams g;
      const auto base = correction_loss_grad(t, c, v, cfg, &g);
      const double h = 1e-6;
      for (std::size_t i = 0; i < n; ++i) {
        auto probe = [&](double& slot, double analytic) {
          const double keep = slot;
          slot = keep + h;
          const auto lp = correction_loss(t, c, v, cfg);
          slot = keep - h;
          const auto lm = correction_loss(t, c, v, cfg);
          slot = keep;
          if (temp == 0.0 && (lp.argmax != base.argmax || lm.argmax != base.argmax)) return;
          const double fd = (lp.total - lm.total) / (2 * h);
          EXPECT_NEAR(analytic, fd, 1e-5 + 1e-4 * std::abs(fd));
        };
        probe(c.r[i], g.r[i]);
        probe(c.l[i].x(), g.l[i].x());
        probe(c.l[i].y(), g.l[i].y());
      }
    }
  }
}

TEST(CorrectionMlp, ZeroOutputInitAndShapes) {
  CorrectionMlp m(16, 3);
  EXPECT_EQ(m.num_parameters(), 16u + 16 + 256 + 16 + 48 + 3);
  const auto c = m.forward(20);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(c.r[i], 0.0);
    EXPECT_EQ(c.l[i], Eigen::Vector2d::Zero());
  }
  CorrectionMlp a(16, 3, 0.01), b(16, 3, 0.01), d(16, 4, 0.01);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), d.parameters().begin()));
  // The hidden stream does not depend on the output scale.
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().begin() + 16 + 16 + 256 + 16,
                         m.parameters().begin()));
  EXPECT_THROW(CorrectionMlp(0, 1), ValidationError);
}

TEST(CorrectionMlp, RotationBoundedByPi) {
  CorrectionMlp m(8, 5, 1.0);
  auto p = m.parameters();
  for (auto& x : p) x *= 100.0;
  const auto c = m.forward(50);
  for (double r : c.r) EXPECT_LE(std::abs(r), kPi);
}

TEST(CorrectionMlp, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const auto t = random_walk(n, rng);
    const auto v = trajectory_increments(random_walk(n, rng));
    CorrectionMlp m(8, rng(), 0.5);
    m.set_rotation_gain(trial % 2 ? 1.0 : 0.3);
    RefineConfig cfg;
    const auto ev = m.evaluate(t, v, cfg, true);
    const double h = 1e-5;
    for (std::size_t k = 0; k < m.num_parameters(); ++k) {
      auto p = m.parameters();
      const double keep = p[k];
      p[k] = keep + h;
      const auto up = m.evaluate(t, v, cfg, false);
      p[k] = keep - h;
      const auto dn = m.evaluate(t, v, cfg, false);
      p[k] = keep;
      if (up.signature != ev.signature || dn.signature != ev.signature) continue;
      const double fd = (up.terms.total - dn.terms.total) / (2 * h);
      EXPECT_NEAR(ev.grad[k], fd, 1e-5 + 1e-4 * std::abs(fd)) << "trial " << trial << " param " << k;
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(CorrectionMlp, GradientIndependentOfIsa) {
  std::mt19937_64 rng(9);
  const auto t = random_walk(120, rng);
  const auto v = trajectory_increments(t);
  CorrectionMlp m(64, 1, 0.3);
  const simd::Isa before = simd::active_isa();
  simd::set_isa(simd::Isa::kScalar);
  const auto a = m.evaluate(t, v, RefineConfig{}, true);
  simd::set_isa(simd::detected_isa());
  const auto b = m.evaluate(t, v, RefineConfig{}, true);
  simd::set_isa(before);
  EXPECT_NEAR(a.terms.total, b.terms.total, 1e-12 * (1 + std::abs(a.terms.total)));
  for (std::size_t k = 0; k < a.grad.size(); ++k)
    EXPECT_NEAR(a.grad[k], b.grad[k], 1e-9 * (1 + std::abs(a.grad[k])));
}

TEST(Refine, ClosedTrajectoryStaysClosed) {
  const auto t = closed_square(50);
  const auto v = trajectory_increments(t);
  RefineConfig cfg;
  cfg.epochs = 20;
  const auto r = refine(t, v, cfg);
  const double gap0 = (t.poses.back().position() - t[0].position()).norm();
  const double gap1 = (r.refined.poses.back().position() - t[0].position()).norm();
  EXPECT_LE(gap1, gap0 + 1e-6);
  EXPECT_LE(r.history[r.best_epoch].total, r.history[0].total);
}

TEST(Refine, DriftLoopClosesAndLoopTermShrinks) {
  // Square loop with a constant heading drift of 0.002 rad per frame.
  const auto gt = closed_square(100);
  Trajectory d = gt;
  for (std::size_t i = 1; i < gt.size(); ++i) {
    const auto inc = rotate2(gt[i].position() - gt[i - 1].position(), 0.002 * i);
    d.poses[i].x = d[i - 1].x + inc.x();
    d.poses[i].y = d[i - 1].y + inc.y();
  }
  const auto v = trajectory_increments(d);
  const auto r = refine(d, v, RefineConfig{});
  const double gap0 = (d.poses.back().position() - d[0].position()).norm();
  const double gap1 = (r.refined.poses.back().position() - d[0].position()).norm();
  EXPECT_GT(gap0, 0.5);
  EXPECT_LT(gap1, 0.1 * gap0);
  EXPECT_LE(r.history[r.best_epoch].loop, r.history[0].loop);
  ASSERT_EQ(r.history.size(), 101u);
  // Running minimum is monotone by construction; the best entry is it.
  double best = r.history[0].total;
  for (const auto& h : r.history) best = std::min(best, h.total);
  EXPECT_EQ(best, r.history[r.best_epoch].total);
}

TEST(Refine, DeterministicHistory) {
  std::mt19937_64 rng(10);
  const auto t = random_walk(200, rng);
  const auto v = trajectory_increments(t);
  RefineConfig cfg;
  cfg.epochs = 15;
  cfg.seed = 42;
  const auto a = refine(t, v, cfg), b = refine(t, v, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].total, b.history[i].total);
  EXPECT_EQ(loss_history_csv(a.history), loss_history_csv(b.history));
}

TEST(Refine, TwoFramesAndOneEpoch) {
  const auto t = testing::from_points({{0, 0}, {1, 0}});
  RefineConfig cfg;
  cfg.epochs = 1;
  const auto r = refine(t, trajectory_increments(t), cfg);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.refined.size(), 2u);
  for (double x : r.corrections.r) EXPECT_LE(std::abs(x), kPi);
  EXPECT_THROW(refine(testing::from_points({{0, 0}}), std::vector<Eigen::Vector2d>(1), cfg), ValidationError);
}

TEST(Refine, DivergenceReportsEpoch) {
  std::mt19937_64 rng(11);
  const auto t = random_walk(30, rng);
  RefineConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.epochs = 50;
  try {
    refine(t, trajectory_increments(t), cfg);
    FAIL();
  } catch (const RuntimeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1e+200"), std::string::npos) << msg;
  }
}

TEST(Refine, ConfigValidation) {
  RefineConfig c;
  c.epochs = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.lambda_rot = -1;
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(Outputs, CorrectionsAndHistoryFormats) {
  auto c = CorrectionParams::zeros(2);
  c.r[1] = 0.5;
  c.l[1] = {1, -2};
  EXPECT_EQ(corrections_jsonl(c),
            "{\"frame\":0,\"r\":0.0,\"lx\":0.0,\"ly\":0.0}\n{\"frame\":1,\"r\":0.5,\"lx\":1.0,\"ly\":-2.0}\n");
  std::vector<LossTerms> h{{3, 1, 1, 1, 0}};
  EXPECT_EQ(loss_history_csv(h), "epoch,total,loop,rot,smooth\n0,3,1,1,1\n");
}

}  // namespace
}  // namespace sweepnav
