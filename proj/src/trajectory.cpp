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

#include "sweepnav/trajectory.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

IntegrationResult integrate_detailed(std::span<const VelocityEstimate> velocities, std::span<const double> yaws,
                                     const KalmanConfig& kf, int tau) {
  if (velocities.empty()) throw ValidationError("integrate: no velocity estimates");
  if (yaws.empty()) throw ValidationError("integrate: empty yaw sequence");
  if (!(kf.frame_rate > 0.0) || !(kf.sigma_p >= 0.0) || !(kf.sigma_v >= 0.0))
    throw ValidationError("integrate: invalid Kalman configuration");
  const std::size_t n = yaws.size();
  const double dt = 1.0 / kf.frame_rate;

  // Observation per frame from the window estimates.
  std::vector<Eigen::Vector2d> obs(n, Eigen::Vector2d::Zero());
  std::vector<bool> has(n, false);
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    const std::size_t begin = velocities[i].window_start;
    const std::size_t end = i + 1 < velocities.size()
                                ? velocities[i + 1].window_start
                                : begin + static_cast<std::size_t>(std::max(tau, 1));
    if (i + 1 < velocities.size() && end <= begin)
      throw ValidationError("integrate: window starts must increase");
    for (std::size_t f = begin; f < std::min(end, n); ++f) {
      obs[f] = velocities[i].v;
      has[f] = true;
    }
  }

  Eigen::Vector4d x(kf.initial_position.x(), kf.initial_position.y(), 0.0, 0.0);
  Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
  p(2, 2) = p(3, 3) = kf.initial_velocity_sigma * kf.initial_velocity_sigma;

  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = f(1, 3) = dt;
  const double q = kf.sigma_p * kf.sigma_p;
  Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
  qm(0, 0) = qm(1, 1) = q * dt * dt * dt / 3.0;
  qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = q * dt * dt / 2.0;
  qm(2, 2) = qm(3, 3) = q * dt;
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 2) = h(1, 3) = 1.0;
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * kf.sigma_v * kf.sigma_v;

  IntegrationResult res;
  res.trajectory.frame_rate = kf.frame_rate;
  res.trajectory.poses.reserve(n);
  res.frame_velocity.reserve(n);
  res.observed = has;
  for (std::size_t k = 0; k < n; ++k) {
    if (has[k]) {
      const Eigen::Matrix2d s = h * p * h.transpose() + r;
      const Eigen::Matrix<double, 4, 2> gain = p * h.transpose() * s.inverse();
      x += gain * (obs[k] - h * x);
      const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
      p = ikh * p * ikh.transpose() + gain * r * gain.transpose();
    }
    res.trajectory.poses.push_back(
        {kf.t0 + static_cast<double>(k) * dt, x(0), x(1), wrap_angle(yaws[k])});
    res.frame_velocity.push_back(has[k] ? obs[k] : Eigen::Vector2d(x(2), x(3)));
    x = f * x;
    p = f * p * f.transpose() + qm;
  }
  return res;
}

Trajectory integrate(std::span<const VelocityEstimate> velocities, std::span<const double> yaws,
                     const KalmanConfig& kf, int tau) {
  return integrate_detailed(velocities, yaws, kf, tau).trajectory;
}

std::vector<Eigen::Vector2d> per_frame_displacements(std::span<const Eigen::Vector2d> frame_velocity,
                                                     double frame_rate) {
  std::vector<Eigen::Vector2d> out(frame_velocity.size(), Eigen::Vector2d::Zero());
  for (std::size_t t = 1; t < frame_velocity.size(); ++t) out[t] = frame_velocity[t - 1] / frame_rate;
  return out;
}

std::string to_string(CaptureTrigger t) {
  switch (t) {
    case CaptureTrigger::kFirst:
      return "first";
    case CaptureTrigger::kDistance:
      return "distance";
    case CaptureTrigger::kRotation:
      return "rotation";
  }
  return "?";
}

TriggerLogic parse_trigger_logic(const std::string& s) {
  if (s == "or") return TriggerLogic::kOr;
  if (s == "and") return TriggerLogic::kAnd;
  throw ValidationError("capture.logic must be 'or' or 'and', got '" + s + "'");
}

std::vector<CaptureEvent> capture_schedule(const Trajectory& traj, double d, double theta_cap,
                                           TriggerLogic logic) {
  if (!(d > 0.0)) throw ValidationError("capture distance must be > 0");
  if (!(theta_cap > 0.0)) throw ValidationError("capture rotation threshold must be > 0");
  std::vector<CaptureEvent> out;
  if (traj.empty()) return out;
  out.push_back({0, traj[0], CaptureTrigger::kFirst});
  double dist = 0.0;
  double turn = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    dist += (traj[k].position() - traj[k - 1].position()).norm();
    turn += std::abs(wrap_angle(traj[k].yaw - traj[k - 1].yaw));
    const bool by_dist = dist >= d - kCaptureSlack;
    const bool by_turn = turn >= theta_cap - kCaptureSlack;
    const bool fire = logic == TriggerLogic::kOr ? (by_dist || by_turn) : (by_dist && by_turn);
    if (!fire) continue;
    out.push_back({k, traj[k], by_dist ? CaptureTrigger::kDistance : CaptureTrigger::kRotation});
    dist = 0.0;
    turn = 0.0;
  }
  return out;
}

std::string captures_jsonl(std::span<const CaptureEvent> events) {
  std::string out;
  for (const auto& e : events) {
    nlohmann::ordered_json j = {{"frame", e.frame}, {"t", e.pose.t},
                                {"x", e.pose.x},    {"y", e.pose.y},
                                {"yaw", e.pose.yaw}, {"trigger", to_string(e.trigger)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<CaptureEvent> load_captures(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<CaptureEvent> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      CaptureEvent e;
      e.frame = j.at("frame").get<std::size_t>();
      e.pose = {j.at("t").get<double>(), j.at("x").get<double>(), j.at("y").get<double>(),
                j.at("yaw").get<double>()};
      const auto trig = j.at("trigger").get<std::string>();
      e.trigger = trig == "first"      ? CaptureTrigger::kFirst
                  : trig == "distance" ? CaptureTrigger::kDistance
                                       : CaptureTrigger::kRotation;
      out.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path.string(), i + 1, ex.what());
    }
  }
  return out;
}

}  // namespace sweepnav
