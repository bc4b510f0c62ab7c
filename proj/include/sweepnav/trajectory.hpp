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

#ifndef SWEEPNAV_TRAJECTORY_HPP_
#define SWEEPNAV_TRAJECTORY_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sweepnav/estimator.hpp"
#include "sweepnav/pose.hpp"

namespace sweepnav {

struct KalmanConfig {
  double sigma_p = 0.1;  // process noise, m/s^2 (white acceleration)
  double sigma_v = 0.1;  // velocity observation noise, m/s
  double initial_velocity_sigma = 100.0;
  double frame_rate = 50.0;
  Eigen::Vector2d initial_position = Eigen::Vector2d::Zero();
  double t0 = 0.0;
};

struct IntegrationResult {
  Trajectory trajectory;
  // Velocity observed at each frame (the window estimate held over its
  // span); frames after the last window carry the filter's velocity state.
  std::vector<Eigen::Vector2d> frame_velocity;
  std::vector<bool> observed;
};

// Constant-velocity Kalman filter over (x, y, vx, vy). Each window estimate
// observes (vx, vy) on frames [start, next_start), the last window on
// [start, start + tau). One pose per yaw sample; yaw is copied from `yaws`.
IntegrationResult integrate_detailed(std::span<const VelocityEstimate> velocities, std::span<const double> yaws,
                                     const KalmanConfig& kf, int tau);
Trajectory integrate(std::span<const VelocityEstimate> velocities, std::span<const double> yaws,
                     const KalmanConfig& kf, int tau);

// Per-step displacement for step t-1 -> t: frame_velocity[t-1] / frame_rate.
// Entry 0 is zero.
std::vector<Eigen::Vector2d> per_frame_displacements(std::span<const Eigen::Vector2d> frame_velocity,
                                                     double frame_rate);

enum class CaptureTrigger { kFirst, kDistance, kRotation };
enum class TriggerLogic { kOr, kAnd };

std::string to_string(CaptureTrigger t);
TriggerLogic parse_trigger_logic(const std::string& s);

struct CaptureEvent {
  std::size_t frame = 0;
  Pose2 pose;
  CaptureTrigger trigger = CaptureTrigger::kFirst;
};

// Comparisons against the thresholds allow 1e-9 of slack so that exact
// multiples of d survive floating-point accumulation.
inline constexpr double kCaptureSlack = 1e-9;

// Frame 0 always fires. Afterwards a capture fires when the path length
// since the last capture reaches d or the accumulated |delta yaw| reaches
// theta_cap (both, for kAnd); accumulators reset on each capture.
std::vector<CaptureEvent> capture_schedule(const Trajectory& traj, double d, double theta_cap,
                                           TriggerLogic logic = TriggerLogic::kOr);

std::string captures_jsonl(std::span<const CaptureEvent> events);
std::vector<CaptureEvent> load_captures(const std::filesystem::path& path);

}  // namespace sweepnav

#endif  // SWEEPNAV_TRAJECTORY_HPP_
