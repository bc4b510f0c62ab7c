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

#ifndef SWEEPNAV_POSE_HPP_
#define SWEEPNAV_POSE_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sweepnav {

// Planar robot pose. yaw is kept in (-pi, pi].
struct Pose2 {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
};

struct Trajectory {
  std::vector<Pose2> poses;
  double frame_rate = 50.0;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  const Pose2& operator[](std::size_t i) const { return poses[i]; }
  Pose2& operator[](std::size_t i) { return poses[i]; }
};

// Strictly increasing timestamps, finite fields, wrapped yaw, and (when
// check_uniform) spacing of 1/frame_rate within 1e-6 s.
void validate_trajectory(const Trajectory& traj, bool check_uniform = true);

// CSV `t,x,y,yaw`. The frame rate is inferred from the first interval.
Trajectory load_trajectory(const std::filesystem::path& path);
Trajectory parse_trajectory_csv(std::istream& in, const std::string& source);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
std::string trajectory_csv(const Trajectory& traj);

}  // namespace sweepnav

#endif  // SWEEPNAV_POSE_HPP_
