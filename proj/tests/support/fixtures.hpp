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

#ifndef SWEEPNAV_TESTS_FIXTURES_HPP_
#define SWEEPNAV_TESTS_FIXTURES_HPP_

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "sweepnav/pose.hpp"

namespace sweepnav::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sweepnav_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Constant velocity (vx, vy) from the origin, heading along the motion.
inline Trajectory straight_line(std::size_t frames, double vx, double vy, double rate = 50.0) {
  Trajectory t;
  t.frame_rate = rate;
  const double yaw = (vx == 0.0 && vy == 0.0) ? 0.0 : std::atan2(vy, vx);
  for (std::size_t i = 0; i < frames; ++i) {
    const double s = static_cast<double>(i) / rate;
    t.poses.push_back({s, vx * s, vy * s, yaw});
  }
  return t;
}

// Uniform frames at `rate` with caller-supplied positions.
inline Trajectory from_points(const std::vector<std::pair<double, double>>& pts, double rate = 50.0) {
  Trajectory t;
  t.frame_rate = rate;
  for (std::size_t i = 0; i < pts.size(); ++i)
    t.poses.push_back({static_cast<double>(i) / rate, pts[i].first, pts[i].second, 0.0});
  return t;
}

// The straightforward reading of the frame-wrapping rule, for comparisons.
inline double naive_wrap(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace sweepnav::testing

#endif  // SWEEPNAV_TESTS_FIXTURES_HPP_
