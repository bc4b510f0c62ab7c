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

#ifndef SWEEPNAV_SIM_HPP_
#define SWEEPNAV_SIM_HPP_

// Synthetic recordings: a boustrophedon sweep that returns to its start,
// device-frame IMU for it, and a room with named items seen by a forward
// camera.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sweepnav/captions.hpp"
#include "sweepnav/imu.hpp"
#include "sweepnav/object_map.hpp"
#include "sweepnav/pose.hpp"

namespace sweepnav {

enum class TurnModel { kArc, kStopAndTurn };

TurnModel parse_turn_model(const std::string& s);
std::string to_string(TurnModel m);

struct SimConfig {
  double room_width = 4.0;   // m, along x
  double room_height = 2.0;  // m, along y
  double spacing = 0.5;      // m between rows
  double speed = 0.5;        // m/s
  double accel = 0.5;        // m/s^2, start/stop ramps
  double turn_rate = kTurnRateDefault;    // rad/s, in-place turns
  double turn_accel = kTurnAccelDefault;  // rad/s^2
  double dwell = 1.0;        // s stationary at both ends
  double sample_rate = 50.0;
  double acc_noise = 0.0;    // m/s^2
  double gyro_noise = 0.0;   // rad/s
  Eigen::Vector3d acc_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  std::uint64_t seed = 0;
  TurnModel turn = TurnModel::kArc;

  static constexpr double kTurnRateDefault = 1.5707963267948966;
  static constexpr double kTurnAccelDefault = 3.141592653589793;
};

void validate(const SimConfig& cfg);

// Path length of the sweep plus return leg (excluding in-place turns).
double sweep_length(const SimConfig& cfg);
std::size_t sweep_rows(const SimConfig& cfg);

Trajectory generate_trajectory(const SimConfig& cfg);

// Needs at least 3 frames.
std::vector<ImuSample> synthesize_imu(const Trajectory& traj, const SimConfig& cfg);

struct CameraModel {
  std::uint32_t width = 64;
  std::uint32_t height = 48;
  double focal = 48.0;
  double cx = 32.0;
  double cy = 24.0;
  MountExtrinsic mount{0.3, 0.1};
};

struct SceneItem {
  std::string name;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.25;
  double height = 1.2;
};

struct SceneConfig {
  CameraModel camera;
  double wall_margin = 1.5;     // walls sit this far outside the swept area
  double item_radius = 0.25;
  double item_height = 1.2;
  double endcap_gap = 0.8;      // item centre beyond the row end
  // Items are captioned when their bearing is strictly below this; 0 picks
  // the half-angle of the central depth region.
  double caption_half_angle = 0.0;
  double caption_min_range = 0.3;
  double caption_max_range = 3.0;
  double region_fraction = 0.2;
  double capture_distance = 0.5;
  double capture_rotation = 1.5707963267948966;
};

void validate(const SceneConfig& cfg);
double caption_half_angle(const SceneConfig& cfg);

// Worst-case offset of a localised point from its item centre: the central
// region's half-width at the maximum caption range plus the item radius.
double raster_quantization_bound(const SceneConfig& cfg);

// Items at the row ends the robot drives toward, in path order.
std::vector<SceneItem> default_items(const SimConfig& sim, const SceneConfig& scene, std::size_t count);

struct RoomBounds {
  double x0, y0, x1, y1;
};
RoomBounds room_bounds(const SimConfig& sim, const SceneConfig& scene);

DepthRaster render_depth(const Pose2& pose, const std::vector<SceneItem>& items, const RoomBounds& room,
                         const CameraModel& camera);

// Caption rule: in front, bearing strictly below the half-angle, centre range
// within [min, max], and the sight line at camera height not blocked by
// another item.
bool item_captioned(const Pose2& pose, const SceneItem& item, const std::vector<SceneItem>& items,
                    const SceneConfig& cfg);

struct SceneCapture {
  CaptureImage image;
  DepthRaster raster;
  CaptionRecord caption;
};

struct Scene {
  std::vector<SceneCapture> captures;
  std::vector<NamedPosition> truth;
};

// Captures follow the capture schedule of the ground-truth trajectory.
Scene generate_scene(const SimConfig& sim, const Trajectory& gt, const std::vector<SceneItem>& items,
                     const SceneConfig& cfg);

std::string image_id_for_frame(std::size_t frame);

}  // namespace sweepnav

#endif  // SWEEPNAV_SIM_HPP_
