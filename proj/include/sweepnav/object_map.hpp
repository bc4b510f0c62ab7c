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

#ifndef SWEEPNAV_OBJECT_MAP_HPP_
#define SWEEPNAV_OBJECT_MAP_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "sweepnav/metrics.hpp"
#include "sweepnav/pose.hpp"

namespace sweepnav {

struct DepthRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  float focal = 1.0f;  // px
  float cx = 0.0f;
  float cy = 0.0f;
  std::vector<float> depth;  // row-major metres, 0 = invalid

  float at(std::uint32_t u, std::uint32_t v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
};

std::string encode_raster(const DepthRaster& r);
DepthRaster decode_raster(std::string_view bytes, const std::string& source);
DepthRaster load_raster(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const DepthRaster& r);

// Camera frame: X right, Y down, Z forward. The phone sits level and faces
// the robot's heading.
struct MountExtrinsic {
  double height = 0.3;          // m above the floor
  double forward_offset = 0.0;  // m ahead of the robot origin
};

// Half-open pixel rectangle [u0, u1) x [v0, v1).
struct PixelRect {
  std::uint32_t u0 = 0, v0 = 0, u1 = 0, v1 = 0;
};

Eigen::Vector3d pixel_to_camera(const DepthRaster& r, double u, double v, double depth);
Eigen::Vector3d camera_to_world(const Eigen::Vector3d& cam, const Pose2& pose, const MountExtrinsic& mount);
Eigen::Vector3d world_to_camera(const Eigen::Vector3d& world, const Pose2& pose, const MountExtrinsic& mount);
// (u, v, depth) of a camera-frame point; depth <= 0 means behind the camera.
Eigen::Vector3d camera_to_pixel(const DepthRaster& r, const Eigen::Vector3d& cam);

// World points of every valid pixel in the rectangle.
std::vector<Eigen::Vector3d> unproject(const DepthRaster& r, const PixelRect& rect, const Pose2& pose,
                                       const MountExtrinsic& mount);

// The central `fraction` x `fraction` box of the image.
PixelRect central_region(const DepthRaster& r, double fraction);

struct CaptionRecord {
  std::string image_id;
  std::size_t frame = 0;
  std::vector<std::string> items;
};

std::vector<CaptionRecord> parse_captions_jsonl(std::string_view text, const std::string& source);
std::vector<CaptionRecord> load_captions(const std::filesystem::path& path);
std::string captions_jsonl(std::span<const CaptionRecord> records);

// NFC, lowercase, punctuation removed, whitespace runs collapsed to one
// space and trimmed.
std::string normalize_name(std::string_view raw);

struct ItemObservation {
  std::string name;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  std::string image_id;
};

struct ObserveConfig {
  double region_fraction = 0.2;
  double depth_min = 0.3;
  double depth_max = 5.0;
  double z_min = 0.0;
  double z_max = 3.0;
  MountExtrinsic mount;
};

// Every named item in the caption is placed on the principal ray at the
// median valid depth of the central region. Skipped items append a reason.
std::vector<ItemObservation> observe_items(const CaptionRecord& caption, const DepthRaster& raster,
                                           const Pose2& pose, const ObserveConfig& cfg,
                                           std::vector<std::string>* skipped = nullptr);

struct ItemCluster {
  std::string name;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::size_t n_observations = 0;
  double spread = 0.0;  // RMS distance to the centroid
};

struct ClusterConfig {
  double epsilon = 1.5;
  std::size_t min_observations = 1;
};

// Per name, single linkage at distance <= epsilon. Output is sorted by name,
// then by each cluster's smallest member in (x, y, z) order.
std::vector<ItemCluster> cluster_items(std::span<const ItemObservation> observations, const ClusterConfig& cfg);

std::string item_map_jsonl(std::span<const ItemCluster> clusters);
std::vector<ItemCluster> load_item_map(const std::filesystem::path& path);

struct NamedPosition {
  std::string name;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

std::vector<NamedPosition> load_ground_truth_items(const std::filesystem::path& path);
std::string ground_truth_items_csv(std::span<const NamedPosition> items);

struct MapEvalReport {
  struct Item {
    std::string name;
    Eigen::Vector2d estimated;  // after alignment
    Eigen::Vector2d truth;
    double error;
  };
  std::vector<Item> matched;
  double mean_error = 0.0;
  double std_error = 0.0;  // population
  std::vector<std::string> unmatched_estimated;
  std::vector<std::string> unmatched_truth;
};

// Names are compared after normalisation. When a name has several clusters
// the one with the most observations is used.
MapEvalReport evaluate_map(std::span<const ItemCluster> estimated, std::span<const NamedPosition> truth,
                           const Similarity2& alignment);
nlohmann::ordered_json map_report_to_json(const MapEvalReport& r);

}  // namespace sweepnav

#endif  // SWEEPNAV_OBJECT_MAP_HPP_
