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

#ifndef SWEEPNAV_PIPELINE_HPP_
#define SWEEPNAV_PIPELINE_HPP_

// The six commands. Each reads the dataset manifest, writes its outputs next
// to it and records them in the manifest. Run metadata (timings, wall-clock
// stamps) only goes to *_meta.json.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sweepnav/config.hpp"
#include "sweepnav/imu.hpp"
#include "sweepnav/pose.hpp"
#include "sweepnav/sim.hpp"
#include "sweepnav/trajectory.hpp"

namespace sweepnav {

class Manifest {
 public:
  static Manifest load(const std::filesystem::path& dir);
  static Manifest create(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  nlohmann::ordered_json& json() { return j_; }
  const nlohmann::ordered_json& json() const { return j_; }

  std::optional<std::filesystem::path> file(const std::string& key) const;
  // Throws ValidationError when the entry is missing or the file is absent.
  std::filesystem::path require(const std::string& key, const std::string& why) const;
  void set_file(const std::string& key, const std::string& relative);
  void save() const;

 private:
  std::filesystem::path dir_;
  nlohmann::ordered_json j_;
};

SimConfig sim_config_from(const Config& cfg);
SceneConfig scene_config_from(const Config& cfg);

// Sets the log level and kernel variant.
void apply_runtime(const Config& cfg);

struct InferOutput {
  IntegrationResult integration;
  std::vector<VelocityEstimate> windows;
  std::vector<CaptureEvent> captures;
  std::size_t dropped_members = 0;
  double seconds_orientation = 0.0;
  double seconds_estimate = 0.0;
  double seconds_integrate = 0.0;
};

// IMU -> orientation -> HACF -> windows -> (RAE) velocities -> Kalman
// trajectory -> capture schedule. `gt` is needed for the oracle estimator.
InferOutput run_inference(std::span<const ImuSample> imu, std::shared_ptr<const Trajectory> gt,
                          const Config& cfg, const std::vector<TimedOrientation>* orientations = nullptr);

std::string velocities_csv(const IntegrationResult& r);
std::vector<Eigen::Vector2d> load_frame_velocities(const std::filesystem::path& path);

std::string trajectories_svg(const std::vector<std::pair<std::string, Trajectory>>& trajs);

void cmd_simulate(const Config& cfg);
void cmd_infer(const Config& cfg);
void cmd_refine(const Config& cfg);
void cmd_eval(const Config& cfg);
void cmd_map(const Config& cfg);
void cmd_plot(const Config& cfg);

const std::vector<std::string>& command_names();
void run_command(const std::string& name, const Config& cfg);

}  // namespace sweepnav

#endif  // SWEEPNAV_PIPELINE_HPP_
