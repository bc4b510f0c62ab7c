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

#include "sweepnav/config.hpp"

#include <fmt/format.h>

#include "sweepnav/captions.hpp"
#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

namespace {

const char* type_name(Config::Type t) {
  switch (t) {
    case Config::Type::kBool:
      return "a boolean";
    case Config::Type::kInt:
      return "an integer";
    case Config::Type::kDouble:
      return "a number";
    case Config::Type::kString:
      return "a string";
  }
  return "?";
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::vector<std::pair<std::string, nlohmann::json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, key, out);
    else out.emplace_back(key, *it);
  }
}

}  // namespace

void Config::define(const std::string& key, Type type, nlohmann::json value, std::string help,
                    std::vector<std::string> aliases) {
  entries_[key] = {type, std::move(value), std::move(help), std::move(aliases)};
}

const Config::Entry& Config::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError(fmt::format("unknown config key '{}'", key));
  return it->second;
}

void Config::set(const std::string& key, const nlohmann::json& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError(fmt::format("unknown config key '{}'", key));
  Entry& e = it->second;
  bool ok = false;
  switch (e.type) {
    case Type::kBool:
      ok = value.is_boolean();
      break;
    case Type::kInt:
      ok = value.is_number_integer();
      break;
    case Type::kDouble:
      ok = value.is_number();
      break;
    case Type::kString:
      ok = value.is_string();
      break;
  }
  if (!ok) throw ValidationError(fmt::format("config key '{}' expects {}, got {}", key, type_name(e.type), value.dump()));
  e.value = e.type == Type::kDouble ? nlohmann::json(value.get<double>()) : value;
}

void Config::set_text(const std::string& key, const std::string& text) {
  const Entry& e = entry(key);
  const std::string src = "--" + key;
  switch (e.type) {
    case Type::kBool:
      if (text == "true" || text == "1") set(key, true);
      else if (text == "false" || text == "0") set(key, false);
      else throw ValidationError(fmt::format("config key '{}' expects true or false, got '{}'", key, text));
      break;
    case Type::kInt:
      try {
        set(key, io::parse_int(text, src, 1));
      } catch (const ParseError&) {
        throw ValidationError(fmt::format("config key '{}' expects an integer, got '{}'", key, text));
      }
      break;
    case Type::kDouble:
      try {
        set(key, io::parse_double(text, src, 1));
      } catch (const ParseError&) {
        throw ValidationError(fmt::format("config key '{}' expects a number, got '{}'", key, text));
      }
      break;
    case Type::kString:
      set(key, text);
      break;
  }
}

void Config::merge_json(const nlohmann::json& j, const std::string& source) {
  if (!j.is_object()) throw ValidationError(source + ": configuration must be a JSON object");
  std::vector<std::pair<std::string, nlohmann::json>> flat;
  flatten(j, "", flat);
  for (const auto& [k, v] : flat) {
    if (!has(k)) throw ValidationError(fmt::format("{}: unknown config key '{}'", source, k));
    set(k, v);
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  merge_json(j, path.string());
}

bool Config::flag(const std::string& key) const { return entry(key).value.get<bool>(); }
std::int64_t Config::integer(const std::string& key) const { return entry(key).value.get<std::int64_t>(); }
double Config::number(const std::string& key) const { return entry(key).value.get<double>(); }
std::string Config::str(const std::string& key) const { return entry(key).value.get<std::string>(); }

nlohmann::ordered_json Config::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, e] : entries_) j[k] = e.value;
  return j;
}

Config default_config() {
  using T = Config::Type;
  Config c;
  c.define("data", T::kString, "data", "dataset directory (read and extended by every command)");
  c.define("seed", T::kInt, 0, "master random seed");
  c.define("log.level", T::kString, "info", "trace|debug|info|warn|error|off");
  c.define("simd.isa", T::kString, "auto", "kernel variant: auto|scalar|avx2");

  c.define("sim.room_width", T::kDouble, 4.0, "swept area width, m (x)");
  c.define("sim.room_height", T::kDouble, 2.0, "swept area height, m (y)");
  c.define("sim.spacing", T::kDouble, 0.5, "row spacing, m");
  c.define("sim.speed", T::kDouble, 0.5, "cruise speed, m/s");
  c.define("sim.accel", T::kDouble, 0.5, "start/stop acceleration, m/s^2");
  c.define("sim.turn_rate", T::kDouble, kPi / 2, "in-place turn rate, rad/s");
  c.define("sim.turn_accel", T::kDouble, kPi, "in-place turn acceleration, rad/s^2");
  c.define("sim.dwell", T::kDouble, 1.0, "stationary time at start and end, s");
  c.define("sim.sample_rate", T::kDouble, 50.0, "IMU and pose rate, Hz");
  c.define("sim.acc_noise", T::kDouble, 0.05, "accelerometer noise sigma, m/s^2");
  c.define("sim.gyro_noise", T::kDouble, 0.002, "gyroscope noise sigma, rad/s");
  for (const char* ax : {"x", "y", "z"}) {
    c.define(fmt::format("sim.acc_bias_{}", ax), T::kDouble, 0.0, "accelerometer bias, m/s^2");
    c.define(fmt::format("sim.gyro_bias_{}", ax), T::kDouble, 0.0, "gyroscope bias, rad/s");
  }
  c.define("sim.turn", T::kString, "arc", "arc|stop_and_turn");

  c.define("scene.items", T::kInt, -1, "number of named items (-1: every endcap position)");
  c.define("scene.wall_margin", T::kDouble, 1.5, "wall distance outside the swept area, m");
  c.define("scene.item_radius", T::kDouble, 0.25, "item cylinder radius, m");
  c.define("scene.item_height", T::kDouble, 1.2, "item cylinder height, m");
  c.define("scene.endcap_gap", T::kDouble, 0.8, "item centre beyond the row end, m");
  c.define("scene.camera_width", T::kInt, 64, "raster width, px");
  c.define("scene.camera_height", T::kInt, 48, "raster height, px");
  c.define("scene.focal", T::kDouble, 48.0, "focal length, px");
  c.define("scene.cx", T::kDouble, 32.0, "principal point x, px");
  c.define("scene.cy", T::kDouble, 24.0, "principal point y, px");
  c.define("scene.caption_half_angle", T::kDouble, 0.0, "caption bearing limit, rad (0: central region)");
  c.define("scene.caption_min_range", T::kDouble, 0.3, "m");
  c.define("scene.caption_max_range", T::kDouble, 3.0, "m");
  c.define("scene.capture_distance", T::kDouble, 0.5, "image spacing along the ground truth, m");
  c.define("scene.capture_rotation", T::kDouble, kPi / 2, "image spacing in yaw, rad");
  c.define("mount.height", T::kDouble, 0.3, "camera height above the floor, m");
  c.define("mount.forward", T::kDouble, 0.1, "camera offset ahead of the robot origin, m");

  c.define("estimator", T::kString, "oracle", "oracle|network");
  c.define("weights", T::kString, "", "network weights JSON (estimator=network)");
  c.define("oracle.bias_x", T::kDouble, 0.0, "oracle input-frame bias, m/s");
  c.define("oracle.bias_y", T::kDouble, 0.0, "oracle input-frame bias, m/s");
  c.define("oracle.noise", T::kDouble, 0.0, "oracle velocity noise sigma, m/s");
  c.define("oracle.imu_heading", T::kBool, true, "let the estimated heading error rotate oracle outputs");
  c.define("imu.alpha", T::kDouble, 0.02, "complementary filter gravity blend");
  c.define("imu.rate", T::kDouble, 50.0, "processing rate, Hz");
  c.define("imu.tau", T::kInt, 64, "window length in frames (window has tau+1 samples)");
  c.define("imu.stride", T::kInt, 64, "window stride, frames");
  c.define("imu.orientations", T::kString, "", "optional orientation CSV t,qw,qx,qy,qz");
  c.define("rae.k", T::kInt, 5, "ensemble size");
  c.define("rae.angle_mode", T::kString, "grid", "grid|seeded_random");
  c.define("rae.reducer", T::kString, "median", "median|mean|trimmed_mean");
  c.define("rae.trim", T::kDouble, 0.2, "trimmed-mean fraction per side");
  c.define("rae.v_max", T::kDouble, 2.0, "velocity clamp, m/s");
  c.define("kf.sigma_p", T::kDouble, 0.1, "process noise, m/s^2");
  c.define("kf.sigma_v", T::kDouble, 0.1, "velocity observation noise, m/s");
  c.define("capture.distance", T::kDouble, 1.0, "capture distance threshold, m");
  c.define("capture.rotation", T::kDouble, kPi / 2, "capture yaw threshold, rad");
  c.define("capture.logic", T::kString, "or", "or|and");

  c.define("refine.epochs", T::kInt, 100, "optimiser epochs", {"epochs"});
  c.define("refine.lr", T::kDouble, 0.01, "Adam learning rate", {"lr"});
  c.define("refine.lambda_loop", T::kDouble, 1.0, "loop-closure weight");
  c.define("refine.lambda_rot", T::kDouble, 1.0, "rotation weight");
  c.define("refine.lambda_smooth", T::kDouble, 1.0, "smoothness weight");
  c.define("refine.temperature", T::kDouble, 0.0, "log-sum-exp temperature for the max term (0: hard max)");
  c.define("refine.hidden", T::kInt, 64, "MLP hidden width");
  c.define("refine.rotation_gain", T::kDouble, 0.0, "r = pi*tanh(gain*raw); 0 uses 1/frames");

  c.define("eval.grids", T::kString, "0.5,1.0", "comma-separated capture distances");
  c.define("eval.frames", T::kString, "captures", "captures|all");
  c.define("eval.outliers", T::kBool, true, "remove outliers before alignment");
  c.define("eval.k_mad", T::kDouble, 3.0, "outlier threshold in MADs");

  c.define("map.captioner", T::kString, "mock", "mock|http", {"captioner"});
  c.define("map.captions", T::kString, "", "mock captions JSONL or directory (default: dataset captions)");
  c.define("map.endpoint", T::kString, "", "captioning service URL (captioner=http)");
  c.define("map.token_env", T::kString, "SWEEPNAV_CAPTION_TOKEN", "environment variable holding the bearer token");
  c.define("map.prompt", T::kString, std::string(kCaptionPrompt), "captioning prompt");
  c.define("map.attempts", T::kInt, 3, "attempts per image");
  c.define("map.backoff_ms", T::kInt, 200, "initial retry delay, ms");
  c.define("map.timeout", T::kDouble, 30.0, "request timeout, s");
  c.define("map.concurrency", T::kInt, 4, "parallel caption requests");
  c.define("map.poses", T::kString, "refined", "refined|estimated|gt");
  c.define("map.alignment", T::kString, "metric", "metric|similarity (for map evaluation)");
  c.define("map.epsilon", T::kDouble, 1.5, "single-linkage distance, m");
  c.define("map.min_obs", T::kInt, 1, "minimum observations per cluster");
  c.define("map.region", T::kDouble, 0.2, "central region fraction");
  c.define("map.depth_min", T::kDouble, 0.3, "m");
  c.define("map.depth_max", T::kDouble, 5.0, "m");
  c.define("map.z_min", T::kDouble, 0.0, "m");
  c.define("map.z_max", T::kDouble, 3.0, "m");

  c.define("plot.inputs", T::kString, "", "comma-separated trajectory CSVs (default: dataset trajectories)");
  c.define("plot.output", T::kString, "trajectories.svg", "SVG path, relative to the dataset");
  return c;
}

}  // namespace sweepnav
