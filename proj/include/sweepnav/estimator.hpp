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

#ifndef SWEEPNAV_ESTIMATOR_HPP_
#define SWEEPNAV_ESTIMATOR_HPP_

// Window-to-velocity regressors. A VelocityModel maps one HACF window of
// tau+1 frames to a planar velocity in the window's own input frame.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "sweepnav/imu.hpp"
#include "sweepnav/pose.hpp"

namespace sweepnav {

struct VelocityEstimate {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();  // m/s
  std::size_t window_start = 0;
  bool clamped = false;
};

// Implementations are immutable after construction; predict() may be called
// concurrently.
class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  virtual int tau() const = 0;
  virtual std::string name() const = 0;
  // Raw, unclamped output.
  virtual Eigen::Vector2d predict(const ImuWindow& window) const = 0;
};

inline constexpr double kDefaultVMax = 2.0;

// Runs the model, rejects non-finite output and clamps |v| to v_max.
VelocityEstimate estimate_velocity(const ImuWindow& window, const VelocityModel& model,
                                   double v_max = kDefaultVMax);

// ---------------------------------------------------------------------------
// Dense network weights.

enum class LayerKind { kDense, kRelu };
enum class InputLayout { kChannelsMajor, kTimeMajor };

std::string to_string(LayerKind kind);
std::string to_string(InputLayout layout);

struct Layer {
  LayerKind kind = LayerKind::kDense;
  std::size_t rows = 0;  // input width
  std::size_t cols = 0;  // output width
  std::vector<float> weights;  // rows x cols, row-major
  std::vector<float> bias;     // cols, or empty for no bias
};

struct WeightsMeta {
  int tau = 64;
  double sample_rate_hz = 50.0;
  bool gravity_subtracted = true;
  InputLayout input_layout = InputLayout::kChannelsMajor;
};

struct WeightsBundle {
  WeightsMeta meta;
  std::vector<Layer> layers;
};

// What the preprocessing pipeline produces; a bundle must agree with it.
struct PipelineExpectation {
  int tau = 64;
  double sample_rate_hz = 50.0;
  bool gravity_subtracted = true;
};

inline std::size_t input_width(int tau) { return 6 * (static_cast<std::size_t>(tau) + 1); }

// Shape chain 6*(tau+1) -> ... -> 2 and parameter counts. The error names the
// first inconsistent layer.
void validate_shapes(const WeightsBundle& bundle);
void check_against(const WeightsMeta& meta, const PipelineExpectation& expect);

WeightsBundle weights_from_json(const nlohmann::json& j);
nlohmann::json weights_to_json(const WeightsBundle& bundle);
WeightsBundle load_weights(const std::filesystem::path& path, const PipelineExpectation& expect);
void save_weights(const std::filesystem::path& path, const WeightsBundle& bundle);

// Dense/ReLU stack with He-uniform weights scaled by `scale` and zero bias.
// hidden lists the widths between the input and the 2-wide output.
WeightsBundle random_mlp_bundle(int tau, const std::vector<std::size_t>& hidden,
                                std::uint64_t seed, double scale = 1.0);

class MlpVelocityModel final : public VelocityModel {
 public:
  explicit MlpVelocityModel(WeightsBundle bundle);
  int tau() const override { return bundle_.meta.tau; }
  std::string name() const override { return "network"; }
  Eigen::Vector2d predict(const ImuWindow& window) const override;
  const WeightsBundle& bundle() const { return bundle_; }

 private:
  WeightsBundle bundle_;
  std::size_t max_width_ = 0;
};

// ---------------------------------------------------------------------------
// Analytic oracle for simulator runs.

struct OracleConfig {
  std::shared_ptr<const Trajectory> ground_truth;
  Eigen::Vector2d bias_hacf = Eigen::Vector2d::Zero();  // m/s, input frame
  double noise_sigma = 0.0;                             // m/s
  // Optional per-frame heading error of the estimated anchored frame
  // relative to the ground truth's anchored frame. Empty means zero.
  std::vector<double> frame_yaw_error;
};

// True displacement over the window divided by its duration, expressed in
// the window's input frame (so rotating the inputs by theta rotates the
// output by theta), plus bias_hacf, plus N(0, noise_sigma^2) noise seeded by
// (rng_seed, window_start).
VelocityEstimate oracle_velocity(const ImuWindow& window, const OracleConfig& cfg,
                                 std::uint64_t rng_seed);

class OracleVelocityModel final : public VelocityModel {
 public:
  OracleVelocityModel(OracleConfig cfg, int tau, std::uint64_t seed);
  int tau() const override { return tau_; }
  std::string name() const override { return "oracle"; }
  Eigen::Vector2d predict(const ImuWindow& window) const override;
  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
  int tau_;
  std::uint64_t seed_;
};

// splitmix64 finaliser; used to derive per-call seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace sweepnav

#endif  // SWEEPNAV_ESTIMATOR_HPP_
