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

#ifndef SWEEPNAV_IMU_HPP_
#define SWEEPNAV_IMU_HPP_

// IMU data model, orientation estimation and the gravity-aligned,
// heading-anchored frame (HACF) the velocity estimators consume.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sweepnav {

struct ImuSample {
  double t = 0.0;  // seconds since recording start
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();   // m/s^2, device frame
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();  // rad/s, device frame
};

enum class ImuFormat { kCsv, kJsonl };

// Picks the format from the extension (.jsonl/.json -> JSONL, else CSV).
ImuFormat imu_format_for(const std::filesystem::path& path);

// Throws ParseError with the line number, or ValidationError naming the
// offending sample index when timestamps are not strictly increasing.
std::vector<ImuSample> load_imu(const std::filesystem::path& path, ImuFormat format);
std::vector<ImuSample> parse_imu_csv(std::istream& in, const std::string& source);
std::vector<ImuSample> parse_imu_jsonl(std::istream& in, const std::string& source);
void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples);

void validate_imu(std::span<const ImuSample> samples);

// True when consecutive timestamps are 1/rate_hz apart within tol seconds.
bool is_uniform(std::span<const ImuSample> samples, double rate_hz, double tol = 1e-6);

// Linear resampling onto t0 + k/rate_hz. Uniform input is returned
// unchanged. Throws ValidationError for gaps longer than max_gap seconds.
std::vector<ImuSample> resample_uniform(std::span<const ImuSample> samples, double rate_hz,
                                        double max_gap = 0.5);

// Device-to-world rotation, kept at unit norm.
struct Orientation {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
};

enum class OrientationInit {
  kFromAccelerometer,  // tilt from the first sample, zero yaw
  kIdentity,
};

// Complementary filter: gyro integration, then each step rotates the estimate
// toward the accelerometer's gravity direction by the fraction alpha.
std::vector<Orientation> estimate_orientation(
    std::span<const ImuSample> samples, double alpha = 0.02,
    OrientationInit init = OrientationInit::kFromAccelerometer);

// Precomputed orientations, CSV `t,qw,qx,qy,qz`. Matched to IMU samples by
// timestamp with slerp between neighbours.
struct TimedOrientation {
  double t = 0.0;
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
};
std::vector<TimedOrientation> load_orientations(const std::filesystem::path& path);
std::vector<Orientation> match_orientations(std::span<const ImuSample> samples,
                                            std::span<const TimedOrientation> timed);

// ZYX yaw of a device-to-world rotation.
double yaw_of(const Eigen::Quaterniond& q);

struct HacfSample {
  double t = 0.0;
  Eigen::Vector3d a = Eigen::Vector3d::Zero();  // gravity removed
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
};

// a = Rz(-yaw0) R(q) acc - (0, 0, 9.81), g = Rz(-yaw0) R(q) gyro, with yaw0
// the yaw of the first orientation.
std::vector<HacfSample> to_hacf(std::span<const ImuSample> samples,
                                std::span<const Orientation> orientations);

// Per-frame yaw in the anchored frame: wrap(yaw(q_k) - yaw(q_0)).
std::vector<double> hacf_yaws(std::span<const Orientation> orientations);

enum class Channel : std::size_t { kAx = 0, kAy, kAz, kGx, kGy, kGz };

// tau+1 consecutive HACF frames stored channel-major:
// [ax..., ay..., az..., gx..., gy..., gz...].
class ImuWindow {
 public:
  static constexpr std::size_t kChannels = 6;

  ImuWindow(std::size_t start_frame, std::size_t length);

  std::size_t start_frame() const { return start_frame_; }
  std::size_t length() const { return length_; }
  int tau() const { return static_cast<int>(length_) - 1; }

  std::span<double> channel(Channel c) {
    return {data_.data() + static_cast<std::size_t>(c) * length_, length_};
  }
  std::span<const double> channel(Channel c) const {
    return {data_.data() + static_cast<std::size_t>(c) * length_, length_};
  }
  std::span<const double> data() const { return data_; }

  Eigen::Vector3d acc(std::size_t i) const;
  Eigen::Vector3d gyro(std::size_t i) const;
  void set(std::size_t i, const Eigen::Vector3d& a, const Eigen::Vector3d& g);

  // Net z-rotation applied to this window since it was cut from the
  // recording. Maintained by rotate_window; learned models never read it.
  double frame_angle() const { return frame_angle_; }
  void set_frame_angle(double a) { frame_angle_ = a; }

  bool operator==(const ImuWindow&) const = default;

 private:
  std::size_t start_frame_;
  std::size_t length_;
  double frame_angle_ = 0.0;
  std::vector<double> data_;
};

// Windows of tau+1 frames starting at 0, stride, 2*stride, ... while the
// window fits. A recording shorter than tau+1 yields no windows.
std::vector<ImuWindow> make_windows(std::span<const HacfSample> hacf, int tau, int stride);

}  // namespace sweepnav

#endif  // SWEEPNAV_IMU_HPP_
