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

#include "sweepnav/imu.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {
namespace {

constexpr std::array<const char*, 7> kImuColumns = {"t", "ax", "ay", "az", "gx", "gy", "gz"};

ImuSample sample_from(const std::array<double, 7>& v) {
  return ImuSample{v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
}

Eigen::Quaterniond yaw_rotation(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
}

Eigen::Quaterniond tilt_from_accelerometer(const Eigen::Vector3d& acc) {
  if (acc.norm() < 1e-9) return Eigen::Quaterniond::Identity();
  Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(acc.normalized(), Eigen::Vector3d::UnitZ());
  q = yaw_rotation(-yaw_of(q)) * q;
  return q.normalized();
}

void pull_toward_gravity(Eigen::Quaterniond& q, const Eigen::Vector3d& acc, double alpha) {
  if (alpha <= 0.0 || acc.norm() < 1e-9) return;
  const Eigen::Vector3d up = (q * acc).normalized();
  const Eigen::AngleAxisd err(Eigen::Quaterniond::FromTwoVectors(up, Eigen::Vector3d::UnitZ()));
  if (err.angle() < 1e-15) return;
  q = Eigen::Quaterniond(Eigen::AngleAxisd(alpha * err.angle(), err.axis())) * q;
  q.normalize();
}

}  // namespace

ImuFormat imu_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? ImuFormat::kJsonl : ImuFormat::kCsv;
}

std::vector<ImuSample> parse_imu_csv(std::istream& in, const std::string& source) {
  std::vector<ImuSample> out;
  std::array<std::size_t, 7> order = {0, 1, 2, 3, 4, 5, 6};
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = io::split_csv(trimmed);
    if (first) {
      first = false;
      if (std::find(fields.begin(), fields.end(), "t") != fields.end()) {
        if (fields.size() != kImuColumns.size())
          throw ParseError(source, line_no, "header must have columns t,ax,ay,az,gx,gy,gz");
        for (std::size_t c = 0; c < kImuColumns.size(); ++c) {
          const auto it = std::find(fields.begin(), fields.end(), kImuColumns[c]);
          if (it == fields.end())
            throw ParseError(source, line_no, fmt::format("header lacks column '{}'", kImuColumns[c]));
          order[c] = static_cast<std::size_t>(it - fields.begin());
        }
        continue;
      }
    }
    if (fields.size() != kImuColumns.size())
      throw ParseError(source, line_no,
                       fmt::format("expected 7 fields, found {}", fields.size()));
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = io::parse_double(fields[order[c]], source, line_no);
    out.push_back(sample_from(v));
  }
  return out;
}

std::vector<ImuSample> parse_imu_jsonl(std::istream& in, const std::string& source) {
  std::vector<ImuSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < kImuColumns.size(); ++c) {
      const auto it = j.find(kImuColumns[c]);
      if (it == j.end() || !it->is_number())
        throw ParseError(source, line_no, fmt::format("missing numeric key '{}'", kImuColumns[c]));
      v[c] = it->get<double>();
    }
    out.push_back(sample_from(v));
  }
  return out;
}

void validate_imu(std::span<const ImuSample> samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || s.t < 0.0)
      throw ValidationError(fmt::format("IMU sample {}: timestamp {} must be finite and non-negative", i, s.t));
    if (!s.acc.allFinite() || !s.gyro.allFinite())
      throw ValidationError(fmt::format("IMU sample {}: non-finite channel value", i));
    if (i > 0 && !(s.t > samples[i - 1].t))
      throw ValidationError(fmt::format(
          "IMU sample {}: timestamp {} is not after the previous timestamp {}", i, s.t,
          samples[i - 1].t));
  }
}

std::vector<ImuSample> load_imu(const std::filesystem::path& path, ImuFormat format) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open IMU file " + path.string());
  auto samples = format == ImuFormat::kCsv ? parse_imu_csv(in, path.string())
                                           : parse_imu_jsonl(in, path.string());
  validate_imu(samples);
  return samples;
}

void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples) {
  out << "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : samples) {
    out << fmt::format("{},{},{},{},{},{},{}\n", io::format_double(s.t),
                       io::format_double(s.acc.x()), io::format_double(s.acc.y()),
                       io::format_double(s.acc.z()), io::format_double(s.gyro.x()),
                       io::format_double(s.gyro.y()), io::format_double(s.gyro.z()));
  }
}

bool is_uniform(std::span<const ImuSample> samples, double rate_hz, double tol) {
  const double dt = 1.0 / rate_hz;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (std::abs(samples[i].t - samples[i - 1].t - dt) > tol) return false;
  return true;
}

std::vector<ImuSample> resample_uniform(std::span<const ImuSample> samples, double rate_hz,
                                        double max_gap) {
  if (!(rate_hz > 0.0)) throw ValidationError("resample rate must be positive");
  if (samples.size() < 2 || is_uniform(samples, rate_hz))
    return {samples.begin(), samples.end()};
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].t - samples[i - 1].t > max_gap)
      throw ValidationError(fmt::format("IMU gap of {:.3f} s before sample {} exceeds {} s",
                                        samples[i].t - samples[i - 1].t, i, max_gap));
  const double t0 = samples.front().t;
  const double span = samples.back().t - t0;
  const auto n = static_cast<std::size_t>(std::floor(span * rate_hz + 1e-9)) + 1;
  std::vector<ImuSample> out;
  out.reserve(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) / rate_hz;
    while (j + 2 < samples.size() && samples[j + 1].t <= t) ++j;
    const auto& a = samples[j];
    const auto& b = samples[j + 1];
    const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    out.push_back({t, a.acc + u * (b.acc - a.acc), a.gyro + u * (b.gyro - a.gyro)});
  }
  return out;
}

double yaw_of(const Eigen::Quaterniond& q) {
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                    1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

std::vector<Orientation> estimate_orientation(std::span<const ImuSample> samples, double alpha,
                                              OrientationInit init) {
  if (samples.empty()) throw ValidationError("estimate_orientation: no samples");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ValidationError(fmt::format("orientation blend factor {} outside [0, 1]", alpha));
  std::vector<Orientation> out;
  out.reserve(samples.size());
  Eigen::Quaterniond q = init == OrientationInit::kFromAccelerometer
                             ? tilt_from_accelerometer(samples.front().acc)
                             : Eigen::Quaterniond::Identity();
  pull_toward_gravity(q, samples.front().acc, alpha);
  out.push_back({q});
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double dt = samples[i].t - samples[i - 1].t;
    const Eigen::Vector3d w = 0.5 * (samples[i - 1].gyro + samples[i].gyro);
    const double angle = w.norm() * dt;
    if (angle > 0.0) q = q * Eigen::Quaterniond(Eigen::AngleAxisd(angle, w.normalized()));
    q.normalize();
    pull_toward_gravity(q, samples[i].acc, alpha);
    out.push_back({q});
  }
  return out;
}

std::vector<TimedOrientation> load_orientations(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string source = path.string();
  std::vector<TimedOrientation> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto trimmed = io::trim(lines[i]);
    if (trimmed.empty()) continue;
    const auto f = io::split_csv(trimmed);
    if (f[0] == "t") continue;
    if (f.size() != 5) throw ParseError(source, i + 1, "expected t,qw,qx,qy,qz");
    TimedOrientation o;
    o.t = io::parse_double(f[0], source, i + 1);
    o.q = Eigen::Quaterniond(io::parse_double(f[1], source, i + 1), io::parse_double(f[2], source, i + 1),
                             io::parse_double(f[3], source, i + 1), io::parse_double(f[4], source, i + 1));
    if (!(o.q.norm() > 1e-6)) throw ParseError(source, i + 1, "zero quaternion");
    o.q.normalize();
    if (!out.empty() && !(o.t > out.back().t))
      throw ParseError(source, i + 1, "orientation timestamps must increase");
    out.push_back(o);
  }
  return out;
}

std::vector<Orientation> match_orientations(std::span<const ImuSample> samples,
                                            std::span<const TimedOrientation> timed) {
  if (timed.empty()) throw ValidationError("orientation file is empty");
  constexpr double kTol = 1e-6;
  std::vector<Orientation> out;
  out.reserve(samples.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = samples[i].t;
    if (t < timed.front().t - kTol || t > timed.back().t + kTol)
      throw ValidationError(fmt::format("no orientation covers IMU sample {} (t={})", i, t));
    while (j + 1 < timed.size() && timed[j + 1].t <= t) ++j;
    if (j + 1 >= timed.size() || std::abs(timed[j].t - t) <= kTol) {
      out.push_back({timed[j].q});
      continue;
    }
    const double u = (t - timed[j].t) / (timed[j + 1].t - timed[j].t);
    out.push_back({timed[j].q.slerp(std::clamp(u, 0.0, 1.0), timed[j + 1].q).normalized()});
  }
  return out;
}

std::vector<HacfSample> to_hacf(std::span<const ImuSample> samples,
                                std::span<const Orientation> orientations) {
  if (samples.size() != orientations.size())
    throw ValidationError(fmt::format("to_hacf: {} samples but {} orientations", samples.size(),
                                      orientations.size()));
  std::vector<HacfSample> out;
  if (samples.empty()) return out;
  out.reserve(samples.size());
  const Eigen::Quaterniond anchor = yaw_rotation(-yaw_of(orientations.front().q));
  const Eigen::Vector3d gravity(0.0, 0.0, kGravity);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::Matrix3d r = (anchor * orientations[i].q).toRotationMatrix();
    out.push_back({samples[i].t, r * samples[i].acc - gravity, r * samples[i].gyro});
  }
  return out;
}

std::vector<double> hacf_yaws(std::span<const Orientation> orientations) {
  std::vector<double> out;
  if (orientations.empty()) return out;
  const double yaw0 = yaw_of(orientations.front().q);
  out.reserve(orientations.size());
  for (const auto& o : orientations) out.push_back(wrap_angle(yaw_of(o.q) - yaw0));
  return out;
}

ImuWindow::ImuWindow(std::size_t start_frame, std::size_t length)
    : start_frame_(start_frame), length_(length), data_(kChannels * length, 0.0) {}

Eigen::Vector3d ImuWindow::acc(std::size_t i) const {
  return {data_[i], data_[length_ + i], data_[2 * length_ + i]};
}

Eigen::Vector3d ImuWindow::gyro(std::size_t i) const {
  return {data_[3 * length_ + i], data_[4 * length_ + i], data_[5 * length_ + i]};
}

void ImuWindow::set(std::size_t i, const Eigen::Vector3d& a, const Eigen::Vector3d& g) {
  for (std::size_t c = 0; c < 3; ++c) {
    data_[c * length_ + i] = a[static_cast<Eigen::Index>(c)];
    data_[(c + 3) * length_ + i] = g[static_cast<Eigen::Index>(c)];
  }
}

std::vector<ImuWindow> make_windows(std::span<const HacfSample> hacf, int tau, int stride) {
  if (tau < 1) throw ValidationError(fmt::format("window length tau={} must be >= 1", tau));
  if (stride < 1) throw ValidationError(fmt::format("window stride {} must be >= 1", stride));
  std::vector<ImuWindow> out;
  const auto len = static_cast<std::size_t>(tau) + 1;
  for (std::size_t s = 0; s + len <= hacf.size(); s += static_cast<std::size_t>(stride)) {
    ImuWindow w(s, len);
    for (std::size_t i = 0; i < len; ++i) w.set(i, hacf[s + i].a, hacf[s + i].g);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace sweepnav
