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

#include "sweepnav/pose.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

void validate_trajectory(const Trajectory& traj, bool check_uniform) {
  if (!(traj.frame_rate > 0.0)) throw ValidationError("trajectory frame rate must be positive");
  const double dt = 1.0 / traj.frame_rate;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& p = traj[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.yaw))
      throw ValidationError(fmt::format("pose {}: non-finite field", i));
    if (p.yaw <= -kPi || p.yaw > kPi + 1e-12)
      throw ValidationError(fmt::format("pose {}: yaw {} not wrapped to (-pi, pi]", i, p.yaw));
    if (i > 0) {
      const double step = p.t - traj[i - 1].t;
      if (!(step > 0.0)) throw ValidationError(fmt::format("pose {}: timestamp not increasing", i));
      if (check_uniform && std::abs(step - dt) > 1e-6)
        throw ValidationError(fmt::format("pose {}: spacing {} s differs from 1/{} Hz", i, step,
                                          traj.frame_rate));
    }
  }
}

Trajectory parse_trajectory_csv(std::istream& in, const std::string& source) {
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    const auto f = io::split_csv(trimmed);
    if (f[0] == "t") {
      if (f.size() != 4 || f[1] != "x" || f[2] != "y" || f[3] != "yaw")
        throw ParseError(source, line_no, "trajectory header must be t,x,y,yaw");
      continue;
    }
    if (f.size() != 4) throw ParseError(source, line_no, "expected t,x,y,yaw");
    traj.poses.push_back({io::parse_double(f[0], source, line_no), io::parse_double(f[1], source, line_no),
                          io::parse_double(f[2], source, line_no),
                          io::parse_double(f[3], source, line_no)});
  }
  if (traj.size() >= 2) {
    const double dt = traj[1].t - traj[0].t;
    if (dt > 0.0) traj.frame_rate = std::round(1.0 / dt * 1e6) / 1e6;
  }
  return traj;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trajectory " + path.string());
  auto traj = parse_trajectory_csv(in, path.string());
  validate_trajectory(traj, true);
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,x,y,yaw\n";
  for (const auto& p : traj.poses)
    out << io::format_double(p.t) << ',' << io::format_double(p.x) << ',' << io::format_double(p.y)
        << ',' << io::format_double(p.yaw) << '\n';
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream ss;
  write_trajectory_csv(ss, traj);
  return ss.str();
}

}  // namespace sweepnav
