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

#include "sweepnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sweepnav/common.hpp"
#include "sweepnav/estimator.hpp"
#include "sweepnav/trajectory.hpp"

namespace sweepnav {

TurnModel parse_turn_model(const std::string& s) {
  if (s == "arc") return TurnModel::kArc;
  if (s == "stop_and_turn") return TurnModel::kStopAndTurn;
  throw ValidationError("sim.turn must be 'arc' or 'stop_and_turn', got '" + s + "'");
}

std::string to_string(TurnModel m) { return m == TurnModel::kArc ? "arc" : "stop_and_turn"; }

void validate(const SimConfig& c) {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(fmt::format("{} must be > 0, got {}", key, v));
  };
  positive(c.room_width, "sim.room_width");
  positive(c.room_height, "sim.room_height");
  positive(c.spacing, "sim.spacing");
  positive(c.speed, "sim.speed");
  positive(c.accel, "sim.accel");
  positive(c.turn_rate, "sim.turn_rate");
  positive(c.turn_accel, "sim.turn_accel");
  positive(c.sample_rate, "sim.sample_rate");
  if (!(c.dwell >= 0.0)) throw ValidationError("sim.dwell must be >= 0");
  if (!(c.acc_noise >= 0.0)) throw ValidationError("sim.acc_noise must be >= 0");
  if (!(c.gyro_noise >= 0.0)) throw ValidationError("sim.gyro_noise must be >= 0");
  if (c.spacing > c.room_height + 1e-9)
    throw ValidationError(fmt::format("sim.spacing ({}) must not exceed sim.room_height ({})", c.spacing, c.room_height));
  if (c.turn == TurnModel::kArc && c.spacing > c.room_width + 1e-9)
    throw ValidationError(
        fmt::format("sim.spacing ({}) must not exceed sim.room_width ({}) for arc turns", c.spacing, c.room_width));
  if (!c.acc_bias.allFinite() || !c.gyro_bias.allFinite()) throw ValidationError("sim biases must be finite");
}

namespace {

struct Piece {
  bool arc = false;
  Eigen::Vector2d p0, p1;  // line ends
  Eigen::Vector2d c;       // arc centre
  double r = 0.0, a0 = 0.0, sweep = 0.0;
  double len = 0.0;
};

struct Sample {
  Eigen::Vector2d p;
  double yaw;
};

Sample piece_at(const Piece& pc, double s) {
  if (!pc.arc) {
    const Eigen::Vector2d d = pc.p1 - pc.p0;
    const double yaw = std::atan2(d.y(), d.x());
    if (s >= pc.len) return {pc.p1, yaw};
    return {pc.p0 + d * (s / pc.len), yaw};
  }
  const double a = pc.a0 + pc.sweep * std::min(1.0, s / pc.len);
  const Eigen::Vector2d p = pc.c + pc.r * Eigen::Vector2d(std::cos(a), std::sin(a));
  return {p, wrap_angle(a + (pc.sweep > 0 ? kPi / 2 : -kPi / 2))};
}

// Trapezoidal (or triangular) profile covering `dist` with peak `vmax`.
struct Profile {
  double dist = 0.0, vmax = 0.0, acc = 0.0;
  double t_acc = 0.0, t_cruise = 0.0, v_peak = 0.0;

  Profile() = default;
  Profile(double d, double v, double a) : dist(d), vmax(v), acc(a) {
    if (d * a < v * v) {
      v_peak = std::sqrt(d * a);
      t_acc = v_peak / a;
      t_cruise = 0.0;
    } else {
      v_peak = v;
      t_acc = v / a;
      t_cruise = (d - v * v / a) / v;
    }
  }
  double duration() const { return 2.0 * t_acc + t_cruise; }
  double at(double t) const {
    if (t <= 0.0) return 0.0;
    if (t < t_acc) return 0.5 * acc * t * t;
    const double d_acc = 0.5 * acc * t_acc * t_acc;
    if (t < t_acc + t_cruise) return d_acc + v_peak * (t - t_acc);
    const double td = t - t_acc - t_cruise;
    if (td >= t_acc) return dist;
    return std::min(dist, d_acc + v_peak * t_cruise + v_peak * td - 0.5 * acc * td * td);
  }
};

struct Event {
  enum Kind { kDwell, kLeg, kSpin } kind = kDwell;
  double duration = 0.0;
  Sample hold;                 // dwell
  std::vector<Piece> pieces;   // leg
  std::vector<double> starts;  // leg: cumulative piece starts
  double yaw0 = 0.0, dyaw = 0.0;
  Eigen::Vector2d at = Eigen::Vector2d::Zero();  // spin position
  Profile profile;
};

std::vector<Eigen::Vector2d> sweep_vertices(const SimConfig& c) {
  const std::size_t rows = sweep_rows(c);
  std::vector<Eigen::Vector2d> v{{0.0, 0.0}};
  for (std::size_t i = 0; i < rows; ++i) {
    const double y = static_cast<double>(i) * c.spacing;
    const double x = i % 2 == 0 ? c.room_width : 0.0;
    v.emplace_back(x, y);
    if (i + 1 < rows) v.emplace_back(x, static_cast<double>(i + 1) * c.spacing);
  }
  const Eigen::Vector2d last = v.back();
  if (last.x() != 0.0 && last.y() > 0.0) v.emplace_back(last.x(), 0.0);
  v.emplace_back(0.0, 0.0);
  std::vector<Eigen::Vector2d> out;
  for (const auto& p : v)
    if (out.empty() || (p - out.back()).norm() > 1e-12) out.push_back(p);
  return out;
}

Piece line(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  Piece p;
  p.p0 = a;
  p.p1 = b;
  p.len = (b - a).norm();
  return p;
}

Event make_leg(std::vector<Piece> pieces, const SimConfig& c) {
  Event e;
  e.kind = Event::kLeg;
  double acc = 0.0;
  for (const auto& p : pieces) {
    e.starts.push_back(acc);
    acc += p.len;
  }
  e.pieces = std::move(pieces);
  e.profile = Profile(acc, c.speed, c.accel);
  e.duration = e.profile.duration();
  return e;
}

Sample leg_at(const Event& e, double t) {
  const double s = e.profile.at(t);
  std::size_t i = static_cast<std::size_t>(std::upper_bound(e.starts.begin(), e.starts.end(), s) - e.starts.begin());
  i = i == 0 ? 0 : i - 1;
  return piece_at(e.pieces[i], s - e.starts[i]);
}

std::vector<Event> build_events(const SimConfig& c) {
  const auto v = sweep_vertices(c);
  const double r = c.spacing / 2.0;
  std::vector<Event> events;
  std::vector<Piece> pieces;
  Eigen::Vector2d cur = v[0];
  auto spin = [&](const Eigen::Vector2d& at, double yaw0, double dyaw) {
    Event e;
    e.kind = Event::kSpin;
    e.at = at;
    e.yaw0 = yaw0;
    e.dyaw = dyaw;
    e.profile = Profile(std::abs(dyaw), c.turn_rate, c.turn_accel);
    e.duration = e.profile.duration();
    events.push_back(std::move(e));
  };
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const Eigen::Vector2d din = (v[i] - v[i - 1]).normalized();
    const Eigen::Vector2d dout = (v[i + 1] - v[i]).normalized();
    const double turn = std::atan2(din.x() * dout.y() - din.y() * dout.x(), din.dot(dout));
    const bool reversal = std::abs(std::abs(turn) - kPi) < 1e-9;
    if (c.turn == TurnModel::kStopAndTurn || reversal) {
      pieces.push_back(line(cur, v[i]));
      events.push_back(make_leg(std::move(pieces), c));
      pieces.clear();
      const double yaw0 = std::atan2(din.y(), din.x());
      spin(v[i], yaw0, reversal ? kPi : turn);
      cur = v[i];
      continue;
    }
    const double tl = r * std::tan(std::abs(turn) / 2.0);
    const Eigen::Vector2d t1 = v[i] - tl * din;
    const Eigen::Vector2d t2 = v[i] + tl * dout;
    if ((t1 - cur).norm() > 1e-12) pieces.push_back(line(cur, t1));
    Piece a;
    a.arc = true;
    const Eigen::Vector2d n = turn > 0 ? Eigen::Vector2d(-din.y(), din.x()) : Eigen::Vector2d(din.y(), -din.x());
    a.c = t1 + r * n;
    a.r = r;
    a.a0 = std::atan2(t1.y() - a.c.y(), t1.x() - a.c.x());
    a.sweep = turn;
    a.len = r * std::abs(turn);
    pieces.push_back(a);
    cur = t2;
  }
  pieces.push_back(line(cur, v.back()));
  events.push_back(make_leg(std::move(pieces), c));
  return events;
}

}  // namespace

std::size_t sweep_rows(const SimConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.room_height / cfg.spacing + 1e-9)) + 1;
}

double sweep_length(const SimConfig& cfg) {
  validate(cfg);
  double total = 0.0;
  for (const auto& e : build_events(cfg))
    if (e.kind == Event::kLeg) total += e.profile.dist;
  return total;
}

Trajectory generate_trajectory(const SimConfig& cfg) {
  validate(cfg);
  auto events = build_events(cfg);
  const double dt = 1.0 / cfg.sample_rate;
  std::vector<double> starts;
  double t = cfg.dwell;
  for (const auto& e : events) {
    starts.push_back(t);
    t += e.duration;
  }
  const double motion_end = t;
  const double total = motion_end + cfg.dwell;
  const auto frames = static_cast<std::size_t>(std::ceil(total * cfg.sample_rate - 1e-9)) + 1;

  const Sample first = leg_at(events.front(), 0.0);
  // The first event is always a leg, so heading at rest equals its direction.
  const Sample start{Eigen::Vector2d::Zero(), first.yaw};
  Sample end_pose;
  {
    const Event& last = events.back();
    end_pose = leg_at(last, last.duration + 1.0);
    end_pose.p = Eigen::Vector2d::Zero();
  }

  Trajectory traj;
  traj.frame_rate = cfg.sample_rate;
  traj.poses.reserve(frames);
  std::size_t ei = 0;
  for (std::size_t k = 0; k < frames; ++k) {
    const double tk = static_cast<double>(k) * dt;
    Sample s;
    if (tk < cfg.dwell) {
      s = start;
    } else if (tk >= motion_end) {
      s = end_pose;
    } else {
      while (ei + 1 < events.size() && tk >= starts[ei + 1]) ++ei;
      const Event& e = events[ei];
      const double local = tk - starts[ei];
      if (e.kind == Event::kLeg) {
        s = leg_at(e, local);
      } else {
        const double th = e.profile.at(local);
        s = {e.at, wrap_angle(e.yaw0 + (e.dyaw >= 0 ? th : -th))};
      }
    }
    traj.poses.push_back({tk, s.p.x(), s.p.y(), wrap_angle(s.yaw)});
  }
  return traj;
}

std::vector<ImuSample> synthesize_imu(const Trajectory& traj, const SimConfig& cfg) {
  const std::size_t n = traj.size();
  if (n < 3) throw ValidationError(fmt::format("IMU synthesis needs at least 3 frames, got {}", n));
  const double rate = traj.frame_rate;
  std::vector<Eigen::Vector2d> acc(n);
  std::vector<double> omega(n);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    acc[k] = (traj[k + 1].position() - 2.0 * traj[k].position() + traj[k - 1].position()) * rate * rate;
    omega[k] = wrap_angle(traj[k + 1].yaw - traj[k - 1].yaw) * rate / 2.0;
  }
  acc[0] = acc[1];
  acc[n - 1] = acc[n - 2];
  omega[0] = wrap_angle(traj[1].yaw - traj[0].yaw) * rate;
  omega[n - 1] = wrap_angle(traj[n - 1].yaw - traj[n - 2].yaw) * rate;

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x696d75ULL));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<ImuSample> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector2d a_dev = rotate2(acc[k], -traj[k].yaw);
    Eigen::Vector3d a(a_dev.x(), a_dev.y(), kGravity);
    Eigen::Vector3d g(0.0, 0.0, omega[k]);
    a += cfg.acc_bias;
    g += cfg.gyro_bias;
    for (int i = 0; i < 3; ++i) a[i] += cfg.acc_noise * unit(rng);
    for (int i = 0; i < 3; ++i) g[i] += cfg.gyro_noise * unit(rng);
    out[k] = {traj[k].t, a, g};
  }
  return out;
}

// ---------------------------------------------------------------------------

void validate(const SceneConfig& c) {
  const CameraModel& cam = c.camera;
  if (cam.width == 0 || cam.height == 0) throw ValidationError("scene.camera_width/height must be > 0");
  if (!(cam.focal > 0.0)) throw ValidationError("scene.focal must be > 0");
  if (!(c.wall_margin > 0.0)) throw ValidationError("scene.wall_margin must be > 0");
  if (!(c.item_radius > 0.0)) throw ValidationError("scene.item_radius must be > 0");
  if (!(c.item_height > 0.0)) throw ValidationError("scene.item_height must be > 0");
  if (!(c.endcap_gap > c.item_radius) || c.endcap_gap + c.item_radius >= c.wall_margin)
    throw ValidationError("scene.endcap_gap must keep items clear of both the path end and the walls");
  if (!(c.caption_max_range > c.caption_min_range)) throw ValidationError("scene caption range is empty");
  if (!(c.region_fraction > 0.0 && c.region_fraction <= 1.0))
    throw ValidationError("scene.region_fraction must be in (0, 1]");
  if (!(c.capture_distance > 0.0) || !(c.capture_rotation > 0.0))
    throw ValidationError("scene capture thresholds must be > 0");
}

double caption_half_angle(const SceneConfig& cfg) {
  if (cfg.caption_half_angle > 0.0) return cfg.caption_half_angle;
  return std::atan(cfg.region_fraction / 2.0 * cfg.camera.width / cfg.camera.focal);
}

double raster_quantization_bound(const SceneConfig& cfg) {
  return cfg.caption_max_range * std::tan(caption_half_angle(cfg)) + cfg.item_radius;
}

RoomBounds room_bounds(const SimConfig& sim, const SceneConfig& scene) {
  return {-scene.wall_margin, -scene.wall_margin, sim.room_width + scene.wall_margin,
          sim.room_height + scene.wall_margin};
}

namespace {

constexpr const char* kItemNames[] = {
    "Oat Milk",     "Green Tea",       "Café Crème",    "Rye Bread",      "Olive Oil", "Sparkling Water",
    "Dark Chocolate", "Basmati Rice",  "Peanut Butter", "Tomato Ketchup", "Corn Flakes", "Honey Jar",
    "Apple Juice",  "Sea Salt",        "Maple Syrup",   "Jasmine Rice",   "Soy Sauce", "Black Pepper",
    "Coconut Water", "Granola Bars"};

}  // namespace

std::vector<SceneItem> default_items(const SimConfig& sim, const SceneConfig& scene, std::size_t count) {
  validate(sim);
  validate(scene);
  std::vector<Eigen::Vector2d> spots;
  const std::size_t rows = sweep_rows(sim);
  const double g = scene.endcap_gap;
  for (std::size_t i = 0; i < rows; ++i) {
    const double y = static_cast<double>(i) * sim.spacing;
    spots.emplace_back(i % 2 == 0 ? sim.room_width + g : -g, y);
  }
  if (rows % 2 == 1 && rows > 1) {
    spots.emplace_back(sim.room_width, -g);
    spots.emplace_back(-g, 0.0);
  } else if (rows % 2 == 0) {
    spots.emplace_back(0.0, -g);
  }
  constexpr std::size_t kNames = sizeof(kItemNames) / sizeof(kItemNames[0]);
  if (count > spots.size() || count > kNames)
    throw ValidationError(fmt::format("scene.items={} but the room offers only {} endcap positions", count,
                                      std::min(spots.size(), kNames)));
  std::vector<SceneItem> items;
  for (std::size_t i = 0; i < count; ++i)
    items.push_back({kItemNames[i], spots[i], scene.item_radius, scene.item_height});
  return items;
}

namespace {

// First positive hit of the planar ray o + t*d (|d| arbitrary) with a disc.
double disc_hit(const Eigen::Vector2d& o, const Eigen::Vector2d& d, const Eigen::Vector2d& c, double r) {
  const Eigen::Vector2d oc = o - c;
  const double a = d.squaredNorm();
  const double b = 2.0 * d.dot(oc);
  const double cc = oc.squaredNorm() - r * r;
  if (cc <= 0.0 || a == 0.0) return -1.0;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return -1.0;
  return (-b - std::sqrt(disc)) / (2.0 * a);
}

Eigen::Vector2d camera_origin(const Pose2& pose, const CameraModel& cam) {
  return pose.position() + rotate2({cam.mount.forward_offset, 0.0}, pose.yaw);
}

}  // namespace

DepthRaster render_depth(const Pose2& pose, const std::vector<SceneItem>& items, const RoomBounds& room,
                         const CameraModel& cam) {
  DepthRaster r;
  r.width = cam.width;
  r.height = cam.height;
  r.focal = static_cast<float>(cam.focal);
  r.cx = static_cast<float>(cam.cx);
  r.cy = static_cast<float>(cam.cy);
  r.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  const Eigen::Vector2d o = camera_origin(pose, cam);
  const double oz = cam.mount.height;
  for (std::uint32_t v = 0; v < cam.height; ++v) {
    for (std::uint32_t u = 0; u < cam.width; ++u) {
      const double xc = (u - cam.cx) / cam.focal;
      const double yc = (v - cam.cy) / cam.focal;
      // Camera (X right, Y down, Z forward) to robot (forward, left, up).
      const Eigen::Vector2d d = rotate2({1.0, -xc}, pose.yaw);
      const double dz = -yc;
      double best = std::numeric_limits<double>::infinity();
      if (dz < 0.0) best = std::min(best, -oz / dz);
      if (d.x() > 0.0) best = std::min(best, (room.x1 - o.x()) / d.x());
      if (d.x() < 0.0) best = std::min(best, (room.x0 - o.x()) / d.x());
      if (d.y() > 0.0) best = std::min(best, (room.y1 - o.y()) / d.y());
      if (d.y() < 0.0) best = std::min(best, (room.y0 - o.y()) / d.y());
      for (const auto& it : items) {
        const double t = disc_hit(o, d, it.center, it.radius);
        if (t <= 0.0 || t >= best) continue;
        const double z = oz + t * dz;
        if (z >= 0.0 && z <= it.height) best = t;
      }
      if (std::isfinite(best) && best > 0.0) r.depth[static_cast<std::size_t>(v) * cam.width + u] = static_cast<float>(best);
    }
  }
  return r;
}

bool item_captioned(const Pose2& pose, const SceneItem& item, const std::vector<SceneItem>& items,
                    const SceneConfig& cfg) {
  const Eigen::Vector2d o = camera_origin(pose, cfg.camera);
  const Eigen::Vector2d rel = item.center - o;
  const double range = rel.norm();
  if (range < cfg.caption_min_range || range > cfg.caption_max_range) return false;
  const Eigen::Vector2d fwd(std::cos(pose.yaw), std::sin(pose.yaw));
  const double bearing = std::atan2(fwd.x() * rel.y() - fwd.y() * rel.x(), fwd.dot(rel));
  if (!(std::abs(bearing) < caption_half_angle(cfg))) return false;
  const Eigen::Vector2d dir = rel / range;
  const double own = range - item.radius;
  for (const auto& other : items) {
    if (&other == &item || other.name == item.name) continue;
    const double t = disc_hit(o, dir, other.center, other.radius);
    if (t > 0.0 && t < own) return false;
  }
  return true;
}

std::string image_id_for_frame(std::size_t frame) { return fmt::format("img_{:06d}", frame); }

Scene generate_scene(const SimConfig& sim, const Trajectory& gt, const std::vector<SceneItem>& items,
                     const SceneConfig& cfg) {
  validate(cfg);
  const RoomBounds room = room_bounds(sim, cfg);
  for (const auto& it : items) {
    if (it.center.x() - it.radius < room.x0 || it.center.x() + it.radius > room.x1 ||
        it.center.y() - it.radius < room.y0 || it.center.y() + it.radius > room.y1)
      throw ValidationError(fmt::format("scene item '{}' lies outside the room", it.name));
  }
  Scene scene;
  for (const auto& ev : capture_schedule(gt, cfg.capture_distance, cfg.capture_rotation)) {
    SceneCapture cap;
    cap.image.image_id = image_id_for_frame(ev.frame);
    cap.image.frame = ev.frame;
    cap.image.image_ref = "rasters/" + cap.image.image_id + ".dras";
    cap.raster = render_depth(ev.pose, items, room, cfg.camera);
    cap.caption.image_id = cap.image.image_id;
    cap.caption.frame = ev.frame;
    for (const auto& it : items)
      if (item_captioned(ev.pose, it, items, cfg)) cap.caption.items.push_back(it.name);
    scene.captures.push_back(std::move(cap));
  }
  for (const auto& it : items) scene.truth.push_back({it.name, {it.center.x(), it.center.y(), it.height / 2.0}});
  return scene;
}

}  // namespace sweepnav
