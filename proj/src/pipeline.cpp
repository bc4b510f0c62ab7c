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

#include "sweepnav/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sweepnav/captions.hpp"
#include "sweepnav/common.hpp"
#include "sweepnav/estimator.hpp"
#include "sweepnav/io.hpp"
#include "sweepnav/loop_closure.hpp"
#include "sweepnav/metrics.hpp"
#include "sweepnav/object_map.hpp"
#include "sweepnav/rae.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.json";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { io::write_file(path, j.dump(2) + "\n"); }

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (auto f : io::split_csv(text)) {
    f = io::trim(f);
    if (f.empty()) continue;
    try {
      out.push_back(io::parse_double(f, key, 1));
    } catch (const ParseError&) {
      throw ValidationError(fmt::format("{}: '{}' is not a number", key, std::string(f)));
    }
  }
  if (out.empty()) throw ValidationError(key + " must list at least one value");
  return out;
}

std::uint64_t seed_of(const Config& cfg) { return static_cast<std::uint64_t>(cfg.integer("seed")); }

}  // namespace

// ---------------------------------------------------------------------------

Manifest Manifest::load(const fs::path& dir) {
  const fs::path p = dir / kManifestName;
  if (!fs::exists(p))
    throw ValidationError(fmt::format("no dataset manifest at {} (run 'sweepnav simulate' or pass --data)", p.string()));
  Manifest m;
  m.dir_ = dir;
  try {
    m.j_ = nlohmann::ordered_json::parse(io::read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", p.string(), e.what()));
  }
  if (!m.j_.is_object()) throw ValidationError(p.string() + ": manifest must be a JSON object");
  if (!m.j_.contains("files")) m.j_["files"] = nlohmann::ordered_json::object();
  return m;
}

Manifest Manifest::create(const fs::path& dir) {
  Manifest m;
  m.dir_ = dir;
  m.j_ = {{"version", 1}, {"files", nlohmann::ordered_json::object()}};
  return m;
}

std::optional<fs::path> Manifest::file(const std::string& key) const {
  const auto& files = j_.at("files");
  if (!files.contains(key)) return std::nullopt;
  return dir_ / files.at(key).get<std::string>();
}

fs::path Manifest::require(const std::string& key, const std::string& why) const {
  auto p = file(key);
  if (!p) throw ValidationError(fmt::format("manifest has no '{}' entry ({})", key, why));
  if (!fs::exists(*p)) throw ValidationError(fmt::format("manifest entry '{}' points to missing {}", key, p->string()));
  return *p;
}

void Manifest::set_file(const std::string& key, const std::string& relative) { j_["files"][key] = relative; }

void Manifest::save() const { write_json(dir_ / kManifestName, j_); }

// ---------------------------------------------------------------------------

SimConfig sim_config_from(const Config& cfg) {
  SimConfig s;
  s.room_width = cfg.number("sim.room_width");
  s.room_height = cfg.number("sim.room_height");
  s.spacing = cfg.number("sim.spacing");
  s.speed = cfg.number("sim.speed");
  s.accel = cfg.number("sim.accel");
  s.turn_rate = cfg.number("sim.turn_rate");
  s.turn_accel = cfg.number("sim.turn_accel");
  s.dwell = cfg.number("sim.dwell");
  s.sample_rate = cfg.number("sim.sample_rate");
  s.acc_noise = cfg.number("sim.acc_noise");
  s.gyro_noise = cfg.number("sim.gyro_noise");
  s.acc_bias = {cfg.number("sim.acc_bias_x"), cfg.number("sim.acc_bias_y"), cfg.number("sim.acc_bias_z")};
  s.gyro_bias = {cfg.number("sim.gyro_bias_x"), cfg.number("sim.gyro_bias_y"), cfg.number("sim.gyro_bias_z")};
  s.seed = seed_of(cfg);
  s.turn = parse_turn_model(cfg.str("sim.turn"));
  validate(s);
  return s;
}

SceneConfig scene_config_from(const Config& cfg) {
  SceneConfig s;
  const auto w = cfg.integer("scene.camera_width");
  const auto h = cfg.integer("scene.camera_height");
  if (w < 1 || h < 1 || w > 8192 || h > 8192) throw ValidationError("scene.camera_width/height must be in [1, 8192]");
  s.camera.width = static_cast<std::uint32_t>(w);
  s.camera.height = static_cast<std::uint32_t>(h);
  s.camera.focal = cfg.number("scene.focal");
  s.camera.cx = cfg.number("scene.cx");
  s.camera.cy = cfg.number("scene.cy");
  s.camera.mount = {cfg.number("mount.height"), cfg.number("mount.forward")};
  s.wall_margin = cfg.number("scene.wall_margin");
  s.item_radius = cfg.number("scene.item_radius");
  s.item_height = cfg.number("scene.item_height");
  s.endcap_gap = cfg.number("scene.endcap_gap");
  s.caption_half_angle = cfg.number("scene.caption_half_angle");
  s.caption_min_range = cfg.number("scene.caption_min_range");
  s.caption_max_range = cfg.number("scene.caption_max_range");
  s.region_fraction = cfg.number("map.region");
  s.capture_distance = cfg.number("scene.capture_distance");
  s.capture_rotation = cfg.number("scene.capture_rotation");
  validate(s);
  return s;
}

void apply_runtime(const Config& cfg) {
  const std::string level = cfg.str("log.level");
  const auto lv = spdlog::level::from_str(level);
  if (lv == spdlog::level::off && level != "off")
    throw ValidationError("log.level must be one of trace, debug, info, warn, error, off");
  spdlog::set_level(lv);
  simd::set_isa(simd::parse_isa(cfg.str("simd.isa")));
}

// ---------------------------------------------------------------------------

InferOutput run_inference(std::span<const ImuSample> raw, std::shared_ptr<const Trajectory> gt, const Config& cfg,
                          const std::vector<TimedOrientation>* orientations) {
  const double rate = cfg.number("imu.rate");
  if (!(rate > 0.0)) throw ValidationError("imu.rate must be > 0");
  const auto tau = cfg.integer("imu.tau");
  const auto stride = cfg.integer("imu.stride");
  if (tau < 1 || tau > 100000) throw ValidationError("imu.tau must be in [1, 100000]");
  if (stride < 1) throw ValidationError("imu.stride must be >= 1");

  RaeConfig rae;
  rae.k = static_cast<int>(cfg.integer("rae.k"));
  rae.angle_mode = parse_angle_mode(cfg.str("rae.angle_mode"));
  rae.reducer = parse_reducer(cfg.str("rae.reducer"));
  rae.trim_fraction = cfg.number("rae.trim");
  validate(rae);
  const double v_max = cfg.number("rae.v_max");
  if (!(v_max > 0.0)) throw ValidationError("rae.v_max must be > 0");

  const std::string est_kind = cfg.str("estimator");
  if (est_kind != "oracle" && est_kind != "network")
    throw ValidationError("estimator must be 'oracle' or 'network', got '" + est_kind + "'");
  std::unique_ptr<VelocityModel> model;
  if (est_kind == "network") {
    const std::string w = cfg.str("weights");
    if (w.empty()) throw ValidationError("estimator=network needs a weights file: pass --weights <bundle.json>");
    if (!fs::exists(w)) throw ValidationError("weights file not found: " + w);
    PipelineExpectation expect{static_cast<int>(tau), rate, true};
    model = std::make_unique<MlpVelocityModel>(load_weights(w, expect));
  } else if (!gt) {
    throw ValidationError("estimator=oracle needs a ground-truth trajectory in the dataset manifest");
  }

  InferOutput out;
  Stopwatch sw;
  validate_imu(raw);
  const auto imu = resample_uniform(raw, rate);
  if (imu.size() < static_cast<std::size_t>(tau) + 1)
    throw ValidationError(fmt::format("recording has {} samples, fewer than one window of {}", imu.size(), tau + 1));
  const auto orient = orientations != nullptr ? match_orientations(imu, *orientations)
                                              : estimate_orientation(imu, cfg.number("imu.alpha"));
  const auto hacf = to_hacf(imu, orient);
  const auto yaws = hacf_yaws(orient);
  out.seconds_orientation = sw.seconds();

  if (est_kind == "oracle") {
    if (gt->size() < imu.size())
      throw ValidationError(fmt::format("ground truth has {} frames but the IMU has {}", gt->size(), imu.size()));
    OracleConfig oc;
    oc.ground_truth = gt;
    oc.bias_hacf = {cfg.number("oracle.bias_x"), cfg.number("oracle.bias_y")};
    oc.noise_sigma = cfg.number("oracle.noise");
    if (!(oc.noise_sigma >= 0.0)) throw ValidationError("oracle.noise must be >= 0");
    if (cfg.flag("oracle.imu_heading")) {
      oc.frame_yaw_error.resize(imu.size());
      const double y0 = (*gt)[0].yaw;
      for (std::size_t k = 0; k < imu.size(); ++k)
        oc.frame_yaw_error[k] = wrap_angle(yaws[k] - wrap_angle((*gt)[k].yaw - y0));
    }
    model = std::make_unique<OracleVelocityModel>(std::move(oc), static_cast<int>(tau), seed_of(cfg));
  }

  Stopwatch se;
  const auto windows = make_windows(hacf, static_cast<int>(tau), static_cast<int>(stride));
  if (windows.empty()) throw ValidationError("recording is too short for a single window");
  const auto angles = rae_angles(rae, seed_of(cfg));
  out.windows.reserve(windows.size());
  for (const auto& w : windows) {
    auto r = rae_estimate_with_angles(w, *model, angles, rae.reducer, rae.trim_fraction, v_max);
    out.dropped_members += r.dropped;
    out.windows.push_back(r.estimate);
  }
  out.seconds_estimate = se.seconds();

  Stopwatch si;
  KalmanConfig kf;
  kf.sigma_p = cfg.number("kf.sigma_p");
  kf.sigma_v = cfg.number("kf.sigma_v");
  kf.frame_rate = rate;
  kf.t0 = imu.front().t;
  out.integration = integrate_detailed(out.windows, yaws, kf, static_cast<int>(tau));
  out.captures = capture_schedule(out.integration.trajectory, cfg.number("capture.distance"),
                                  cfg.number("capture.rotation"), parse_trigger_logic(cfg.str("capture.logic")));
  out.seconds_integrate = si.seconds();
  return out;
}

std::string velocities_csv(const IntegrationResult& r) {
  std::string out = "frame,t,vx,vy,observed\n";
  for (std::size_t i = 0; i < r.frame_velocity.size(); ++i)
    out += fmt::format("{},{},{},{},{}\n", i, io::format_double(r.trajectory[i].t),
                       io::format_double(r.frame_velocity[i].x()), io::format_double(r.frame_velocity[i].y()),
                       r.observed[i] ? 1 : 0);
  return out;
}

std::vector<Eigen::Vector2d> load_frame_velocities(const fs::path& path) {
  const auto lines = io::read_lines(path);
  const std::string src = path.string();
  if (lines.empty() || io::trim(lines[0]) != "frame,t,vx,vy,observed")
    throw ParseError(src, 1, "expected header frame,t,vx,vy,observed");
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_csv(lines[i]);
    if (f.size() != 5) throw ParseError(src, i + 1, fmt::format("expected 5 fields, found {}", f.size()));
    out.emplace_back(io::parse_double(f[2], src, i + 1), io::parse_double(f[3], src, i + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

void cmd_simulate(const Config& cfg) {
  const fs::path dir = cfg.str("data");
  const SimConfig sim = sim_config_from(cfg);
  const SceneConfig scene_cfg = scene_config_from(cfg);
  const auto n_items = cfg.integer("scene.items");

  const Trajectory gt = generate_trajectory(sim);
  const auto imu = synthesize_imu(gt, sim);
  std::vector<SceneItem> items;
  if (n_items < 0) {
    for (std::size_t n = 20; n > 0; --n) {
      try {
        items = default_items(sim, scene_cfg, n);
        break;
      } catch (const ValidationError&) {
      }
    }
  } else {
    items = default_items(sim, scene_cfg, static_cast<std::size_t>(n_items));
  }
  const Scene scene = generate_scene(sim, gt, items, scene_cfg);

  fs::create_directories(dir);
  Manifest m = Manifest::create(dir);
  std::ostringstream imu_csv;
  write_imu_csv(imu_csv, imu);
  io::write_file(dir / "imu.csv", imu_csv.str());
  io::write_file(dir / "gt_trajectory.csv", trajectory_csv(gt));
  io::write_file(dir / "items.csv", ground_truth_items_csv(scene.truth));
  std::vector<CaptionRecord> captions;
  std::vector<CaptureImage> images;
  for (const auto& c : scene.captures) {
    save_raster(dir / c.image.image_ref, c.raster);
    captions.push_back(c.caption);
    images.push_back(c.image);
  }
  io::write_file(dir / "captions.jsonl", captions_jsonl(captions));
  io::write_file(dir / "images.jsonl", images_jsonl(images));

  m.json()["sample_rate"] = sim.sample_rate;
  m.json()["frames"] = gt.size();
  m.json()["path_length"] = sweep_length(sim);
  m.set_file("imu", "imu.csv");
  m.set_file("gt_trajectory", "gt_trajectory.csv");
  m.set_file("items", "items.csv");
  m.set_file("captions", "captions.jsonl");
  m.set_file("images", "images.jsonl");
  m.set_file("rasters", "rasters");
  m.json()["calibration"] = {{"focal", scene_cfg.camera.focal},
                             {"cx", scene_cfg.camera.cx},
                             {"cy", scene_cfg.camera.cy},
                             {"mount_height", scene_cfg.camera.mount.height},
                             {"mount_forward", scene_cfg.camera.mount.forward_offset}};
  nlohmann::ordered_json simj;
  for (const auto& [k, e] : cfg.entries())
    if (k.starts_with("sim.") || k.starts_with("scene.") || k.starts_with("mount.") || k == "seed") simj[k] = e.value;
  m.json()["simulation"] = simj;
  m.save();
  spdlog::info("simulated {} frames ({:.1f} s), {} images, {} items into {}", gt.size(),
               static_cast<double>(gt.size() - 1) / sim.sample_rate, images.size(), items.size(), dir.string());
}

void cmd_infer(const Config& cfg) {
  Stopwatch total;
  const fs::path dir = cfg.str("data");
  Manifest m = Manifest::load(dir);
  const fs::path imu_path = m.require("imu", "IMU recording");
  std::shared_ptr<const Trajectory> gt;
  if (auto p = m.file("gt_trajectory"); p && fs::exists(*p)) gt = std::make_shared<Trajectory>(load_trajectory(*p));
  std::vector<TimedOrientation> timed;
  const std::string opath = cfg.str("imu.orientations");
  if (!opath.empty()) {
    if (!fs::exists(opath)) throw ValidationError("imu.orientations file not found: " + opath);
    timed = load_orientations(opath);
  }
  const auto imu = load_imu(imu_path, imu_format_for(imu_path));
  const InferOutput out = run_inference(imu, gt, cfg, opath.empty() ? nullptr : &timed);

  io::write_file(dir / "est_trajectory.csv", trajectory_csv(out.integration.trajectory));
  io::write_file(dir / "velocities.csv", velocities_csv(out.integration));
  io::write_file(dir / "captures.jsonl", captures_jsonl(out.captures));
  std::string win = "window_start,vx,vy,clamped\n";
  for (const auto& w : out.windows)
    win += fmt::format("{},{},{},{}\n", w.window_start, io::format_double(w.v.x()), io::format_double(w.v.y()),
                       w.clamped ? 1 : 0);
  io::write_file(dir / "windows.csv", win);
  m.set_file("est_trajectory", "est_trajectory.csv");
  m.set_file("velocities", "velocities.csv");
  m.set_file("captures", "captures.jsonl");
  m.set_file("windows", "windows.csv");
  m.save();

  const auto clamped = std::count_if(out.windows.begin(), out.windows.end(), [](const auto& w) { return w.clamped; });
  nlohmann::ordered_json meta = {{"generated_at", utc_now()},
                                 {"estimator", cfg.str("estimator")},
                                 {"rae_k", cfg.integer("rae.k")},
                                 {"rae_reducer", cfg.str("rae.reducer")},
                                 {"rae_angle_mode", cfg.str("rae.angle_mode")},
                                 {"tau", cfg.integer("imu.tau")},
                                 {"stride", cfg.integer("imu.stride")},
                                 {"frames", out.integration.trajectory.size()},
                                 {"windows", out.windows.size()},
                                 {"clamped_windows", clamped},
                                 {"dropped_members", out.dropped_members},
                                 {"captures", out.captures.size()},
                                 {"isa", std::string(simd::isa_name(simd::active_isa()))},
                                 {"timing_s",
                                  {{"orientation", out.seconds_orientation},
                                   {"estimate", out.seconds_estimate},
                                   {"integrate", out.seconds_integrate},
                                   {"total", total.seconds()}}}};
  write_json(dir / "infer_meta.json", meta);
  spdlog::info("inferred {} frames from {} windows (K={}), {} captures", out.integration.trajectory.size(),
               out.windows.size(), cfg.integer("rae.k"), out.captures.size());
}

void cmd_refine(const Config& cfg) {
  Stopwatch total;
  const fs::path dir = cfg.str("data");
  Manifest m = Manifest::load(dir);
  const auto est_path = m.require("est_trajectory", "run 'sweepnav infer' first");
  const auto vel_path = m.require("velocities", "run 'sweepnav infer' first");
  RefineConfig rc;
  rc.epochs = static_cast<int>(cfg.integer("refine.epochs"));
  rc.learning_rate = cfg.number("refine.lr");
  rc.lambda_loop = cfg.number("refine.lambda_loop");
  rc.lambda_rot = cfg.number("refine.lambda_rot");
  rc.lambda_smooth = cfg.number("refine.lambda_smooth");
  rc.smooth_temperature = cfg.number("refine.temperature");
  rc.rotation_gain = cfg.number("refine.rotation_gain");
  const auto hidden = cfg.integer("refine.hidden");
  if (hidden < 1) throw ValidationError("refine.hidden must be >= 1");
  rc.hidden = static_cast<std::size_t>(hidden);
  rc.seed = seed_of(cfg);
  validate(rc);

  const Trajectory est = load_trajectory(est_path);
  const auto fv = load_frame_velocities(vel_path);
  if (fv.size() != est.size())
    throw ValidationError(
        fmt::format("{} has {} rows but the trajectory has {} frames", vel_path.string(), fv.size(), est.size()));
  const auto disp = per_frame_displacements(fv, est.frame_rate);
  Stopwatch so;
  const RefineResult res = refine(est, disp, rc);
  const double opt_s = so.seconds();

  io::write_file(dir / "refined_trajectory.csv", trajectory_csv(res.refined));
  io::write_file(dir / "corrections.jsonl", corrections_jsonl(res.corrections));
  io::write_file(dir / "loss_history.csv", loss_history_csv(res.history));
  m.set_file("refined_trajectory", "refined_trajectory.csv");
  m.set_file("corrections", "corrections.jsonl");
  m.set_file("loss_history", "loss_history.csv");
  m.save();

  const double gap0 = (est.poses.back().position() - est[0].position()).norm();
  const double gap1 = (res.refined.poses.back().position() - est[0].position()).norm();
  nlohmann::ordered_json meta = {{"generated_at", utc_now()},
                                 {"frames", est.size()},
                                 {"epochs", rc.epochs},
                                 {"best_epoch", res.best_epoch},
                                 {"initial_loss", res.history.front().total},
                                 {"best_loss", res.history[res.best_epoch].total},
                                 {"endpoint_gap_before", gap0},
                                 {"endpoint_gap_after", gap1},
                                 {"timing_s", {{"optimise", opt_s}, {"total", total.seconds()}}}};
  write_json(dir / "refine_meta.json", meta);
  spdlog::info("refined {} frames: endpoint gap {:.3f} m -> {:.3f} m (best epoch {})", est.size(), gap0, gap1,
               res.best_epoch);
}

void cmd_eval(const Config& cfg) {
  const fs::path dir = cfg.str("data");
  Manifest m = Manifest::load(dir);
  const Trajectory gt = load_trajectory(m.require("gt_trajectory", "evaluation needs ground truth"));
  const auto est_path = m.require("est_trajectory", "run 'sweepnav infer' first");
  const Trajectory est = load_trajectory(est_path);
  std::vector<std::pair<std::string, Trajectory>> runs{{"estimated", est}};
  if (auto p = m.file("refined_trajectory"); p && fs::exists(*p)) runs.emplace_back("refined", load_trajectory(*p));

  const std::string frames_mode = cfg.str("eval.frames");
  if (frames_mode != "captures" && frames_mode != "all")
    throw ValidationError("eval.frames must be 'captures' or 'all'");
  const auto grids = parse_list(cfg.str("eval.grids"), "eval.grids");
  EvalOptions opts;
  opts.remove_outliers = cfg.flag("eval.outliers");
  opts.k_mad = cfg.number("eval.k_mad");
  const auto logic = parse_trigger_logic(cfg.str("capture.logic"));

  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  auto run_one = [&](const std::string& name, const Trajectory& traj, const std::vector<std::size_t>& frames,
                     const std::string& tag, double grid) {
    const EvalReport rep = evaluate(traj, gt, frames, opts);
    auto j = report_to_json(rep);
    nlohmann::ordered_json row = {{"trajectory", name}, {"frames", tag}};
    if (grid > 0.0) row["grid"] = grid;
    row.update(j);
    results.push_back(row);
    const std::string file = grid > 0.0 ? fmt::format("residuals_{}_grid{}.csv", name, io::format_double(grid))
                                        : fmt::format("residuals_{}_all.csv", name);
    io::write_file(dir / file, residuals_csv(rep));
    spdlog::info("{} [{}{}]: RTE {:.3f} m, RTE-metric {:.3f} m, RRE {:.3f} rad, coverage {:.2f}", name, tag,
                 grid > 0.0 ? fmt::format(" {} m", grid) : "", rep.rte, rep.rte_metric, rep.rre, rep.coverage);
  };
  for (const auto& [name, traj] : runs) {
    if (frames_mode == "all") {
      run_one(name, traj, {}, "all", 0.0);
      continue;
    }
    // Images are triggered online by the unrefined estimate.
    for (double g : grids) {
      std::vector<std::size_t> frames;
      for (const auto& e : capture_schedule(est, g, cfg.number("capture.rotation"), logic)) frames.push_back(e.frame);
      run_one(name, traj, frames, "captures", g);
    }
  }
  write_json(dir / "eval_report.json", {{"results", results}});
  m.set_file("eval_report", "eval_report.json");
  m.save();
}

void cmd_map(const Config& cfg) {
  Stopwatch total;
  const fs::path dir = cfg.str("data");
  Manifest m = Manifest::load(dir);
  const std::string poses = cfg.str("map.poses");
  std::string pose_key;
  if (poses == "refined") pose_key = "refined_trajectory";
  else if (poses == "estimated") pose_key = "est_trajectory";
  else if (poses == "gt") pose_key = "gt_trajectory";
  else throw ValidationError("map.poses must be refined, estimated or gt");
  const Trajectory traj = load_trajectory(m.require(pose_key, "map.poses=" + poses));
  const fs::path raster_dir = m.require("rasters", "depth rasters");
  const fs::path images_path = m.require("images", "capture image list");
  const std::string alignment = cfg.str("map.alignment");
  if (alignment != "metric" && alignment != "similarity")
    throw ValidationError("map.alignment must be 'metric' or 'similarity'");

  const std::string which = cfg.str("map.captioner");
  std::unique_ptr<CaptionSource> source;
  if (which == "mock") {
    const std::string override_path = cfg.str("map.captions");
    const fs::path p = override_path.empty() ? m.require("captions", "mock captioner") : fs::path(override_path);
    if (!fs::exists(p)) throw ValidationError("mock captions not found: " + p.string());
    source = std::make_unique<MockCaptionSource>(p);
  } else if (which == "http") {
    ServiceConfig sc;
    sc.endpoint = cfg.str("map.endpoint");
    if (sc.endpoint.empty()) throw ValidationError("map.endpoint is required for --captioner http");
    sc.token_env = cfg.str("map.token_env");
    sc.prompt = cfg.str("map.prompt");
    sc.attempts = static_cast<int>(cfg.integer("map.attempts"));
    sc.backoff_ms = static_cast<int>(cfg.integer("map.backoff_ms"));
    sc.timeout_s = cfg.number("map.timeout");
    source = std::make_unique<HttpCaptionSource>(sc);
  } else {
    throw ValidationError("map.captioner must be 'mock' or 'http', got '" + which + "'");
  }

  ObserveConfig oc;
  oc.region_fraction = cfg.number("map.region");
  oc.depth_min = cfg.number("map.depth_min");
  oc.depth_max = cfg.number("map.depth_max");
  oc.z_min = cfg.number("map.z_min");
  oc.z_max = cfg.number("map.z_max");
  oc.mount = {cfg.number("mount.height"), cfg.number("mount.forward")};
  if (m.json().contains("calibration")) {
    const auto& cal = m.json()["calibration"];
    oc.mount = {cal.value("mount_height", oc.mount.height), cal.value("mount_forward", oc.mount.forward_offset)};
  }
  ClusterConfig cc;
  cc.epsilon = cfg.number("map.epsilon");
  const auto min_obs = cfg.integer("map.min_obs");
  if (min_obs < 1) throw ValidationError("map.min_obs must be >= 1");
  cc.min_observations = static_cast<std::size_t>(min_obs);

  const auto images = load_images(images_path);
  FetchStats stats;
  const auto records = fetch_captions(images, *source, static_cast<int>(cfg.integer("map.concurrency")), &stats);
  std::vector<ItemObservation> obs;
  std::vector<std::string> skipped;
  for (const auto& rec : records) {
    if (rec.frame >= traj.size()) {
      skipped.push_back(fmt::format("{}: frame {} has no pose", rec.image_id, rec.frame));
      continue;
    }
    const fs::path rp = raster_dir / (rec.image_id + ".dras");
    if (!fs::exists(rp)) {
      skipped.push_back(fmt::format("{}: no depth raster", rec.image_id));
      continue;
    }
    const auto o = observe_items(rec, load_raster(rp), traj[rec.frame], oc, &skipped);
    obs.insert(obs.end(), o.begin(), o.end());
  }
  for (const auto& s : skipped) spdlog::debug("{}", s);
  const auto clusters = cluster_items(obs, cc);
  io::write_file(dir / "item_map.jsonl", item_map_jsonl(clusters));
  m.set_file("item_map", "item_map.jsonl");

  if (auto items_path = m.file("items"); items_path && fs::exists(*items_path)) {
    const auto truth = load_ground_truth_items(*items_path);
    Similarity2 align;
    if (poses != "gt") {
      const Trajectory gt = load_trajectory(m.require("gt_trajectory", "map evaluation alignment"));
      const std::size_t n = std::min(gt.size(), traj.size());
      std::vector<Eigen::Vector2d> pe, pg;
      for (std::size_t i = 0; i < n; ++i) {
        pe.push_back(traj[i].position());
        pg.push_back(gt[i].position());
      }
      align = align_similarity(pe, pg, alignment == "metric").transform;
    }
    nlohmann::ordered_json rep;
    bool any = false;
    for (const auto& c : clusters)
      for (const auto& t : truth) any = any || normalize_name(c.name) == normalize_name(t.name);
    if (any) {
      rep = map_report_to_json(evaluate_map(clusters, truth, align));
    } else {
      rep = {{"n_matched", 0}, {"mean_error", nullptr}, {"std_error", nullptr}};
    }
    rep["alignment"] = {{"mode", poses == "gt" ? "identity" : alignment},
                        {"scale", align.scale},
                        {"rotation", align.rotation},
                        {"tx", align.translation.x()},
                        {"ty", align.translation.y()}};
    write_json(dir / "map_eval.json", rep);
    m.set_file("map_eval", "map_eval.json");
  }
  m.save();

  nlohmann::ordered_json meta = {{"generated_at", utc_now()},
                                 {"captioner", which},
                                 {"images", images.size()},
                                 {"captions", records.size()},
                                 {"caption_failures", stats.failures},
                                 {"caption_retries", stats.retries},
                                 {"observations", obs.size()},
                                 {"clusters", clusters.size()},
                                 {"skipped", skipped},
                                 {"timing_s", {{"total", total.seconds()}}}};
  write_json(dir / "map_meta.json", meta);
  spdlog::info("mapped {} observations into {} clusters ({} skipped)", obs.size(), clusters.size(), skipped.size());
}

std::string trajectories_svg(const std::vector<std::pair<std::string, Trajectory>>& trajs) {
  constexpr double kSize = 640.0;
  constexpr double kPad = 40.0;
  static constexpr const char* kColors[] = {"#222222", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& [name, t] : trajs)
    for (const auto& p : t.poses) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  if (!std::isfinite(x0)) throw ValidationError("nothing to plot");
  const double span = std::max({x1 - x0, y1 - y0, 1e-6});
  const double s = (kSize - 2 * kPad) / span;
  const double h = (y1 - y0) * s + 2 * kPad;
  const double w = (x1 - x0) * s + 2 * kPad;
  auto px = [&](double x) { return kPad + (x - x0) * s; };
  auto py = [&](double y) { return h - kPad - (y - y0) * s; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      w, h + 20.0 * trajs.size(), w, h + 20.0 * trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& [name, t] = trajs[i];
    const char* col = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"", col);
    for (std::size_t k = 0; k < t.size(); ++k) out += fmt::format("{}{:.2f},{:.2f}", k ? " " : "", px(t[k].x), py(t[k].y));
    out += "\"/>\n";
    if (!t.empty()) {
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"red\"/>\n", px(t[0].x), py(t[0].y));
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"red\"/>\n", px(t.poses.back().x),
                         py(t.poses.back().y));
    }
    out += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" font-family=\"sans-serif\" font-size=\"13\" fill=\"{}\">{}</text>\n",
                       kPad, h + 15.0 + 20.0 * i, col, name);
  }
  out += fmt::format("<text x=\"{:.0f}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">1 m = {:.1f} px</text>\n",
                     kPad, s);
  out += "</svg>\n";
  return out;
}

void cmd_plot(const Config& cfg) {
  const fs::path dir = cfg.str("data");
  std::vector<std::pair<std::string, Trajectory>> trajs;
  const std::string inputs = cfg.str("plot.inputs");
  if (inputs.empty()) {
    Manifest m = Manifest::load(dir);
    for (const char* key : {"gt_trajectory", "est_trajectory", "refined_trajectory"})
      if (auto p = m.file(key); p && fs::exists(*p)) trajs.emplace_back(p->stem().string(), load_trajectory(*p));
  } else {
    for (auto f : io::split_csv(inputs)) {
      const fs::path p{std::string(io::trim(f))};
      if (!fs::exists(p)) throw ValidationError("plot input not found: " + p.string());
      trajs.emplace_back(p.stem().string(), load_trajectory(p));
    }
  }
  if (trajs.empty()) throw ValidationError("no trajectories to plot");
  fs::path out = cfg.str("plot.output");
  if (out.is_relative()) out = dir / out;
  io::write_file(out, trajectories_svg(trajs));
  spdlog::info("wrote {}", out.string());
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "infer", "refine", "eval", "map", "plot"};
  return names;
}

void run_command(const std::string& name, const Config& cfg) {
  apply_runtime(cfg);
  if (name == "simulate") cmd_simulate(cfg);
  else if (name == "infer") cmd_infer(cfg);
  else if (name == "refine") cmd_refine(cfg);
  else if (name == "eval") cmd_eval(cfg);
  else if (name == "map") cmd_map(cfg);
  else if (name == "plot") cmd_plot(cfg);
  else throw ValidationError("unknown command '" + name + "'");
}

}  // namespace sweepnav
