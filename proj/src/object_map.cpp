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

#include "sweepnav/object_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

static_assert(std::endian::native == std::endian::little, "raster I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'R', 'A', 'S'};
constexpr std::uint8_t kRasterVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& off, const std::string& source) {
  if (off + sizeof(T) > bytes.size()) throw ValidationError(source + ": truncated depth raster");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::string encode_raster(const DepthRaster& r) {
  if (r.depth.size() != static_cast<std::size_t>(r.width) * r.height)
    throw ValidationError("depth raster size does not match width x height");
  std::string out(kMagic, 4);
  put(out, kRasterVersion);
  put(out, r.width);
  put(out, r.height);
  put(out, r.focal);
  put(out, r.cx);
  put(out, r.cy);
  out.append(reinterpret_cast<const char*>(r.depth.data()), r.depth.size() * sizeof(float));
  return out;
}

DepthRaster decode_raster(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ValidationError(source + ": not a depth raster (bad magic)");
  std::size_t off = 4;
  const auto version = get<std::uint8_t>(bytes, off, source);
  if (version != kRasterVersion) throw ValidationError(fmt::format("{}: unsupported raster version {}", source, version));
  DepthRaster r;
  r.width = get<std::uint32_t>(bytes, off, source);
  r.height = get<std::uint32_t>(bytes, off, source);
  r.focal = get<float>(bytes, off, source);
  r.cx = get<float>(bytes, off, source);
  r.cy = get<float>(bytes, off, source);
  if (!(r.focal > 0.0f) || !std::isfinite(r.focal)) throw ValidationError(source + ": focal length must be > 0");
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  if (bytes.size() - off != n * sizeof(float))
    throw ValidationError(fmt::format("{}: expected {} depth values, found {} bytes", source, n, bytes.size() - off));
  r.depth.resize(n);
  std::memcpy(r.depth.data(), bytes.data() + off, n * sizeof(float));
  return r;
}

DepthRaster load_raster(const std::filesystem::path& path) {
  return decode_raster(io::read_file(path), path.string());
}

void save_raster(const std::filesystem::path& path, const DepthRaster& r) { io::write_file(path, encode_raster(r)); }

Eigen::Vector3d pixel_to_camera(const DepthRaster& r, double u, double v, double depth) {
  return {(u - r.cx) * depth / r.focal, (v - r.cy) * depth / r.focal, depth};
}

Eigen::Vector3d camera_to_world(const Eigen::Vector3d& cam, const Pose2& pose, const MountExtrinsic& mount) {
  const Eigen::Vector2d robot(cam.z() + mount.forward_offset, -cam.x());
  const Eigen::Vector2d w = pose.position() + rotate2(robot, pose.yaw);
  return {w.x(), w.y(), mount.height - cam.y()};
}

Eigen::Vector3d world_to_camera(const Eigen::Vector3d& world, const Pose2& pose, const MountExtrinsic& mount) {
  const Eigen::Vector2d robot = rotate2(world.head<2>() - pose.position(), -pose.yaw);
  return {-robot.y(), mount.height - world.z(), robot.x() - mount.forward_offset};
}

Eigen::Vector3d camera_to_pixel(const DepthRaster& r, const Eigen::Vector3d& cam) {
  return {r.cx + r.focal * cam.x() / cam.z(), r.cy + r.focal * cam.y() / cam.z(), cam.z()};
}

std::vector<Eigen::Vector3d> unproject(const DepthRaster& r, const PixelRect& rect, const Pose2& pose,
                                       const MountExtrinsic& mount) {
  if (rect.u1 > r.width || rect.v1 > r.height || rect.u0 > rect.u1 || rect.v0 > rect.v1)
    throw ValidationError("pixel region lies outside the raster");
  if (!(r.focal > 0.0f)) throw ValidationError("focal length must be > 0");
  std::vector<Eigen::Vector3d> out;
  for (std::uint32_t v = rect.v0; v < rect.v1; ++v) {
    for (std::uint32_t u = rect.u0; u < rect.u1; ++u) {
      const double d = r.at(u, v);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      out.push_back(camera_to_world(pixel_to_camera(r, u, v, d), pose, mount));
    }
  }
  return out;
}

PixelRect central_region(const DepthRaster& r, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("region fraction must be in (0, 1]");
  auto span = [&](std::uint32_t n, std::uint32_t& a, std::uint32_t& b) {
    const double lo = std::floor(n * (0.5 - fraction / 2.0));
    const double hi = std::ceil(n * (0.5 + fraction / 2.0));
    a = static_cast<std::uint32_t>(std::max(0.0, lo));
    b = static_cast<std::uint32_t>(std::min<double>(n, hi));
    if (b <= a && n > 0) b = std::min(n, a + 1);
  };
  PixelRect rect;
  span(r.width, rect.u0, rect.u1);
  span(r.height, rect.v0, rect.v1);
  return rect;
}

std::vector<CaptionRecord> parse_captions_jsonl(std::string_view text, const std::string& source) {
  std::vector<CaptionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CaptionRecord rec;
      rec.image_id = j.at("image_id").get<std::string>();
      rec.frame = j.at("frame").get<std::size_t>();
      rec.items = j.at("items").get<std::vector<std::string>>();
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

std::vector<CaptionRecord> load_captions(const std::filesystem::path& path) {
  return parse_captions_jsonl(io::read_file(path), path.string());
}

std::string captions_jsonl(std::span<const CaptionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j = {{"image_id", r.image_id}, {"frame", r.frame}, {"items", r.items}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string normalize_name(std::string_view raw) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw RuntimeError("ICU NFC normalizer unavailable");
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s = nfc->normalize(s, status);
  if (U_FAILURE(status)) throw ValidationError("item name is not valid Unicode");
  s.toLower(icu::Locale::getRoot());
  icu::UnicodeString cleaned;
  bool pending_space = false;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (u_ispunct(c)) continue;
    if (u_isUWhiteSpace(c)) {
      pending_space = cleaned.length() > 0;
      continue;
    }
    if (pending_space) cleaned.append(static_cast<UChar>(0x20));
    pending_space = false;
    cleaned.append(c);
  }
  // Lowercasing can denormalise (e.g. some compatibility sequences).
  cleaned = nfc->normalize(cleaned, status);
  std::string out;
  cleaned.toUTF8String(out);
  return out;
}

std::vector<ItemObservation> observe_items(const CaptionRecord& caption, const DepthRaster& raster,
                                           const Pose2& pose, const ObserveConfig& cfg,
                                           std::vector<std::string>* skipped) {
  auto skip = [&](const std::string& why) {
    spdlog::debug("{}", why);
    if (skipped != nullptr) skipped->push_back(why);
  };
  const PixelRect rect = central_region(raster, cfg.region_fraction);
  std::vector<double> depths;
  for (std::uint32_t v = rect.v0; v < rect.v1; ++v)
    for (std::uint32_t u = rect.u0; u < rect.u1; ++u) {
      const double d = raster.at(u, v);
      if (std::isfinite(d) && d > 0.0 && d >= cfg.depth_min && d <= cfg.depth_max) depths.push_back(d);
    }
  std::vector<ItemObservation> out;
  if (depths.empty()) {
    for (const auto& item : caption.items)
      skip(fmt::format("{}: item '{}' skipped, no valid depth in the central region", caption.image_id, item));
    return out;
  }
  std::sort(depths.begin(), depths.end());
  const std::size_t n = depths.size();
  const double d = n % 2 == 1 ? depths[n / 2] : 0.5 * (depths[n / 2 - 1] + depths[n / 2]);
  const Eigen::Vector3d p = camera_to_world(pixel_to_camera(raster, raster.cx, raster.cy, d), pose, cfg.mount);
  for (const auto& item : caption.items) {
    std::string name = normalize_name(item);
    if (name.empty()) {
      skip(fmt::format("{}: item '{}' is empty after normalisation", caption.image_id, item));
      continue;
    }
    if (!p.allFinite() || p.z() < cfg.z_min || p.z() > cfg.z_max) {
      skip(fmt::format("{}: item '{}' skipped, point height {} outside [{}, {}]", caption.image_id, name, p.z(),
                       cfg.z_min, cfg.z_max));
      continue;
    }
    out.push_back({std::move(name), p, caption.image_id});
  }
  return out;
}

namespace {

bool point_less(const ItemObservation& a, const ItemObservation& b) {
  if (a.point.x() != b.point.x()) return a.point.x() < b.point.x();
  if (a.point.y() != b.point.y()) return a.point.y() < b.point.y();
  if (a.point.z() != b.point.z()) return a.point.z() < b.point.z();
  return a.image_id < b.image_id;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

std::vector<ItemCluster> cluster_items(std::span<const ItemObservation> observations, const ClusterConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) throw ValidationError("cluster epsilon must be >= 0");
  std::map<std::string, std::vector<ItemObservation>> by_name;
  for (const auto& o : observations) by_name[o.name].push_back(o);

  std::vector<ItemCluster> out;
  for (auto& [name, obs] : by_name) {
    std::sort(obs.begin(), obs.end(), point_less);
    const std::size_t n = obs.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if ((obs[i].point - obs[j].point).norm() <= cfg.epsilon) {
          const std::size_t a = find_root(parent, i);
          const std::size_t b = find_root(parent, j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    // Roots are the smallest member index, so visiting in sorted order yields
    // clusters ordered by their smallest member.
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::size_t, std::size_t> slot;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t root = find_root(parent, i);
      auto [it, inserted] = slot.try_emplace(root, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    for (const auto& g : groups) {
      if (g.size() < cfg.min_observations) continue;
      ItemCluster c;
      c.name = name;
      for (std::size_t i : g) c.centroid += obs[i].point;
      c.centroid /= static_cast<double>(g.size());
      double acc = 0.0;
      for (std::size_t i : g) acc += (obs[i].point - c.centroid).squaredNorm();
      c.spread = std::sqrt(acc / static_cast<double>(g.size()));
      c.n_observations = g.size();
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::string item_map_jsonl(std::span<const ItemCluster> clusters) {
  std::string out;
  for (const auto& c : clusters) {
    nlohmann::ordered_json j = {{"name", c.name},          {"x", c.centroid.x()},
                                {"y", c.centroid.y()},     {"z", c.centroid.z()},
                                {"n_obs", c.n_observations}, {"spread", c.spread}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ItemCluster> load_item_map(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<ItemCluster> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      ItemCluster c;
      c.name = j.at("name").get<std::string>();
      c.centroid = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
      c.n_observations = j.at("n_obs").get<std::size_t>();
      c.spread = j.at("spread").get<double>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), i + 1, e.what());
    }
  }
  return out;
}

std::vector<NamedPosition> load_ground_truth_items(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string src = path.string();
  if (lines.empty() || io::trim(lines[0]) != "name,x,y,z") throw ParseError(src, 1, "expected header name,x,y,z");
  std::vector<NamedPosition> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_csv(lines[i]);
    if (f.size() != 4) throw ParseError(src, i + 1, fmt::format("expected 4 fields, found {}", f.size()));
    out.push_back({std::string(io::trim(f[0])),
                   {io::parse_double(f[1], src, i + 1), io::parse_double(f[2], src, i + 1),
                    io::parse_double(f[3], src, i + 1)}});
  }
  return out;
}

std::string ground_truth_items_csv(std::span<const NamedPosition> items) {
  std::string out = "name,x,y,z\n";
  for (const auto& it : items)
    out += fmt::format("{},{},{},{}\n", it.name, io::format_double(it.position.x()),
                       io::format_double(it.position.y()), io::format_double(it.position.z()));
  return out;
}

MapEvalReport evaluate_map(std::span<const ItemCluster> estimated, std::span<const NamedPosition> truth,
                           const Similarity2& alignment) {
  std::map<std::string, const ItemCluster*> est;
  for (const auto& c : estimated) {
    const std::string key = normalize_name(c.name);
    auto it = est.find(key);
    if (it == est.end() || c.n_observations > it->second->n_observations) est[key] = &c;
  }
  std::map<std::string, Eigen::Vector3d> gt;
  for (const auto& t : truth) gt.try_emplace(normalize_name(t.name), t.position);

  MapEvalReport rep;
  for (const auto& [name, c] : est) {
    auto it = gt.find(name);
    if (it == gt.end()) {
      rep.unmatched_estimated.push_back(name);
      continue;
    }
    const Eigen::Vector2d e = alignment.apply(c->centroid.head<2>());
    const Eigen::Vector2d g = it->second.head<2>();
    rep.matched.push_back({name, e, g, (e - g).norm()});
  }
  for (const auto& [name, p] : gt)
    if (!est.contains(name)) rep.unmatched_truth.push_back(name);
  if (rep.matched.empty()) throw ValidationError("map evaluation: no item name appears in both maps");
  double sum = 0.0;
  for (const auto& m : rep.matched) sum += m.error;
  const double n = static_cast<double>(rep.matched.size());
  rep.mean_error = sum / n;
  double var = 0.0;
  for (const auto& m : rep.matched) var += (m.error - rep.mean_error) * (m.error - rep.mean_error);
  rep.std_error = std::sqrt(var / n);
  return rep;
}

nlohmann::ordered_json map_report_to_json(const MapEvalReport& r) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& m : r.matched)
    items.push_back({{"name", m.name},
                     {"x_est", m.estimated.x()},
                     {"y_est", m.estimated.y()},
                     {"x_gt", m.truth.x()},
                     {"y_gt", m.truth.y()},
                     {"error", m.error}});
  return {{"n_matched", r.matched.size()},
          {"mean_error", r.mean_error},
          {"std_error", r.std_error},
          {"items", items},
          {"unmatched_estimated", r.unmatched_estimated},
          {"unmatched_truth", r.unmatched_truth}};
}

}  // namespace sweepnav
