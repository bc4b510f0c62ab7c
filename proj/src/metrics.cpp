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

#include "sweepnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

Eigen::Vector2d Similarity2::apply(const Eigen::Vector2d& p) const {
  return scale * rotate2(p, rotation) + translation;
}

namespace {

bool selected(const std::vector<bool>& mask, std::size_t i) { return mask.empty() || mask[i]; }

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> residuals(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                              const Similarity2& s) {
  std::vector<double> r(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) r[i] = (s.apply(est[i]) - gt[i]).norm();
  return r;
}

std::vector<bool> mad_flags(const std::vector<double>& r, double k_mad) {
  const double med = median_of(r);
  std::vector<double> dev(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
  const double mad = std::max(kMadScale * median_of(dev), kMadFloor);
  const double thr = med + k_mad * mad;
  std::vector<bool> keep(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) keep[i] = r[i] <= thr;
  return keep;
}

void keep_at_least_half(std::vector<bool>& keep, const std::vector<double>& r) {
  const std::size_t need = (r.size() + 1) / 2;
  if (static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)) >= need) return;
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
  std::fill(keep.begin(), keep.end(), false);
  for (std::size_t i = 0; i < need; ++i) keep[order[i]] = true;
}

}  // namespace

AlignmentResult align_similarity(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                                 bool fix_scale, const std::vector<bool>& mask) {
  if (est.size() != gt.size())
    throw ValidationError(fmt::format("alignment needs equal-length point sets ({} vs {})", est.size(), gt.size()));
  if (!mask.empty() && mask.size() != est.size()) throw ValidationError("alignment mask length mismatch");
  std::size_t n = 0;
  Eigen::Vector2d me = Eigen::Vector2d::Zero();
  Eigen::Vector2d mg = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!selected(mask, i)) continue;
    me += est[i];
    mg += gt[i];
    ++n;
  }
  if (n < 2) throw ValidationError(fmt::format("alignment needs at least 2 pose pairs, got {}", n));
  me /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double c = 0.0, s = 0.0, see = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!selected(mask, i)) continue;
    const Eigen::Vector2d e = est[i] - me;
    const Eigen::Vector2d g = gt[i] - mg;
    c += e.dot(g);
    s += e.x() * g.y() - e.y() * g.x();
    see += e.squaredNorm();
    sgg += g.squaredNorm();
  }
  const double nd = static_cast<double>(n);
  const double tiny = 1e-24 * nd;
  if (see <= tiny * (1.0 + me.squaredNorm())) throw ValidationError("alignment is degenerate: estimated points coincide");
  if (sgg <= tiny * (1.0 + mg.squaredNorm())) throw ValidationError("alignment is degenerate: reference points coincide");

  AlignmentResult res;
  res.transform.rotation = std::atan2(s, c);
  res.transform.scale = fix_scale ? 1.0 : std::hypot(c, s) / see;
  res.transform.translation = mg - res.transform.scale * rotate2(me, res.transform.rotation);
  res.inliers.resize(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) res.inliers[i] = selected(mask, i);
  res.rmse = alignment_rmse(est, gt, res.transform, mask);
  return res;
}

double alignment_rmse(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                      const Similarity2& sim, const std::vector<bool>& mask) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!selected(mask, i)) continue;
    acc += (sim.apply(est[i]) - gt[i]).squaredNorm();
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

std::vector<bool> remove_outliers(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                                  double k_mad) {
  if (!(k_mad > 0.0)) throw ValidationError("k_mad must be > 0");
  std::vector<bool> keep(est.size(), true);
  if (est.size() < 4) return keep;
  const auto first = align_similarity(est, gt, false);
  auto r = residuals(est, gt, first.transform);
  keep = mad_flags(r, k_mad);
  keep_at_least_half(keep, r);

  const auto second = align_similarity(est, gt, false, keep);
  r = residuals(est, gt, second.transform);
  keep = mad_flags(r, k_mad);
  keep_at_least_half(keep, r);
  return keep;
}

EvalReport evaluate(const Trajectory& est, const Trajectory& gt, std::span<const std::size_t> sample_frames,
                    const EvalOptions& opts) {
  std::vector<std::size_t> frames(sample_frames.begin(), sample_frames.end());
  if (frames.empty()) {
    frames.resize(gt.size());
    std::iota(frames.begin(), frames.end(), 0);
  }
  EvalReport rep;
  rep.n_total = frames.size();
  std::vector<std::size_t> used;
  std::vector<Eigen::Vector2d> pe, pg;
  std::vector<double> ye, yg;
  for (std::size_t f : frames) {
    if (f >= gt.size()) throw ValidationError(fmt::format("sample frame {} is outside the ground truth", f));
    if (f >= est.size()) continue;
    const Pose2& e = est[f];
    if (!std::isfinite(e.x) || !std::isfinite(e.y) || !std::isfinite(e.yaw)) continue;
    used.push_back(f);
    pe.push_back(e.position());
    pg.push_back(gt[f].position());
    ye.push_back(e.yaw);
    yg.push_back(gt[f].yaw);
  }
  rep.n_pairs = used.size();
  rep.coverage = rep.n_total == 0 ? 0.0 : static_cast<double>(rep.n_pairs) / static_cast<double>(rep.n_total);
  if (rep.n_pairs < 2)
    throw ValidationError(fmt::format("evaluation needs at least 2 comparable pose pairs, got {}", rep.n_pairs));

  std::vector<bool> mask = opts.remove_outliers ? remove_outliers(pe, pg, opts.k_mad)
                                                : std::vector<bool>(pe.size(), true);
  rep.n_inliers = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  const auto free = align_similarity(pe, pg, false, mask);
  const auto fixed = align_similarity(pe, pg, true, mask);
  rep.rte = free.rmse;
  rep.rte_metric = fixed.rmse;
  rep.alignment = free.transform;
  rep.alignment_metric = fixed.transform;

  double yaw_acc = 0.0;
  for (std::size_t i = 0; i < pe.size(); ++i) {
    const double dy = std::abs(wrap_angle(ye[i] + free.transform.rotation - yg[i]));
    const Eigen::Vector2d a = free.transform.apply(pe[i]);
    rep.rows.push_back({used[i], a, pg[i], (a - pg[i]).norm(), dy, static_cast<bool>(mask[i])});
    if (mask[i]) yaw_acc += dy;
  }
  rep.rre = yaw_acc / static_cast<double>(rep.n_inliers);
  return rep;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  auto sim = [](const Similarity2& s) {
    return nlohmann::ordered_json{{"scale", s.scale},
                                  {"rotation", s.rotation},
                                  {"tx", s.translation.x()},
                                  {"ty", s.translation.y()}};
  };
  return {{"rte", r.rte},
          {"rte_metric", r.rte_metric},
          {"rre", r.rre},
          {"coverage", r.coverage},
          {"n_total", r.n_total},
          {"n_pairs", r.n_pairs},
          {"n_inliers", r.n_inliers},
          {"alignment", sim(r.alignment)},
          {"alignment_metric", sim(r.alignment_metric)}};
}

std::string residuals_csv(const EvalReport& r) {
  std::string out = "frame,x_est,y_est,x_gt,y_gt,residual,yaw_error,inlier\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", row.frame, io::format_double(row.est_aligned.x()),
                       io::format_double(row.est_aligned.y()), io::format_double(row.gt.x()),
                       io::format_double(row.gt.y()), io::format_double(row.residual),
                       io::format_double(row.yaw_error), row.inlier ? 1 : 0);
  }
  return out;
}

}  // namespace sweepnav
