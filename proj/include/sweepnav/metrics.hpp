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

#ifndef SWEEPNAV_METRICS_HPP_
#define SWEEPNAV_METRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "sweepnav/pose.hpp"

namespace sweepnav {

// x -> scale * R(rotation) * x + translation
struct Similarity2 {
  double scale = 1.0;
  double rotation = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
};

struct AlignmentResult {
  Similarity2 transform;
  std::vector<bool> inliers;
  double rmse = 0.0;  // over inliers
};

// Closed-form least-squares fit of gt ~ S(est) over the pairs selected by
// `mask` (all when empty). With fix_scale the scale is 1 and rotation and
// translation are the constrained optimum.
AlignmentResult align_similarity(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                                 bool fix_scale, const std::vector<bool>& mask = {});

double alignment_rmse(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                      const Similarity2& s, const std::vector<bool>& mask = {});

inline constexpr double kMadScale = 1.4826;
inline constexpr double kMadFloor = 1e-6;  // m

// Two rounds of median + k_mad * MAD on free-scale alignment residuals.
// Fewer than 4 pairs are all kept; at least half of the pairs always are.
std::vector<bool> remove_outliers(std::span<const Eigen::Vector2d> est, std::span<const Eigen::Vector2d> gt,
                                  double k_mad = 3.0);

struct EvalOptions {
  bool remove_outliers = true;
  double k_mad = 3.0;
};

struct EvalReport {
  double rte = 0.0;
  double rte_metric = 0.0;
  double rre = 0.0;
  double coverage = 0.0;
  std::size_t n_total = 0;
  std::size_t n_pairs = 0;
  std::size_t n_inliers = 0;
  Similarity2 alignment;
  Similarity2 alignment_metric;

  struct Row {
    std::size_t frame;
    Eigen::Vector2d est_aligned;
    Eigen::Vector2d gt;
    double residual;
    double yaw_error;
    bool inlier;
  };
  std::vector<Row> rows;  // free-scale alignment
};

// Frames past the end of `est` (or with non-finite estimates) count as
// missing. Empty sample_frames means every ground-truth frame.
EvalReport evaluate(const Trajectory& est, const Trajectory& gt, std::span<const std::size_t> sample_frames,
                    const EvalOptions& opts = {});

nlohmann::ordered_json report_to_json(const EvalReport& r);
std::string residuals_csv(const EvalReport& r);

}  // namespace sweepnav

#endif  // SWEEPNAV_METRICS_HPP_
