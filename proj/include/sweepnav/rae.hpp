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

#ifndef SWEEPNAV_RAE_HPP_
#define SWEEPNAV_RAE_HPP_

// Rotation-augmented ensemble: rotate a window about gravity by K angles,
// estimate, rotate each estimate back and reduce the K results.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sweepnav/estimator.hpp"
#include "sweepnav/imu.hpp"

namespace sweepnav {

enum class AngleMode { kGrid, kSeededRandom };
enum class Reducer { kMedian, kMean, kTrimmedMean };

AngleMode parse_angle_mode(const std::string& s);
Reducer parse_reducer(const std::string& s);
std::string to_string(AngleMode m);
std::string to_string(Reducer r);

struct RaeConfig {
  int k = 5;
  AngleMode angle_mode = AngleMode::kGrid;
  Reducer reducer = Reducer::kMedian;
  double trim_fraction = 0.2;  // per side, kTrimmedMean only
};

void validate(const RaeConfig& cfg);

// Grid: theta_k = -pi + 2*pi*k/K. Seeded random: K uniform draws from
// [-pi, pi); the seed fixes them for a whole recording.
std::vector<double> rae_angles(const RaeConfig& cfg, std::uint64_t rng_seed);

// Rotates every acceleration and angular-velocity vector by theta about z.
ImuWindow rotate_window(const ImuWindow& window, double theta);

// Component-wise reduction of a member set. Order of members never matters.
Eigen::Vector2d reduce_members(std::span<const Eigen::Vector2d> members, Reducer reducer,
                               double trim_fraction = 0.2);

struct RaeResult {
  VelocityEstimate estimate;
  std::vector<Eigen::Vector2d> members;  // rotated back, finite only
  std::size_t dropped = 0;
};

// Members whose raw estimate is non-finite are dropped; RuntimeError if all
// are. The reduced velocity is clamped to v_max.
RaeResult rae_estimate_detailed(const ImuWindow& window, const VelocityModel& model, const RaeConfig& cfg,
                                std::uint64_t rng_seed, double v_max = kDefaultVMax);
VelocityEstimate rae_estimate(const ImuWindow& window, const VelocityModel& model, const RaeConfig& cfg,
                              std::uint64_t rng_seed, double v_max = kDefaultVMax);

// Same as above with precomputed angles.
RaeResult rae_estimate_with_angles(const ImuWindow& window, const VelocityModel& model,
                                   std::span<const double> angles, Reducer reducer, double trim_fraction,
                                   double v_max = kDefaultVMax);

// max over pairs of |v_i - v_j| for the rotated-back estimates at `thetas`.
double equivariance_error(const ImuWindow& window, const VelocityModel& model,
                          std::span<const double> thetas);

}  // namespace sweepnav

#endif  // SWEEPNAV_RAE_HPP_
