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

#include "sweepnav/rae.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sweepnav/common.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav {

AngleMode parse_angle_mode(const std::string& s) {
  if (s == "grid") return AngleMode::kGrid;
  if (s == "seeded_random") return AngleMode::kSeededRandom;
  throw ValidationError("rae.angle_mode must be grid or seeded_random, got '" + s + "'");
}

Reducer parse_reducer(const std::string& s) {
  if (s == "median") return Reducer::kMedian;
  if (s == "mean") return Reducer::kMean;
  if (s == "trimmed_mean") return Reducer::kTrimmedMean;
  throw ValidationError("rae.reducer must be median, mean or trimmed_mean, got '" + s + "'");
}

std::string to_string(AngleMode m) { return m == AngleMode::kGrid ? "grid" : "seeded_random"; }

std::string to_string(Reducer r) {
  switch (r) {
    case Reducer::kMedian:
      return "median";
    case Reducer::kMean:
      return "mean";
    case Reducer::kTrimmedMean:
      return "trimmed_mean";
  }
  return "?";
}

void validate(const RaeConfig& cfg) {
  if (cfg.k < 1) throw ValidationError(fmt::format("rae.k must be >= 1, got {}", cfg.k));
  if (!(cfg.trim_fraction >= 0.0 && cfg.trim_fraction < 0.5))
    throw ValidationError(fmt::format("rae.trim_fraction must be in [0, 0.5), got {}", cfg.trim_fraction));
}

std::vector<double> rae_angles(const RaeConfig& cfg, std::uint64_t rng_seed) {
  validate(cfg);
  std::vector<double> out(static_cast<std::size_t>(cfg.k));
  if (cfg.angle_mode == AngleMode::kGrid) {
    for (int i = 0; i < cfg.k; ++i) out[static_cast<std::size_t>(i)] = -kPi + 2.0 * kPi * i / cfg.k;
  } else {
    std::mt19937_64 rng(mix_seed(rng_seed, 0x5241450000000000ULL));
    std::uniform_real_distribution<double> dist(-kPi, kPi);
    for (auto& a : out) a = dist(rng);
  }
  return out;
}

ImuWindow rotate_window(const ImuWindow& window, double theta) {
  ImuWindow out = window;
  simd::rotate_xy(window.channel(Channel::kAx), window.channel(Channel::kAy), theta,
                  out.channel(Channel::kAx), out.channel(Channel::kAy));
  simd::rotate_xy(window.channel(Channel::kGx), window.channel(Channel::kGy), theta,
                  out.channel(Channel::kGx), out.channel(Channel::kGy));
  out.set_frame_angle(wrap_angle(window.frame_angle() + theta));
  return out;
}

namespace {

double reduce_component(std::vector<double> v, Reducer reducer, double trim_fraction) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  switch (reducer) {
    case Reducer::kMedian:
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    case Reducer::kMean:
    case Reducer::kTrimmedMean: {
      std::size_t cut = 0;
      if (reducer == Reducer::kTrimmedMean) {
        cut = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(n)));
        if (2 * cut >= n) cut = (n - 1) / 2;
      }
      // Summing the sorted values keeps the result independent of member order.
      double sum = 0.0;
      for (std::size_t i = cut; i < n - cut; ++i) sum += v[i];
      return sum / static_cast<double>(n - 2 * cut);
    }
  }
  return 0.0;
}

}  // namespace

Eigen::Vector2d reduce_members(std::span<const Eigen::Vector2d> members, Reducer reducer,
                               double trim_fraction) {
  if (members.empty()) throw RuntimeError("reduce_members: empty member set");
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(members.size());
  ys.reserve(members.size());
  for (const auto& m : members) {
    xs.push_back(m.x());
    ys.push_back(m.y());
  }
  return {reduce_component(std::move(xs), reducer, trim_fraction),
          reduce_component(std::move(ys), reducer, trim_fraction)};
}

RaeResult rae_estimate_with_angles(const ImuWindow& window, const VelocityModel& model,
                                   std::span<const double> angles, Reducer reducer, double trim_fraction,
                                   double v_max) {
  if (angles.empty()) throw ValidationError("rae: no angles");
  if (window.tau() != model.tau())
    throw ValidationError(fmt::format("window has tau={} but the {} model expects tau={}", window.tau(),
                                      model.name(), model.tau()));
  RaeResult res;
  res.members.reserve(angles.size());
  for (const double theta : angles) {
    if (!std::isfinite(theta)) throw ValidationError("rae: non-finite angle");
    const Eigen::Vector2d raw = model.predict(rotate_window(window, theta));
    if (!raw.allFinite()) {
      ++res.dropped;
      continue;
    }
    res.members.push_back(rotate2(raw, -theta));
  }
  if (res.members.empty())
    throw RuntimeError(fmt::format("rae: all {} ensemble members were non-finite for window at frame {}",
                                   angles.size(), window.start_frame()));
  VelocityEstimate est{reduce_members(res.members, reducer, trim_fraction), window.start_frame(), false};
  const double n = est.v.norm();
  if (n > v_max) {
    est.v *= v_max / n;
    est.clamped = true;
  }
  res.estimate = est;
  return res;
}

RaeResult rae_estimate_detailed(const ImuWindow& window, const VelocityModel& model, const RaeConfig& cfg,
                                std::uint64_t rng_seed, double v_max) {
  const auto angles = rae_angles(cfg, rng_seed);
  return rae_estimate_with_angles(window, model, angles, cfg.reducer, cfg.trim_fraction, v_max);
}

VelocityEstimate rae_estimate(const ImuWindow& window, const VelocityModel& model, const RaeConfig& cfg,
                              std::uint64_t rng_seed, double v_max) {
  return rae_estimate_detailed(window, model, cfg, rng_seed, v_max).estimate;
}

double equivariance_error(const ImuWindow& window, const VelocityModel& model, std::span<const double> thetas) {
  if (thetas.size() < 2) throw ValidationError("equivariance_error needs at least two angles");
  std::vector<Eigen::Vector2d> back;
  back.reserve(thetas.size());
  for (const double theta : thetas) back.push_back(rotate2(model.predict(rotate_window(window, theta)), -theta));
  double worst = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i)
    for (std::size_t j = i + 1; j < back.size(); ++j) worst = std::max(worst, (back[i] - back[j]).norm());
  return worst;
}

}  // namespace sweepnav
