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

#ifndef SWEEPNAV_LOOP_CLOSURE_HPP_
#define SWEEPNAV_LOOP_CLOSURE_HPP_

// Offline refinement that pulls the trajectory end back to its start. A small
// MLP maps the normalised frame index to per-frame corrections (r_t, l_t).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sweepnav/pose.hpp"

namespace sweepnav {

struct CorrectionParams {
  std::vector<double> r;            // rad, |r| <= pi
  std::vector<Eigen::Vector2d> l;   // m

  std::size_t size() const { return r.size(); }
  static CorrectionParams zeros(std::size_t n);
};

struct RefineConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  double lambda_loop = 1.0;
  double lambda_rot = 1.0;
  double lambda_smooth = 1.0;
  // 0 selects the hard max with argmax subgradient; > 0 uses
  // t * log(sum(exp(|e|/t))) instead.
  double smooth_temperature = 0.0;
  std::size_t hidden = 64;
  // r = pi * tanh(gain * raw). 0 picks 1/T so that a unit change of the raw
  // output moves the accumulated heading by O(1) rather than O(T).
  double rotation_gain = 0.0;
  std::uint64_t seed = 0;
};

void validate(const RefineConfig& cfg);

// phi_t = r_1 + ... + r_t.
// p'_t = p_1 + sum_{t'=2..t} Z(p_t' - p_{t'-1} | phi_t') + l_t,
// yaw'_t = wrap(yaw_t + phi_t).
Trajectory apply_corrections(const Trajectory& traj, const CorrectionParams& params);

struct LossTerms {
  double total = 0.0;
  double loop = 0.0;
  double rot = 0.0;
  double smooth = 0.0;
  std::size_t argmax = 0;  // frame of the largest smoothness residual
};

// loop   = lambda_loop * |p'_T - p_1|^2
// rot    = lambda_rot * (r_1 + ... + r_T)^2
// smooth = lambda_smooth * max_{t>=2} |p'_t - p'_{t-1} - v_t|
// v[t] is the displacement of step t-1 -> t; v[0] is ignored.
LossTerms correction_loss(const Trajectory& traj, const CorrectionParams& params,
                          std::span<const Eigen::Vector2d> v, const RefineConfig& cfg);

// Same, plus the gradient with respect to r and l.
LossTerms correction_loss_grad(const Trajectory& traj, const CorrectionParams& params,
                               std::span<const Eigen::Vector2d> v, const RefineConfig& cfg,
                               CorrectionParams* grad);

// 1 -> hidden -> hidden -> 3 with ReLU; output (raw, lx, ly), r = pi*tanh(gain*raw).
// Flat parameter order: W1 (1 x H), b1, W2 (H x H), b2, W3 (H x 3), b3.
class CorrectionMlp {
 public:
  // Hidden layers He-uniform. The output layer is He-uniform scaled by
  // output_scale; 0 gives an exactly zero initial correction.
  CorrectionMlp(std::size_t hidden, std::uint64_t seed, double output_scale = 0.0);

  std::size_t hidden() const { return hidden_; }
  std::size_t num_parameters() const { return params_.size(); }
  double rotation_gain() const { return rotation_gain_; }
  void set_rotation_gain(double g) { rotation_gain_ = g; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  CorrectionParams forward(std::size_t frames) const;

  struct Eval {
    LossTerms terms;
    std::vector<double> grad;      // d total / d parameters (when requested)
    std::uint64_t signature = 0;   // hash of ReLU pattern and argmax
    CorrectionParams corrections;
  };
  Eval evaluate(const Trajectory& traj, std::span<const Eigen::Vector2d> v, const RefineConfig& cfg,
                bool with_grad, bool with_signature = true) const;

 private:
  std::size_t hidden_;
  double rotation_gain_ = 1.0;
  std::vector<double> params_;
};

struct RefineResult {
  Trajectory refined;
  CorrectionParams corrections;
  std::vector<LossTerms> history;  // epochs + 1 entries, entry 0 is the initial state
  std::size_t best_epoch = 0;
};

// Full-batch Adam over the MLP parameters. Returns the best-loss state.
RefineResult refine(const Trajectory& traj, std::span<const Eigen::Vector2d> v, const RefineConfig& cfg);

// Displacements of the trajectory itself; v[0] = 0.
std::vector<Eigen::Vector2d> trajectory_increments(const Trajectory& traj);

std::string corrections_jsonl(const CorrectionParams& params);
std::string loss_history_csv(std::span<const LossTerms> history);

}  // namespace sweepnav

#endif  // SWEEPNAV_LOOP_CLOSURE_HPP_
